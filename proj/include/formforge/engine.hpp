#pragma once

// Inserting test assignments into a form and submitting it. Targets are the
// in-process simulator (below) or a live WebDriver session (webdriver.hpp).

#include <cmath>
#include <map>
#include <optional>
#include <string>

#include "formforge/extractor.hpp"
#include "formforge/form_model.hpp"

namespace formforge {

enum class FailureReason {
  FormatError,      // reply not in the requested format
  ContentRejected,  // values refused at submission
  ConnectionError,  // gateway failure
};

inline std::string_view to_string(FailureReason r) {
  switch (r) {
    case FailureReason::FormatError: return "FormatError";
    case FailureReason::ContentRejected: return "ContentRejected";
    case FailureReason::ConnectionError: return "ConnectionError";
  }
  return "?";
}

inline std::optional<FailureReason> failure_reason(std::string_view s) {
  for (auto r : {FailureReason::FormatError, FailureReason::ContentRejected, FailureReason::ConnectionError})
    if (iequals(to_string(r), s)) return r;
  return std::nullopt;
}

/// Pipeline stage that can fail a trial. Each FailureReason has exactly one owner.
enum class Stage { Gateway, Extract, Submit };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Gateway: return "gateway";
    case Stage::Extract: return "extract";
    case Stage::Submit: return "submit";
  }
  return "?";
}

inline std::optional<Stage> stage_from_string(std::string_view s) {
  for (auto st : {Stage::Gateway, Stage::Extract, Stage::Submit})
    if (iequals(to_string(st), s)) return st;
  return std::nullopt;
}

inline Stage owner_stage(FailureReason r) {
  switch (r) {
    case FailureReason::FormatError: return Stage::Extract;
    case FailureReason::ContentRejected: return Stage::Submit;
    case FailureReason::ConnectionError: return Stage::Gateway;
  }
  return Stage::Submit;
}

struct SubmissionOutcome {
  enum class Status { Success, Failed };
  Status status = Status::Success;
  std::optional<FailureReason> reason;  // set iff Failed
  std::string detail;

  bool success() const { return status == Status::Success; }

  static SubmissionOutcome ok(std::string detail) { return {Status::Success, std::nullopt, std::move(detail)}; }
  static SubmissionOutcome failed(FailureReason r, std::string detail) {
    return {Status::Failed, r, std::move(detail)};
  }

  bool operator==(const SubmissionOutcome&) const = default;
};

class EngineError : public Error {
 public:
  enum class Kind { SessionLost, Protocol };
  EngineError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Opaque handle to an element of a target (simulator index or WebDriver element id).
using ElementRef = std::string;

class FormTarget {
 public:
  virtual ~FormTarget() = default;
  virtual std::optional<ElementRef> find(const Selector& sel) = 0;
  /// Fallback for bare keys: first element whose name attribute equals `name`.
  virtual std::optional<ElementRef> find_by_name(const std::string& name) = 0;
  /// Returns false when the element cannot take input.
  virtual bool fill(const ElementRef& el, const std::string& value) = 0;
  /// Activates the submit control and reports what happened.
  virtual SubmissionOutcome submit() = 0;
};

/// Fills what resolves, skips what does not, then submits.
inline SubmissionOutcome insert_and_submit(const TestAssignment& assign, FormTarget& target) {
  int unresolved = 0;
  int rejected = 0;
  for (const auto& [sel, value] : assign.pairs) {
    auto ref = target.find(sel);
    if (!ref && sel.kind == Selector::Kind::Tag) ref = target.find_by_name(sel.name);
    if (!ref) {
      ++unresolved;
      continue;
    }
    if (!target.fill(*ref, value)) ++rejected;
  }
  auto outcome = target.submit();
  std::string notes;
  if (unresolved) notes += "; " + std::to_string(unresolved) + " selector(s) unresolved";
  if (rejected) notes += "; " + std::to_string(rejected) + " value(s) not accepted by their element";
  if (!assign.malformed.empty()) notes += "; " + std::to_string(assign.malformed.size()) + " malformed entr" +
                                          (assign.malformed.size() == 1 ? "y" : "ies") + " ignored";
  outcome.detail += notes;
  return outcome;
}

// ---------------------------------------------------------------------------
// Simulator

namespace sim_detail {

inline std::string input_type(const HtmlElement& el) {
  if (el.tag != "input") return el.tag;
  auto t = el.attr("type");
  return t && !t->empty() ? to_lower(*t) : "text";
}

inline std::string digits_of(std::string_view s) {
  std::string d;
  for (char c : s)
    if (c >= '0' && c <= '9') d += c;
  return d;
}

/// What a browser keeps after typing `typed` into an empty field of the given type.
inline std::string sanitize(const std::string& type, const std::string& typed) {
  if (type == "number" || type == "range") {
    std::string kept;
    for (char c : typed)
      if ((c >= '0' && c <= '9') || c == '.' || c == 'e' || c == 'E' || c == '+' || c == '-') kept += c;
    double x;
    return form_detail::parse_number(kept, x) ? kept : "";
  }
  if (type == "datetime-local") {
    auto d = digits_of(typed);
    if (d.size() != 12) return "";
    return d.substr(0, 4) + "-" + d.substr(4, 2) + "-" + d.substr(6, 2) + "T" + d.substr(8, 2) + ":" + d.substr(10, 2);
  }
  if (type == "date") {
    auto d = digits_of(typed);
    if (d.size() != 8) return "";
    return d.substr(0, 4) + "-" + d.substr(4, 2) + "-" + d.substr(6, 2);
  }
  if (type == "time") {
    auto d = digits_of(typed);
    if (d.size() != 4) return "";
    return d.substr(0, 2) + ":" + d.substr(2, 2);
  }
  return typed;
}

inline bool is_text_like(const std::string& type) {
  return type == "text" || type == "email" || type == "password" || type == "search" || type == "tel" ||
         type == "url" || type == "textarea";
}

}  // namespace sim_detail

/// Applies browser-like value semantics to a FormModel's markup and checks its
/// validation rules on submit.
class FormSimulator final : public FormTarget {
 public:
  explicit FormSimulator(const FormModel& model) : model_(model), elements_(preorder(model_.form)) {
    for (std::size_t i = 0; i < elements_.size(); ++i) reset(i);
  }

  std::optional<ElementRef> find(const Selector& sel) override {
    for (std::size_t i = 0; i < elements_.size(); ++i)
      if (matches(sel, *elements_[i])) return std::to_string(i);
    return std::nullopt;
  }

  std::optional<ElementRef> find_by_name(const std::string& name) override {
    for (std::size_t i = 0; i < elements_.size(); ++i) {
      auto n = elements_[i]->attr("name");
      if (n && *n == name) return std::to_string(i);
    }
    return std::nullopt;
  }

  bool fill(const ElementRef& ref, const std::string& value) override {
    auto i = index_of(ref);
    const auto& el = *elements_[i];
    if (el.has_attr("disabled") || el.has_attr("readonly")) return false;
    auto type = sim_detail::input_type(el);
    auto& st = state_[i];

    if (el.tag == "select") {
      for (const auto* o : preorder(el)) {
        if (o->tag != "option") continue;
        auto v = o->attr("value");
        std::string ov = v ? *v : o->text;
        if (ov == value || o->text == value) {
          st.value = ov;
          return true;
        }
      }
      return false;
    }
    if (type == "checkbox") {
      if (iequals(trim(value), "true")) st.checked = true;
      return true;
    }
    if (type == "radio") {
      auto own = el.attr("value");
      if (!(iequals(trim(value), "true") || (own && *own == value))) return true;
      auto name = el.attr("name");
      for (std::size_t k = 0; k < elements_.size(); ++k) {
        auto other = elements_[k]->attr("name");
        if (name && other && *other == *name && sim_detail::input_type(*elements_[k]) == "radio")
          state_[k].checked = false;
      }
      st.checked = true;
      return true;
    }
    if (type == "hidden" || type == "submit" || type == "button" || type == "reset" || type == "image" ||
        type == "file" || el.tag == "button")
      return false;
    if (el.tag != "input" && el.tag != "textarea") return false;

    if (sim_detail::is_text_like(type))
      st.value += value;
    else
      st.value = sim_detail::sanitize(type, st.value + value);
    return true;
  }

  SubmissionOutcome submit() override {
    if (!find(model_.submit_selector))
      return SubmissionOutcome::failed(FailureReason::ContentRejected, "submit control not found");
    for (const auto& f : model_.fields) {
      auto idx = field_index(f);
      if (!idx) return SubmissionOutcome::failed(FailureReason::ContentRejected, "field '" + f.id + "' missing");
      const auto& el = *elements_[*idx];
      auto type = sim_detail::input_type(el);
      bool checkable = type == "checkbox" || type == "radio";
      auto value = current_value(*idx);

      if (checkable) {
        auto chosen = checked_in_group(*idx);
        if (f.required && !chosen)
          return SubmissionOutcome::failed(FailureReason::ContentRejected, "field '" + f.id + "' must be checked");
        if (chosen && f.validation && type == "radio") {
          auto v = elements_[*chosen]->attr("value");
          auto why = check_rule(*f.validation, v ? *v : "on");
          if (!why.empty())
            return SubmissionOutcome::failed(FailureReason::ContentRejected, "field '" + f.id + "' " + why);
        }
        continue;
      }
      if (value.empty()) {
        if (f.required)
          return SubmissionOutcome::failed(FailureReason::ContentRejected, "field '" + f.id + "' is required");
        continue;
      }
      if (f.validation) {
        auto why = check_rule(*f.validation, value);
        if (!why.empty())
          return SubmissionOutcome::failed(FailureReason::ContentRejected,
                                           "field '" + f.id + "' value '" + value + "' " + why);
      }
    }
    return SubmissionOutcome::ok("submitted");
  }

  /// Current value: text for inputs, option value for selects, "true"/"" for checkables.
  std::string value_of(const std::string& field_id) const {
    for (const auto& f : model_.fields) {
      if (f.id != field_id) continue;
      auto idx = field_index(f);
      return idx ? current_value(*idx) : std::string();
    }
    throw std::out_of_range("no field '" + field_id + "'");
  }

 private:
  struct State {
    std::string value;
    bool checked = false;
  };

  const FormModel& model_;
  std::vector<const HtmlElement*> elements_;
  std::map<std::size_t, State> state_;

  std::size_t index_of(const ElementRef& ref) const {
    auto i = std::stoul(ref);
    if (i >= elements_.size()) throw std::out_of_range("bad element ref " + ref);
    return i;
  }

  std::optional<std::size_t> field_index(const FieldSpec& f) const {
    for (std::size_t i = 0; i < elements_.size(); ++i)
      if (matches(f.selector, *elements_[i])) return i;
    return std::nullopt;
  }

  void reset(std::size_t i) {
    const auto& el = *elements_[i];
    State st;
    if (el.tag == "select") {
      const HtmlElement* chosen = nullptr;
      for (const auto* o : preorder(el)) {
        if (o->tag != "option") continue;
        if (!chosen || o->has_attr("selected")) chosen = o;
        if (o->has_attr("selected")) break;
      }
      if (chosen) st.value = chosen->attr("value") ? *chosen->attr("value") : chosen->text;
    } else if (el.tag == "textarea") {
      st.value = el.text;
    } else if (el.tag == "input") {
      auto v = el.attr("value");
      if (v) st.value = *v;
      st.checked = el.has_attr("checked");
    }
    state_[i] = st;
  }

  std::string current_value(std::size_t i) const {
    const auto& el = *elements_[i];
    auto type = sim_detail::input_type(el);
    if (type == "checkbox" || type == "radio") return state_.at(i).checked ? "true" : "";
    return state_.at(i).value;
  }

  /// The checked element of a checkbox, or of the radio group `i` belongs to.
  std::optional<std::size_t> checked_in_group(std::size_t i) const {
    const auto& el = *elements_[i];
    auto name = el.attr("name");
    if (sim_detail::input_type(el) == "radio" && name) {
      for (std::size_t k = 0; k < elements_.size(); ++k) {
        auto other = elements_[k]->attr("name");
        if (other && *other == *name && sim_detail::input_type(*elements_[k]) == "radio" && state_.at(k).checked)
          return k;
      }
      return std::nullopt;
    }
    return state_.at(i).checked ? std::optional<std::size_t>(i) : std::nullopt;
  }
};

}  // namespace formforge
