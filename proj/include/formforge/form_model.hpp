#pragma once

// Declarative form models used by the simulator:
//   {id, title, app?, category, url?, markup,
//    fields: [{selector_hint, required, validation?: {kind, ...}}], submit}

#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <memory>
#include <regex>
#include <sstream>
#include <string>

#include "json.hpp"

#include "formforge/html.hpp"
#include "formforge/prompt.hpp"
#include "formforge/selector.hpp"

namespace formforge {

class ModelError : public Error {
 public:
  enum class Kind { Schema, Io };
  ModelError(Kind kind, std::string path, std::string msg, std::string file = {})
      : Error(compose(file, path, msg)), kind_(kind), path_(std::move(path)), msg_(std::move(msg)),
        file_(std::move(file)) {}
  Kind kind() const { return kind_; }
  /// JSON path of the offending field, e.g. "fields[1].validation.kind".
  const std::string& field_path() const { return path_; }
  const std::string& message() const { return msg_; }
  const std::string& file() const { return file_; }

 private:
  Kind kind_;
  std::string path_, msg_, file_;

  static std::string compose(const std::string& file, const std::string& path, const std::string& msg) {
    std::string out;
    if (!file.empty()) out += file + ": ";
    if (!path.empty()) out += path + ": ";
    return out + msg;
  }
};

struct ValidationRule {
  enum class Kind { Nonempty, Pattern, Numeric, Datetime, OneOf };
  Kind kind = Kind::Nonempty;
  std::string pattern;
  std::shared_ptr<const std::regex> regex;
  std::optional<double> min, max;
  std::string format;  // strftime-style, Datetime only
  std::vector<std::string> options;
};

inline std::string_view to_string(ValidationRule::Kind k) {
  switch (k) {
    case ValidationRule::Kind::Nonempty: return "nonempty";
    case ValidationRule::Kind::Pattern: return "pattern";
    case ValidationRule::Kind::Numeric: return "numeric";
    case ValidationRule::Kind::Datetime: return "datetime";
    case ValidationRule::Kind::OneOf: return "one_of";
  }
  return "?";
}

namespace form_detail {

inline bool parse_number(std::string_view s, double& out) {
  if (s.empty()) return false;
  std::string tmp(s);
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size() && std::isfinite(out);
}

/// Parses `value` with `format` and rejects impossible dates (Feb 30 and the like).
inline bool matches_datetime(const std::string& value, const std::string& format) {
  std::tm tm{};
  std::istringstream in(value);
  in >> std::get_time(&tm, format.c_str());
  if (in.fail()) return false;
  if (in.peek() != std::char_traits<char>::eof()) return false;
  std::tm copy = tm;
  auto t = timegm(&copy);
  if (t == -1) return false;
  std::tm back{};
  gmtime_r(&t, &back);
  return back.tm_year == tm.tm_year && back.tm_mon == tm.tm_mon && back.tm_mday == tm.tm_mday &&
         back.tm_hour == tm.tm_hour && back.tm_min == tm.tm_min;
}

}  // namespace form_detail

/// Empty string when the value satisfies the rule, otherwise a description of the violation.
inline std::string check_rule(const ValidationRule& rule, const std::string& value) {
  using K = ValidationRule::Kind;
  switch (rule.kind) {
    case K::Nonempty:
      return trim(value).empty() ? "must not be empty" : "";
    case K::Pattern:
      return std::regex_match(value, *rule.regex) ? "" : "does not match pattern " + rule.pattern;
    case K::Numeric: {
      double x;
      if (!form_detail::parse_number(value, x)) return "is not a number";
      if (rule.min && x < *rule.min) return "is below the minimum";
      if (rule.max && x > *rule.max) return "is above the maximum";
      return "";
    }
    case K::Datetime:
      return form_detail::matches_datetime(value, rule.format) ? "" : "is not a datetime in format " + rule.format;
    case K::OneOf:
      return std::find(rule.options.begin(), rule.options.end(), value) != rule.options.end()
                 ? ""
                 : "is not one of the allowed options";
  }
  return "";
}

struct FieldSpec {
  std::string id;
  Selector selector;
  HtmlElement element;  // copy of the resolved element
  bool required = false;
  std::optional<ValidationRule> validation;
};

struct FormModel {
  std::string id;
  std::string title;
  std::string app;
  FormCategory category = FormCategory::Unknown;
  std::string url;  // live mode page URL
  std::string markup;
  HtmlElement form;  // first <form> in markup
  std::vector<FieldSpec> fields;
  Selector submit_selector;
  std::string source_path;
};

/// First element of the subtree, in pre-order, that the selector matches.
inline const HtmlElement* resolve(const Selector& sel, const HtmlElement& root) {
  for (const auto* e : preorder(root))
    if (matches(sel, *e)) return e;
  return nullptr;
}

namespace form_detail {

inline ValidationRule parse_rule(const nlohmann::json& j, const std::string& path, const HtmlElement& el) {
  using K = ValidationRule::Kind;
  auto fail = [&](const std::string& sub, const std::string& msg) -> ModelError {
    return ModelError(ModelError::Kind::Schema, path + sub, msg);
  };
  if (!j.is_object()) throw fail("", "validation must be an object");
  if (!j.contains("kind") || !j["kind"].is_string()) throw fail(".kind", "missing string \"kind\"");
  auto kind = j["kind"].get<std::string>();
  ValidationRule r;
  if (kind == "nonempty") {
    r.kind = K::Nonempty;
  } else if (kind == "pattern") {
    r.kind = K::Pattern;
    if (!j.contains("regex") || !j["regex"].is_string()) throw fail(".regex", "missing string \"regex\"");
    r.pattern = j["regex"].get<std::string>();
    try {
      r.regex = std::make_shared<const std::regex>(r.pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw fail(".regex", std::string("does not compile: ") + e.what());
    }
  } else if (kind == "numeric") {
    r.kind = K::Numeric;
    for (const char* bound : {"min", "max"}) {
      if (!j.contains(bound)) continue;
      if (!j[bound].is_number()) throw fail(std::string(".") + bound, "must be a number");
      (std::string(bound) == "min" ? r.min : r.max) = j[bound].get<double>();
    }
  } else if (kind == "datetime") {
    r.kind = K::Datetime;
    if (!j.contains("format") || !j["format"].is_string()) throw fail(".format", "missing string \"format\"");
    r.format = j["format"].get<std::string>();
  } else if (kind == "one_of") {
    r.kind = K::OneOf;
    auto type = el.attr("type");
    if (el.tag != "select" && !(el.tag == "input" && type && iequals(*type, "radio")))
      throw fail(".kind", "one_of applies only to select and radio fields");
    if (!j.contains("options") || !j["options"].is_array()) throw fail(".options", "missing array \"options\"");
    for (const auto& o : j["options"]) {
      if (!o.is_string()) throw fail(".options", "options must be strings");
      r.options.push_back(o.get<std::string>());
    }
  } else {
    throw fail(".kind", "unknown validation kind '" + kind + "'");
  }
  return r;
}

inline std::string required_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ModelError(ModelError::Kind::Schema, key, "missing required key");
  if (!j[key].is_string()) throw ModelError(ModelError::Kind::Schema, key, "must be a string");
  return j[key].get<std::string>();
}

inline FormModel model_from_json(const nlohmann::json& j, std::string source_path) {
  if (!j.is_object()) throw ModelError(ModelError::Kind::Schema, "", "form model must be a JSON object");
  FormModel m;
  m.source_path = std::move(source_path);
  m.id = required_string(j, "id");
  m.title = required_string(j, "title");
  m.app = j.value("app", "");
  m.url = j.value("url", "");
  auto cat = required_string(j, "category");
  auto category = form_category(cat);
  if (!category) throw ModelError(ModelError::Kind::Schema, "category", "unknown category '" + cat + "'");
  m.category = *category;
  m.markup = required_string(j, "markup");

  HtmlDocument doc;
  try {
    doc = parse_html(m.markup);
  } catch (const ParseFailure& e) {
    throw ModelError(ModelError::Kind::Schema, "markup", e.what());
  }
  auto forms = find_forms(doc);
  if (forms.empty()) throw ModelError(ModelError::Kind::Schema, "markup", "contains no <form>");
  m.form = std::move(forms.front());

  if (!j.contains("fields")) throw ModelError(ModelError::Kind::Schema, "fields", "missing required key");
  if (!j["fields"].is_array()) throw ModelError(ModelError::Kind::Schema, "fields", "must be an array");
  for (std::size_t i = 0; i < j["fields"].size(); ++i) {
    const auto& f = j["fields"][i];
    auto path = "fields[" + std::to_string(i) + "]";
    if (!f.is_object()) throw ModelError(ModelError::Kind::Schema, path, "must be an object");
    if (!f.contains("selector_hint") || !f["selector_hint"].is_string())
      throw ModelError(ModelError::Kind::Schema, path + ".selector_hint", "missing string");
    auto hint = f["selector_hint"].get<std::string>();
    auto sel = parse_selector(hint);
    if (!sel) throw ModelError(ModelError::Kind::Schema, path + ".selector_hint", "bad selector '" + hint + "'");
    const auto* el = resolve(*sel, m.form);
    if (!el) throw ModelError(ModelError::Kind::Schema, path + ".selector_hint", "'" + hint + "' matches nothing");

    FieldSpec spec;
    spec.selector = *sel;
    spec.element = *el;
    spec.element.children.clear();
    if (auto id = el->attr("id"); id && !id->empty())
      spec.id = *id;
    else if (auto name = el->attr("name"); name && !name->empty())
      spec.id = *name;
    else
      spec.id = hint;
    if (f.contains("required")) {
      if (!f["required"].is_boolean()) throw ModelError(ModelError::Kind::Schema, path + ".required", "must be a boolean");
      spec.required = f["required"].get<bool>();
    }
    if (f.contains("validation") && !f["validation"].is_null())
      spec.validation = form_detail::parse_rule(f["validation"], path + ".validation", *el);
    for (const auto& other : m.fields)
      if (other.id == spec.id) throw ModelError(ModelError::Kind::Schema, path, "duplicate field id '" + spec.id + "'");
    m.fields.push_back(std::move(spec));
  }

  auto submit = required_string(j, "submit");
  auto ssel = parse_selector(submit);
  if (!ssel) throw ModelError(ModelError::Kind::Schema, "submit", "bad selector '" + submit + "'");
  if (!resolve(*ssel, m.form)) throw ModelError(ModelError::Kind::Schema, "submit", "'" + submit + "' matches nothing");
  m.submit_selector = *ssel;
  return m;
}

}  // namespace form_detail

/// Builds a model from parsed JSON. Errors carry `source_path` when given.
inline FormModel form_model_from_json(const nlohmann::json& j, std::string source_path = {}) {
  try {
    return form_detail::model_from_json(j, source_path);
  } catch (const ModelError& e) {
    if (source_path.empty() || !e.file().empty()) throw;
    throw ModelError(e.kind(), e.field_path(), e.message(), source_path);
  }
}

inline FormModel load_form_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError(ModelError::Kind::Io, "", "cannot open file", path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ModelError(ModelError::Kind::Schema, "", "not valid JSON", path);
  return form_model_from_json(j, path);
}

}  // namespace formforge
