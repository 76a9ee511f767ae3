#pragma once

// Three ways of turning a pruned form into prompt context: the raw markup,
// sentences from a deterministic field parser, and sentences from fields an
// LLM extracted from the markup.

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "formforge/common.hpp"
#include "formforge/gateway.hpp"
#include "formforge/pruner.hpp"

namespace formforge {

struct FieldDescriptor {
  std::string tag;
  std::vector<std::pair<std::string, std::string>> properties;

  bool operator==(const FieldDescriptor&) const = default;

  const std::string* property(std::string_view name) const {
    for (const auto& [k, v] : properties)
      if (k == name) return &v;
    return nullptr;
  }

  /// Appends after the last property of the same name so repeated names stay adjacent.
  void add(std::string name, std::string value) {
    auto pos = properties.end();
    for (auto it = properties.begin(); it != properties.end(); ++it)
      if (it->first == name) pos = it + 1;
    properties.insert(pos, {std::move(name), std::move(value)});
  }
};

enum class ContextOrigin { Raw, Parser, Llm };

inline std::string_view to_string(ContextOrigin o) {
  switch (o) {
    case ContextOrigin::Raw: return "raw";
    case ContextOrigin::Parser: return "parser";
    case ContextOrigin::Llm: return "llm";
  }
  return "?";
}

inline std::optional<ContextOrigin> context_origin(std::string_view s) {
  for (auto o : {ContextOrigin::Raw, ContextOrigin::Parser, ContextOrigin::Llm})
    if (iequals(to_string(o), s)) return o;
  return std::nullopt;
}

struct ContextString {
  std::string text;
  ContextOrigin origin = ContextOrigin::Raw;
  std::string llm_reply;  // raw parsing reply, llm origin only
};

struct ContextError {
  enum class Kind { MalformedJson, Transport };
  Kind kind;
  std::string detail;
  std::string llm_reply;
};

inline std::string_view to_string(ContextError::Kind k) {
  return k == ContextError::Kind::MalformedJson ? "MalformedJson" : "Transport";
}

inline ContextString build_raw_context(const PrunedForm& p) {
  return {serialize_pruned(p), ContextOrigin::Raw, {}};
}

namespace context_detail {

inline bool is_interactive(std::string_view tag) {
  return tag == "input" || tag == "textarea" || tag == "select" || tag == "button" || tag == "option";
}

inline bool is_boolean_attribute(std::string_view name) {
  return name == "disabled" || name == "readonly" || name == "checked" || name == "required" ||
         name == "selected";
}

inline void append_text(const HtmlElement& el, std::string& out) {
  if (el.tag == "script" || el.tag == "style") return;
  if (!el.text.empty()) {
    if (!out.empty()) out += ' ';
    out += el.text;
  }
  for (const auto& c : el.children) append_text(c, out);
}

inline std::string text_content(const HtmlElement& el) {
  std::string out;
  append_text(el, out);
  return collapse_whitespace(out);
}

inline bool has_interactive(const HtmlElement& el) {
  for (const auto* e : preorder(el))
    if (is_interactive(e->tag)) return true;
  return false;
}

struct Located {
  const HtmlElement* el;
  const HtmlElement* parent;
  std::size_t index;  // position within parent->children
  const HtmlElement* enclosing_label;
  const HtmlElement* enclosing_select;
};

inline void locate(const HtmlElement& el, const HtmlElement* parent, std::size_t index, const HtmlElement* label,
                   const HtmlElement* select, std::vector<Located>& out) {
  out.push_back({&el, parent, index, label, select});
  if (el.tag == "label") label = &el;
  if (el.tag == "select") select = &el;
  for (std::size_t i = 0; i < el.children.size(); ++i) locate(el.children[i], &el, i, label, select, out);
}

inline std::string label_for(const Located& at, const std::vector<Located>& all) {
  if (auto id = at.el->attr("id"); id && !id->empty()) {
    for (const auto& l : all) {
      if (l.el->tag != "label") continue;
      auto f = l.el->attr("for");
      if (f && *f == *id) return text_content(*l.el);
    }
  }
  if (at.enclosing_label) return at.enclosing_label->text;
  // Pruning drops "for"; fall back to an adjacent label: the one just before
  // the field, or just after it for checkboxes and radios.
  if (!at.parent) return {};
  if (at.index > 0) {
    const auto& prev = at.parent->children[at.index - 1];
    if (prev.tag == "label" && !has_interactive(prev)) return text_content(prev);
  }
  auto type = at.el->attr("type");
  if (type && (iequals(*type, "checkbox") || iequals(*type, "radio")) && at.index + 1 < at.parent->children.size()) {
    const auto& next = at.parent->children[at.index + 1];
    if (next.tag == "label" && !has_interactive(next)) return text_content(next);
  }
  return {};
}

inline std::string hint_for(const Located& at) {
  if (!at.parent || at.index + 1 >= at.parent->children.size()) return {};
  const auto& next = at.parent->children[at.index + 1];
  if (next.tag != "small" && next.tag != "span" && next.tag != "div" && next.tag != "p") return {};
  if (has_interactive(next)) return {};
  return text_content(next);
}

}  // namespace context_detail

/// One descriptor per interactive element in document order. Options inside a
/// select are folded into the select as "value" properties.
inline std::vector<FieldDescriptor> parse_fields(const PrunedForm& p) {
  using namespace context_detail;
  std::vector<Located> all;
  locate(p.form, nullptr, 0, nullptr, nullptr, all);

  std::vector<FieldDescriptor> out;
  for (const auto& at : all) {
    const auto& el = *at.el;
    if (!is_interactive(el.tag)) continue;
    if (el.tag == "option" && at.enclosing_select) continue;

    FieldDescriptor d{el.tag, {}};
    for (const auto& a : el.attributes) {
      auto value = a.value.empty() && is_boolean_attribute(a.name) ? std::string("true") : a.value;
      d.add(a.name, std::move(value));
    }
    if (el.tag == "select") {
      for (const auto* o : preorder(el)) {
        if (o->tag != "option") continue;
        auto v = o->attr("value");
        d.add("value", v ? *v : text_content(*o));
      }
    }
    if (el.tag == "textarea" && !el.text.empty() && !el.has_attr("value")) d.add("value", el.text);
    if (el.tag == "option" && !el.has_attr("value")) d.add("value", text_content(el));

    auto label = el.tag == "button" ? text_content(el) : label_for(at, all);
    if (!label.empty()) d.add("label text", std::move(label));
    if (auto hint = hint_for(at); !hint.empty()) d.add("hint text", std::move(hint));
    out.push_back(std::move(d));
  }
  return out;
}

inline ContextString fields_to_sentences(const std::vector<FieldDescriptor>& fields,
                                         ContextOrigin origin = ContextOrigin::Parser) {
  std::string text;
  auto sentence = [&](const std::string& s) {
    if (!text.empty()) text += ' ';
    text += s;
  };
  for (std::size_t k = 0; k < fields.size(); ++k) {
    sentence("Element " + std::to_string(k + 1) + " is a " + fields[k].tag + ".");
    for (const auto& [name, value] : fields[k].properties) sentence("The " + name + " is '" + value + "'.");
  }
  return {std::move(text), origin, {}};
}

/// JSON array of objects: {"tag": ..., "<property>": value}; a property that
/// occurs several times becomes an array of its values.
inline nlohmann::ordered_json fields_to_json(const std::vector<FieldDescriptor>& fields) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& f : fields) {
    nlohmann::ordered_json obj;
    obj["tag"] = f.tag;
    for (const auto& [name, value] : f.properties) {
      if (!obj.contains(name)) {
        obj[name] = value;
      } else {
        auto& slot = obj[name];
        if (!slot.is_array()) slot = nlohmann::ordered_json::array({slot});
        slot.push_back(value);
      }
    }
    arr.push_back(std::move(obj));
  }
  return arr;
}

/// Inverse of fields_to_json, lenient about scalar types. Objects and nulls
/// inside a field are dropped; a missing tag becomes "element".
inline std::vector<FieldDescriptor> fields_from_json(const nlohmann::ordered_json& arr) {
  std::vector<FieldDescriptor> out;
  auto scalar = [](const nlohmann::ordered_json& v) -> std::optional<std::string> {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean() || v.is_number()) return v.dump();
    return std::nullopt;
  };
  for (const auto& item : arr) {
    if (!item.is_object()) continue;
    FieldDescriptor d{"element", {}};
    for (const auto& [key, v] : item.items()) {
      if (key == "tag") {
        if (auto s = scalar(v); s && !s->empty()) d.tag = to_lower(*s);
        continue;
      }
      if (v.is_array()) {
        for (const auto& e : v)
          if (auto s = scalar(e)) d.properties.emplace_back(key, *s);
      } else if (auto s = scalar(v)) {
        d.properties.emplace_back(key, *s);
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

/// First balanced top-level [...] region, skipping brackets inside JSON strings.
inline std::optional<std::string_view> first_json_array(std::string_view text) {
  auto start = text.find('[');
  if (start == std::string_view::npos) return std::nullopt;
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\')
        ++i;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      ++depth;
    } else if (c == ']' || c == '}') {
      if (--depth == 0) return text.substr(start, i - start + 1);
      if (depth < 0) return std::nullopt;
    }
  }
  return std::nullopt;
}

inline constexpr std::string_view kFieldParseInstruction =
    "Parse the following HTML web form into a JSON array. Produce one JSON object for every "
    "interactive element (input, textarea, select, button, option) in document order. Each object "
    "has a \"tag\" key holding the element's tag name, one key per HTML attribute of the element "
    "holding the attribute value, a \"label text\" key holding the text of the element's label if "
    "it has one, and a \"hint text\" key holding any help text shown next to it. For a select, "
    "list the values of its options under a \"value\" key as an array. Reply with the JSON array "
    "only.";

inline std::string field_parse_prompt(const PrunedForm& p) {
  return std::string(kFieldParseInstruction) + "\n\n" + p.markup;
}

inline Expected<ContextString, ContextError> build_llm_context(const PrunedForm& p, LlmGateway& gateway,
                                                               const ModelId& model, Millis timeout = Millis(60'000),
                                                               int max_retries = 0) {
  auto reply = gateway.complete(LlmRequest{model, field_parse_prompt(p), timeout, max_retries});
  if (!reply) {
    const auto& e = reply.error();
    return ContextError{ContextError::Kind::Transport, std::string(to_string(e.kind)) + ": " + e.message, {}};
  }
  const auto& text = reply->text;
  auto region = first_json_array(text);
  if (!region) return ContextError{ContextError::Kind::MalformedJson, "no JSON array in parsing reply", text};
  auto json = nlohmann::ordered_json::parse(*region, nullptr, false);
  if (json.is_discarded() || !json.is_array())
    return ContextError{ContextError::Kind::MalformedJson, "parsing reply array is not valid JSON", text};
  auto ctx = fields_to_sentences(fields_from_json(json), ContextOrigin::Llm);
  ctx.llm_reply = text;
  return ctx;
}

}  // namespace formforge
