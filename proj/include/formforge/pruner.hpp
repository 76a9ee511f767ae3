#pragma once

#include <initializer_list>
#include <string>
#include <vector>

#include "formforge/html.hpp"

namespace formforge {

/// Attribute names kept by pruning. Matching is case-insensitive.
class AttributeWhitelist {
 public:
  AttributeWhitelist(std::initializer_list<std::string_view> names) {
    for (auto n : names) add(n);
    if (names_.empty()) throw std::invalid_argument("attribute whitelist must not be empty");
  }
  explicit AttributeWhitelist(const std::vector<std::string>& names) {
    for (const auto& n : names) add(n);
    if (names_.empty()) throw std::invalid_argument("attribute whitelist must not be empty");
  }

  static AttributeWhitelist defaults() {
    return {"id",       "name",  "type",    "placeholder", "src",     "disabled",
            "readonly", "value", "checked", "required",    "selected"};
  }

  /// Comma-separated list, e.g. "id,name,type".
  static AttributeWhitelist parse(std::string_view csv) {
    std::vector<std::string> names;
    for (auto& part : split(csv, ',')) {
      auto t = trim(part);
      if (!t.empty()) names.emplace_back(t);
    }
    return AttributeWhitelist(names);
  }

  bool allows(std::string_view attribute) const {
    for (const auto& n : names_)
      if (iequals(n, attribute)) return true;
    return false;
  }

  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;

  void add(std::string_view name) {
    auto lower = to_lower(trim(name));
    if (lower.empty() || allows(lower)) return;
    names_.push_back(std::move(lower));
  }
};

struct PrunedForm {
  HtmlElement form;
  std::string markup;

  /// Pruned elements in pre-order, the form element first.
  std::vector<const HtmlElement*> elements() const { return preorder(form); }
};

namespace pruner_detail {
inline void prune_in_place(HtmlElement& el, const AttributeWhitelist& whitelist) {
  std::erase_if(el.attributes, [&](const Attribute& a) { return !whitelist.allows(a.name); });
  for (auto& c : el.children) prune_in_place(c, whitelist);
}
}  // namespace pruner_detail

/// Removes every attribute outside the whitelist from the form and all of its
/// descendants. Elements, nesting and text are left alone.
inline PrunedForm prune_form(const HtmlElement& form,
                             const AttributeWhitelist& whitelist = AttributeWhitelist::defaults()) {
  if (form.tag != "form") throw std::invalid_argument("prune_form expects a <form> element, got <" + form.tag + ">");
  PrunedForm out{form, {}};
  pruner_detail::prune_in_place(out.form, whitelist);
  out.markup = serialize(out.form);
  return out;
}

inline std::string serialize_pruned(const PrunedForm& p) { return serialize(p.form); }

}  // namespace formforge
