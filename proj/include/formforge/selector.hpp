#pragma once

// CSS-style locators produced by LLM replies: #id, .class, tag, tag[attr=value].

#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "formforge/html.hpp"

namespace formforge {

struct Selector {
  enum class Kind { Id, Class, Tag, AttrMatch };

  Kind kind = Kind::Tag;
  std::string name;  // id, class name or tag
  std::string attr;  // AttrMatch only
  std::string value;  // AttrMatch only

  static Selector id(std::string n) { return {Kind::Id, std::move(n), {}, {}}; }
  static Selector cls(std::string n) { return {Kind::Class, std::move(n), {}, {}}; }
  static Selector tag(std::string n) { return {Kind::Tag, std::move(n), {}, {}}; }
  static Selector attr_match(std::string t, std::string a, std::string v) {
    return {Kind::AttrMatch, std::move(t), std::move(a), std::move(v)};
  }

  bool operator==(const Selector&) const = default;
};

namespace selector_detail {

inline bool ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool ident_char(char c) {
  return ident_start(c) || (c >= '0' && c <= '9') || c == '-';
}

inline std::size_t read_ident(std::string_view s, std::size_t at) {
  if (at >= s.size() || !ident_start(s[at])) return 0;
  std::size_t end = at + 1;
  while (end < s.size() && ident_char(s[end])) ++end;
  return end - at;
}

inline bool is_simple_value(std::string_view v) {
  if (v.empty() || v.find(']') != std::string_view::npos) return false;
  if (v.front() == '"' || v.front() == '\'') return false;
  return !is_space(v.front()) && !is_space(v.back());
}

inline std::string quote_value(std::string_view v) {
  if (is_simple_value(v)) return std::string(v);
  char q = v.find('"') == std::string_view::npos ? '"' : '\'';
  return q + std::string(v) + q;
}

}  // namespace selector_detail

inline bool is_identifier(std::string_view s) {
  return !s.empty() && selector_detail::read_ident(s, 0) == s.size();
}

/// Greedily parses a selector at the start of `s`. Returns the selector and
/// the number of characters consumed, or nullopt when no selector starts there.
inline std::optional<std::pair<Selector, std::size_t>> parse_selector_prefix(std::string_view s) {
  using namespace selector_detail;
  if (s.empty()) return std::nullopt;
  if (s[0] == '#' || s[0] == '.') {
    auto n = read_ident(s, 1);
    if (n == 0) return std::nullopt;
    auto name = std::string(s.substr(1, n));
    return std::pair{s[0] == '#' ? Selector::id(name) : Selector::cls(name), n + 1};
  }
  auto tag_len = read_ident(s, 0);
  if (tag_len == 0) return std::nullopt;
  std::string tag(s.substr(0, tag_len));
  if (tag_len >= s.size() || s[tag_len] != '[') return std::pair{Selector::tag(tag), tag_len};

  // tag[attr=value]
  std::size_t i = tag_len + 1;
  while (i < s.size() && is_space(s[i])) ++i;
  auto attr_len = read_ident(s, i);
  if (attr_len == 0) return std::nullopt;
  std::string attr(s.substr(i, attr_len));
  i += attr_len;
  while (i < s.size() && is_space(s[i])) ++i;
  if (i >= s.size() || s[i] != '=') return std::nullopt;
  ++i;
  while (i < s.size() && is_space(s[i])) ++i;
  std::string value;
  if (i < s.size() && (s[i] == '"' || s[i] == '\'')) {
    char q = s[i++];
    auto end = s.find(q, i);
    if (end == std::string_view::npos) return std::nullopt;
    value.assign(s.substr(i, end - i));
    i = end + 1;
    while (i < s.size() && is_space(s[i])) ++i;
    if (i >= s.size() || s[i] != ']') return std::nullopt;
  } else {
    auto end = s.find(']', i);
    if (end == std::string_view::npos) return std::nullopt;
    value.assign(trim(s.substr(i, end - i)));
    i = end;
  }
  return std::pair{Selector::attr_match(std::move(tag), std::move(attr), std::move(value)), i + 1};
}

/// Parses a complete selector; trailing characters are rejected.
inline std::optional<Selector> parse_selector(std::string_view s) {
  auto r = parse_selector_prefix(s);
  if (!r || r->second != s.size()) return std::nullopt;
  return r->first;
}

/// Surface syntax; parse_selector(to_string(s)) == s.
inline std::string to_string(const Selector& s) {
  switch (s.kind) {
    case Selector::Kind::Id: return "#" + s.name;
    case Selector::Kind::Class: return "." + s.name;
    case Selector::Kind::Tag: return s.name;
    case Selector::Kind::AttrMatch:
      return s.name + "[" + s.attr + "=" + selector_detail::quote_value(s.value) + "]";
  }
  return {};
}

/// CSS selector text for WebDriver "css selector" lookups.
inline std::string to_css(const Selector& s) {
  if (s.kind != Selector::Kind::AttrMatch) return to_string(s);
  std::string escaped;
  for (char c : s.value) {
    if (c == '"' || c == '\\') escaped += '\\';
    escaped += c;
  }
  return s.name + "[" + s.attr + "=\"" + escaped + "\"]";
}

inline bool matches(const Selector& sel, const HtmlElement& el) {
  switch (sel.kind) {
    case Selector::Kind::Id: {
      auto v = el.attr("id");
      return v && *v == sel.name;
    }
    case Selector::Kind::Class: {
      auto v = el.attr("class");
      if (!v) return false;
      for (const auto& part : split(collapse_whitespace(*v), ' '))
        if (part == sel.name) return true;
      return false;
    }
    case Selector::Kind::Tag: return iequals(el.tag, sel.name);
    case Selector::Kind::AttrMatch: {
      if (!iequals(el.tag, sel.name)) return false;
      auto v = el.attr(sel.attr);
      return v && *v == sel.value;
    }
  }
  return false;
}

}  // namespace formforge
