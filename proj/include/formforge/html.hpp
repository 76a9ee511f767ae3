#pragma once

// Lenient HTML reader producing a small element tree. Handles the subset of
// HTML5 tree construction that matters for form pages: void elements,
// implied end tags, raw-text elements and stray end tags.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "formforge/common.hpp"

namespace formforge {

struct Attribute {
  std::string name;
  std::string value;

  bool operator==(const Attribute&) const = default;
};

struct HtmlElement {
  std::string tag;
  std::vector<Attribute> attributes;
  std::vector<HtmlElement> children;
  // Concatenated direct text, whitespace-collapsed (verbatim for raw-text elements).
  std::string text;

  bool operator==(const HtmlElement&) const = default;

  const std::string* attr(std::string_view name) const {
    for (const auto& a : attributes)
      if (iequals(a.name, name)) return &a.value;
    return nullptr;
  }
  bool has_attr(std::string_view name) const { return attr(name) != nullptr; }

  /// Replaces an existing value or appends a new attribute.
  void set_attr(std::string_view name, std::string value) {
    for (auto& a : attributes) {
      if (iequals(a.name, name)) {
        a.value = std::move(value);
        return;
      }
    }
    attributes.push_back({to_lower(name), std::move(value)});
  }
};

struct HtmlDocument {
  HtmlElement root;
  std::optional<std::string> source_uri;

  bool operator==(const HtmlDocument&) const = default;
};

class ParseFailure : public Error {
 public:
  using Error::Error;
};

namespace html_detail {

inline constexpr std::array<std::string_view, 14> kVoidElements = {
    "area", "base", "br", "col", "embed", "hr", "img",
    "input", "link", "meta", "param", "source", "track", "wbr"};

inline constexpr std::array<std::string_view, 3> kRawTextElements = {"script", "style", "textarea"};

// Start tags that close an open <p>.
inline constexpr std::array<std::string_view, 27> kClosesParagraph = {
    "address", "article", "aside", "blockquote", "div", "dl", "fieldset",
    "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr",
    "main", "nav", "ol", "p", "pre", "section", "table", "ul", "menu", "details"};

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& set, std::string_view v) {
  return std::find(set.begin(), set.end(), v) != set.end();
}

inline bool is_ascii_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

class TreeBuilder {
 public:
  explicit TreeBuilder(std::string_view input) : in_(input) {
    root_.tag = "fragment";
    stack_.push_back(&root_);
  }

  HtmlElement build() {
    while (pos_ < in_.size()) step();
    finish(root_);
    // A document with a single <html> element and nothing else is rooted there.
    if (root_.children.size() == 1 && root_.children.front().tag == "html" && root_.text.empty())
      return std::move(root_.children.front());
    return std::move(root_);
  }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
  HtmlElement root_;
  std::vector<HtmlElement*> stack_;

  HtmlElement& top() { return *stack_.back(); }

  bool starts_with_ci(std::size_t at, std::string_view s) const {
    return at + s.size() <= in_.size() && iequals(in_.substr(at, s.size()), s);
  }

  void step() {
    if (in_[pos_] != '<') return read_text();
    if (starts_with_ci(pos_, "<!--")) {
      auto end = in_.find("-->", pos_ + 4);
      pos_ = end == std::string_view::npos ? in_.size() : end + 3;
      return;
    }
    const char next = pos_ + 1 < in_.size() ? in_[pos_ + 1] : '\0';
    if (next == '!' || next == '?') {
      auto end = in_.find('>', pos_);
      pos_ = end == std::string_view::npos ? in_.size() : end + 1;
      return;
    }
    if (next == '/' && pos_ + 2 < in_.size() && is_ascii_alpha(in_[pos_ + 2])) return read_end_tag();
    if (is_ascii_alpha(next)) return read_start_tag();
    // A lone '<' is literal text.
    top().text.push_back('<');
    ++pos_;
  }

  void read_text() {
    auto end = pos_;
    while (end < in_.size() && in_[end] != '<') ++end;
    top().text.append(in_.substr(pos_, end - pos_));
    pos_ = end;
  }

  std::string read_tag_name() {
    std::string name;
    while (pos_ < in_.size() && !is_space(in_[pos_]) && in_[pos_] != '/' && in_[pos_] != '>')
      name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(in_[pos_++]))));
    return name;
  }

  void skip_spaces() {
    while (pos_ < in_.size() && is_space(in_[pos_])) ++pos_;
  }

  void read_end_tag() {
    pos_ += 2;
    auto name = read_tag_name();
    auto end = in_.find('>', pos_);
    pos_ = end == std::string_view::npos ? in_.size() : end + 1;
    close_element(name);
  }

  void read_start_tag() {
    ++pos_;
    HtmlElement el;
    el.tag = read_tag_name();
    bool self_closing = false;
    while (true) {
      skip_spaces();
      if (pos_ >= in_.size()) break;
      char c = in_[pos_];
      if (c == '>') {
        ++pos_;
        break;
      }
      if (c == '/') {
        ++pos_;
        if (pos_ < in_.size() && in_[pos_] == '>') {
          self_closing = true;
          ++pos_;
          break;
        }
        continue;
      }
      read_attribute(el);
    }
    open_element(std::move(el), self_closing);
  }

  void read_attribute(HtmlElement& el) {
    std::string name;
    // '=' as the first character belongs to the name.
    if (in_[pos_] == '=') name.push_back(in_[pos_++]);
    while (pos_ < in_.size() && !is_space(in_[pos_]) && in_[pos_] != '=' && in_[pos_] != '>' &&
           in_[pos_] != '/')
      name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(in_[pos_++]))));
    std::string value;
    auto save = pos_;
    skip_spaces();
    if (pos_ < in_.size() && in_[pos_] == '=') {
      ++pos_;
      skip_spaces();
      if (pos_ < in_.size() && (in_[pos_] == '"' || in_[pos_] == '\'')) {
        char q = in_[pos_++];
        auto end = in_.find(q, pos_);
        if (end == std::string_view::npos) end = in_.size();
        value.assign(in_.substr(pos_, end - pos_));
        pos_ = std::min(end + 1, in_.size());
      } else {
        while (pos_ < in_.size() && !is_space(in_[pos_]) && in_[pos_] != '>')
          value.push_back(in_[pos_++]);
      }
    } else {
      pos_ = save;
    }
    if (name.empty()) return;
    if (!el.has_attr(name)) el.attributes.push_back({std::move(name), std::move(value)});
  }

  bool is_open(std::string_view tag) const {
    for (auto it = stack_.rbegin(); it != stack_.rend(); ++it)
      if ((*it)->tag == tag) return true;
    return false;
  }

  void pop_until(std::string_view tag) {
    while (stack_.size() > 1) {
      bool hit = top().tag == tag;
      finish(top());
      stack_.pop_back();
      if (hit) return;
    }
  }

  void apply_implied_end_tags(std::string_view tag) {
    auto top_is = [&](std::string_view t) { return stack_.size() > 1 && top().tag == t; };
    if (contains(kClosesParagraph, tag) && is_open("p")) pop_until("p");
    if (tag == "li" && top_is("li")) pop_until("li");
    if ((tag == "dt" || tag == "dd") && (top_is("dt") || top_is("dd"))) pop_until(top().tag);
    if (tag == "option" && top_is("option")) pop_until("option");
    if (tag == "optgroup") {
      if (top_is("option")) pop_until("option");
      if (top_is("optgroup")) pop_until("optgroup");
    }
    if (tag == "td" || tag == "th") {
      if (top_is("td") || top_is("th")) pop_until(top().tag);
    }
    if (tag == "tr") {
      if (top_is("td") || top_is("th")) pop_until(top().tag);
      if (top_is("tr")) pop_until("tr");
    }
  }

  void open_element(HtmlElement el, bool self_closing) {
    if (el.tag == "html" && is_open("html")) return;
    // Nested forms and selects are ignored, as browsers do.
    if ((el.tag == "form" || el.tag == "select") && is_open(el.tag)) return;
    apply_implied_end_tags(el.tag);

    const std::string tag = el.tag;
    top().children.push_back(std::move(el));
    HtmlElement* added = &top().children.back();
    if (self_closing || contains(kVoidElements, tag)) return;

    if (contains(kRawTextElements, tag)) {
      // Raw text: everything up to the matching end tag is verbatim content.
      std::size_t end = pos_;
      while (true) {
        end = in_.find("</", end);
        if (end == std::string_view::npos || starts_with_ci(end + 2, tag)) break;
        end += 2;
      }
      if (end == std::string_view::npos) end = in_.size();
      added->text.assign(in_.substr(pos_, end - pos_));
      pos_ = end;
      if (pos_ < in_.size()) {
        auto close = in_.find('>', pos_);
        pos_ = close == std::string_view::npos ? in_.size() : close + 1;
      }
      return;
    }
    stack_.push_back(added);
  }

  void close_element(std::string_view tag) {
    if (!is_open(tag)) return;  // stray end tag
    pop_until(tag);
  }

  static void finish(HtmlElement& el) {
    if (!contains(kRawTextElements, el.tag)) el.text = collapse_whitespace(el.text);
  }
};

inline void serialize_into(const HtmlElement& el, std::string& out) {
  out += '<';
  out += el.tag;
  for (const auto& a : el.attributes) {
    out += ' ';
    out += a.name;
    out += "=\"";
    for (char c : a.value) {
      if (c == '"')
        out += "&quot;";
      else
        out += c;
    }
    out += '"';
  }
  if (contains(kVoidElements, el.tag) && el.children.empty() && el.text.empty()) {
    out += "/>";
    return;
  }
  out += '>';
  out += el.text;
  for (const auto& c : el.children) serialize_into(c, out);
  out += "</";
  out += el.tag;
  out += '>';
}

template <class Fn>
void walk_preorder(const HtmlElement& el, Fn&& fn) {
  fn(el);
  for (const auto& c : el.children) walk_preorder(c, fn);
}

}  // namespace html_detail

inline bool is_void_element(std::string_view tag) {
  return html_detail::contains(html_detail::kVoidElements, tag);
}

/// Parses HTML leniently. Throws ParseFailure on empty input or invalid UTF-8.
inline HtmlDocument parse_html(std::string_view text, std::optional<std::string> source_uri = {}) {
  if (text.empty()) throw ParseFailure("empty HTML input");
  if (!is_valid_text(text)) throw ParseFailure("input is not valid UTF-8 text");
  html_detail::TreeBuilder builder(text);
  return HtmlDocument{builder.build(), std::move(source_uri)};
}

/// Deterministic serialization: lowercase tags, attributes in source order,
/// double-quoted values, self-closing void elements, no inter-tag whitespace.
inline std::string serialize(const HtmlElement& el) {
  std::string out;
  html_detail::serialize_into(el, out);
  return out;
}

inline std::string serialize(const HtmlDocument& doc) { return serialize(doc.root); }

/// Pre-order list of every element in the subtree, root included.
inline std::vector<const HtmlElement*> preorder(const HtmlElement& root) {
  std::vector<const HtmlElement*> out;
  html_detail::walk_preorder(root, [&](const HtmlElement& e) { out.push_back(&e); });
  return out;
}

namespace html_detail {
inline void collect_forms(const HtmlElement& el, std::vector<HtmlElement>& out) {
  if (el.tag == "script" || el.tag == "style") return;
  if (el.tag == "form") out.push_back(el);
  for (const auto& c : el.children) collect_forms(c, out);
}
}  // namespace html_detail

/// All <form> elements in depth-first pre-order.
inline std::vector<HtmlElement> find_forms(const HtmlDocument& doc) {
  std::vector<HtmlElement> out;
  html_detail::collect_forms(doc.root, out);
  return out;
}

}  // namespace formforge
