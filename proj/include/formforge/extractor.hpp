#pragma once

// Turns an LLM reply into selector/value assignments. The reply must carry a
// """[...]""" block holding an array of "selector=value" strings.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "formforge/common.hpp"
#include "formforge/selector.hpp"

namespace formforge {

struct ExtractError {
  enum class Kind { NoBlock, BadArray, BadPair };
  Kind kind;
  std::string detail;
};

inline std::string_view to_string(ExtractError::Kind k) {
  switch (k) {
    case ExtractError::Kind::NoBlock: return "NoBlock";
    case ExtractError::Kind::BadArray: return "BadArray";
    case ExtractError::Kind::BadPair: return "BadPair";
  }
  return "?";
}

struct Assignment {
  Selector selector;
  std::string value;

  bool operator==(const Assignment&) const = default;
};

struct TestAssignment {
  std::vector<Assignment> pairs;
  // Array entries without a parseable selector prefix (PairPolicy::Keep only).
  std::vector<std::string> malformed;
  std::string raw_reply;

  bool operator==(const TestAssignment&) const = default;
};

/// What to do with an array entry that is not "selector=value".
enum class PairPolicy {
  Reject,  // fail the whole extraction with BadPair
  Keep,    // keep it in TestAssignment::malformed; the form decides the outcome
};

inline Expected<Assignment, ExtractError> split_pair(std::string_view entry) {
  auto e = trim(entry);
  auto sel = parse_selector_prefix(e);
  if (!sel)
    return ExtractError{ExtractError::Kind::BadPair, "no selector at start of entry: " + std::string(e)};
  auto [selector, used] = *sel;
  if (used >= e.size() || e[used] != '=')
    return ExtractError{ExtractError::Kind::BadPair, "missing '=' after selector: " + std::string(e)};
  return Assignment{std::move(selector), std::string(e.substr(used + 1))};
}

namespace extractor_detail {

/// Maps typographic quotes to their ASCII counterparts.
inline std::string normalize_quotes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
        static_cast<unsigned char>(s[i + 1]) == 0x80) {
      auto c = static_cast<unsigned char>(s[i + 2]);
      if (c == 0x9C || c == 0x9D || c == 0x9E || c == 0x9F) {  // “ ” „ ‟
        out += '"';
        i += 2;
        continue;
      }
      if (c == 0x98 || c == 0x99 || c == 0x9A || c == 0x9B) {  // ‘ ’ ‚ ‛
        out += '\'';
        i += 2;
        continue;
      }
    }
    out += s[i];
  }
  return out;
}

inline void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

/// Array of quoted strings; accepts JSON double-quoted and single-quoted
/// strings with backslash escapes, and a trailing comma.
class StringArrayParser {
 public:
  explicit StringArrayParser(std::string_view s) : s_(s) {}

  std::optional<std::vector<std::string>> parse() {
    std::vector<std::string> out;
    ws();
    if (!eat('[')) return std::nullopt;
    ws();
    if (eat(']')) return finish(std::move(out));
    while (true) {
      auto str = string();
      if (!str) return std::nullopt;
      out.push_back(std::move(*str));
      ws();
      if (eat(']')) return finish(std::move(out));
      if (!eat(',')) return std::nullopt;
      ws();
      if (eat(']')) return finish(std::move(out));
    }
  }

 private:
  std::string_view s_;
  std::size_t i_ = 0;

  void ws() {
    while (i_ < s_.size() && is_space(s_[i_])) ++i_;
  }
  bool eat(char c) {
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }
  std::optional<std::vector<std::string>> finish(std::vector<std::string> v) {
    ws();
    if (i_ != s_.size()) return std::nullopt;
    return v;
  }
  static int hex(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  }
  std::optional<std::string> string() {
    if (i_ >= s_.size() || (s_[i_] != '"' && s_[i_] != '\'')) return std::nullopt;
    const char q = s_[i_++];
    std::string out;
    while (i_ < s_.size()) {
      char c = s_[i_++];
      if (c == q) return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (i_ >= s_.size()) return std::nullopt;
      char e = s_[i_++];
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case 'u': {
          if (i_ + 4 > s_.size()) return std::nullopt;
          std::uint32_t cp = 0;
          for (int k = 0; k < 4; ++k) {
            int h = hex(s_[i_++]);
            if (h < 0) return std::nullopt;
            cp = cp * 16 + static_cast<std::uint32_t>(h);
          }
          append_utf8(out, cp);
          break;
        }
        default: out += e;  // \" \' \\ \/ and anything else verbatim
      }
    }
    return std::nullopt;
  }
};

}  // namespace extractor_detail

/// Locates the first well-formed """[...]""" block and splits its entries.
inline Expected<TestAssignment, ExtractError> extract_assignments(std::string_view reply_text,
                                                                  PairPolicy policy = PairPolicy::Reject) {
  const std::string text = extractor_detail::normalize_quotes(reply_text);
  constexpr std::string_view delim = R"(""")";

  bool saw_region = false;
  std::string first_bad;
  std::size_t pos = 0;
  while (true) {
    auto open = text.find(delim, pos);
    if (open == std::string::npos) break;
    auto close = text.find(delim, open + delim.size());
    if (close == std::string::npos) break;
    saw_region = true;
    auto body = std::string_view(text).substr(open + delim.size(), close - open - delim.size());
    auto entries = extractor_detail::StringArrayParser(body).parse();
    if (!entries) {
      if (first_bad.empty()) first_bad = std::string(trim(body)).substr(0, 120);
      pos = close + delim.size();
      continue;
    }
    TestAssignment out;
    out.raw_reply = std::string(reply_text);
    for (const auto& entry : *entries) {
      auto pair = split_pair(entry);
      if (pair) {
        out.pairs.push_back(std::move(pair.value()));
      } else if (policy == PairPolicy::Reject) {
        return pair.error();
      } else {
        out.malformed.push_back(entry);
      }
    }
    return out;
  }
  if (!saw_region) return ExtractError{ExtractError::Kind::NoBlock, "no triple-quoted block in reply"};
  return ExtractError{ExtractError::Kind::BadArray, "triple-quoted block is not an array of strings: " + first_bad};
}

}  // namespace formforge
