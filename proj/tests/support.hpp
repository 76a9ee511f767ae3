#pragma once

// Shared fixtures and reference implementations for the test binaries.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "formforge/formforge.hpp"

#ifndef FORMFORGE_DATA_DIR
#define FORMFORGE_DATA_DIR "data"
#endif

namespace fftest {

using namespace formforge;

inline std::string data_path(const std::string& rel) { return std::string(FORMFORGE_DATA_DIR) + "/" + rel; }

inline constexpr const char* kSignInPage = R"(<!DOCTYPE HTML>
<html>
  <head>
    <title>Sign In.</title>
  </head>
  <body>
    <h1 class="ng-personal-signin-title">Sign In.</h1>
    <div class="ng-logo">
        <img src="logo.png" alt="error"/>
    </div>
    <div class="ng-personal-signin">
        <form action="/signIn" novalidate="" class="gdpr-hidden-personal-signin">
            <label for="username" class="overlabel">Email Address:</label>
            <input id="username" name="username" type="text" class="ng-untouched"/>
            <label for="password" class="overlabel">Password:</label>
            <input id="password" name="password" type="text" class="ng-untouched"/>
            <button type="submit" class="btn-primary">Sign In</button>
        </form>
    </div>
  </body>
</html>
)";

inline constexpr const char* kBeforePruning = R"(<form>
  <input id="username" name="user_name" type="text" data-id="1234" class="text form-control"/>
  <input id="password" name="user_pass" type="password" user-role="admin" class="text form-control"/>
</form>)";

inline constexpr const char* kAfterPruning = R"(<form>
  <input id="username" name="user_name" type="text"/>
  <input id="password" name="user_pass" type="password"/>
</form>)";

/// Drops whitespace between tags and collapses the rest.
inline std::string normalize_markup(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (is_space(s[i])) {
      std::size_t j = i;
      while (j < s.size() && is_space(s[j])) ++j;
      bool between_tags = (out.empty() || out.back() == '>') && (j == s.size() || s[j] == '<');
      if (!between_tags) out += ' ';
      i = j - 1;
      continue;
    }
    out += s[i];
  }
  return out;
}

inline HtmlElement first_form(std::string_view html) { return find_forms(parse_html(html)).at(0); }

// ---------------------------------------------------------------------------
// Oracles

/// P(X>Y) + 0.5 P(X=Y) by comparing every pair.
inline double pairwise_a12(const std::vector<double>& xs, const std::vector<double>& ys) {
  double wins = 0;
  for (double x : xs)
    for (double y : ys) wins += x > y ? 1.0 : x == y ? 0.5 : 0.0;
  return wins / static_cast<double>(xs.size() * ys.size());
}

/// Two-tailed permutation p-value of the rank sum by enumerating every split
/// of the pooled sample (bitmask over positions).
inline double enumerated_u_pvalue(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::vector<double> all(xs);
  all.insert(all.end(), ys.begin(), ys.end());
  const std::size_t n = all.size(), m = xs.size();
  // midranks by direct counting
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (double v : all) {
      if (v < all[i]) ++less;
      if (v == all[i]) ++equal;
    }
    rank[i] = less + (equal + 1) / 2.0;
  }
  auto sum_of = [&](std::uint32_t mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1u) s += rank[i];
    return s;
  };
  const double center = static_cast<double>(m) * static_cast<double>(n + 1) / 2.0;
  const double observed = std::fabs(sum_of((1u << m) - 1) - center);
  double hit = 0, total = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != m) continue;
    ++total;
    if (std::fabs(sum_of(mask) - center) >= observed - 1e-9) ++hit;
  }
  return hit / total;
}

/// Reference resolve: collect every match with its pre-order position using an
/// explicit stack and attribute scan, then take the smallest position.
inline const HtmlElement* scan_resolve(const Selector& sel, const HtmlElement& root) {
  auto attr_equals = [](const HtmlElement& e, const std::string& name, const std::string& value) {
    for (const auto& a : e.attributes)
      if (to_lower(a.name) == to_lower(name)) return a.value == value;
    return false;
  };
  auto has_class = [](const HtmlElement& e, const std::string& cls) {
    for (const auto& a : e.attributes) {
      if (to_lower(a.name) != "class") continue;
      std::string word;
      for (char c : a.value + " ") {
        if (is_space(c)) {
          if (word == cls) return true;
          word.clear();
        } else {
          word += c;
        }
      }
      return false;
    }
    return false;
  };
  std::vector<std::pair<std::size_t, const HtmlElement*>> found;
  std::vector<const HtmlElement*> stack{&root};
  std::size_t position = 0;
  while (!stack.empty()) {
    const auto* e = stack.back();
    stack.pop_back();
    bool hit = false;
    switch (sel.kind) {
      case Selector::Kind::Id: hit = attr_equals(*e, "id", sel.name); break;
      case Selector::Kind::Class: hit = has_class(*e, sel.name); break;
      case Selector::Kind::Tag: hit = to_lower(e->tag) == to_lower(sel.name); break;
      case Selector::Kind::AttrMatch:
        hit = to_lower(e->tag) == to_lower(sel.name) && attr_equals(*e, sel.attr, sel.value);
        break;
    }
    if (hit) found.emplace_back(position, e);
    ++position;
    for (auto it = e->children.rbegin(); it != e->children.rend(); ++it) stack.push_back(&*it);
  }
  if (found.empty()) return nullptr;
  return std::min_element(found.begin(), found.end())->second;
}

// ---------------------------------------------------------------------------
// Random generators

inline const std::vector<std::string>& tag_pool() {
  static const std::vector<std::string> v{"div", "input", "select", "option", "label", "button", "span", "textarea", "p"};
  return v;
}
inline const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> v{"a", "b", "user", "pass", "email", "x-1", "tableType", "VIP", "NORMAL"};
  return v;
}

template <class Rng>
const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

template <class Rng>
HtmlElement random_element(Rng& rng, int depth) {
  HtmlElement e;
  e.tag = pick(tag_pool(), rng);
  std::bernoulli_distribution coin(0.5);
  if (coin(rng)) e.attributes.push_back({"id", pick(word_pool(), rng)});
  if (coin(rng)) e.attributes.push_back({"name", pick(word_pool(), rng)});
  if (coin(rng)) {
    std::string cls = pick(word_pool(), rng);
    if (coin(rng)) cls += " " + pick(word_pool(), rng);
    e.attributes.push_back({"class", cls});
  }
  if (coin(rng)) e.attributes.push_back({"type", coin(rng) ? "text" : "password"});
  if (depth > 0 && !is_void_element(e.tag)) {
    int kids = std::uniform_int_distribution<int>(0, 3)(rng);
    for (int i = 0; i < kids; ++i) e.children.push_back(random_element(rng, depth - 1));
  }
  return e;
}

template <class Rng>
HtmlElement random_form(Rng& rng) {
  HtmlElement form{"form", {}, {}, {}};
  int kids = std::uniform_int_distribution<int>(1, 5)(rng);
  for (int i = 0; i < kids; ++i) form.children.push_back(random_element(rng, 3));
  return form;
}

template <class Rng>
Selector random_selector(Rng& rng) {
  switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
    case 0: return Selector::id(pick(word_pool(), rng));
    case 1: return Selector::cls(pick(word_pool(), rng));
    case 2: return Selector::tag(pick(tag_pool(), rng));
    default: {
      static const std::vector<std::string> attrs{"id", "name", "type", "class"};
      return Selector::attr_match(pick(tag_pool(), rng), pick(attrs, rng),
                                  std::bernoulli_distribution(0.8)(rng) ? pick(word_pool(), rng) : "text");
    }
  }
}

// ---------------------------------------------------------------------------
// Trial records

inline TrialRecord synthetic_record(const std::string& model, PromptVariant v, bool ok,
                                    FormCategory cat = FormCategory::Authentication, std::string form = "f",
                                    FailureReason reason = FailureReason::ContentRejected) {
  TrialRecord r;
  r.url_or_path = std::move(form);
  r.form_id = r.url_or_path;
  r.model = ModelId::parse(model);
  r.variant = v;
  r.prompt_version = kPromptVersion;
  r.category = cat;
  r.repetition = 1;
  r.outcome = ok ? SubmissionOutcome{} : SubmissionOutcome::failed(reason, "synthetic");
  if (!ok) r.stage = owner_stage(reason);
  r.timestamp = "2024-01-01T00:00:00Z";
  return r;
}

struct SsrReferenceRow {
  const char* method;
  const char* model;
  long counts[3][2];  // RH-P, LH-P, PH-P: (#, !#)
  double pct[3];
  double avg_pct;
  const char* best;
};

// Successful / failed submission counts over 438 tasks per prompt variant.
inline const std::vector<SsrReferenceRow>& ssr_reference() {
  static const std::vector<SsrReferenceRow> rows{
      {"GPT-3.5", "openai/gpt-3.5-turbo", {{198, 240}, {299, 139}, {365, 73}}, {45.21, 68.26, 83.33}, 65.60, "PH-P"},
      {"GPT-4", "openai/gpt-4", {{433, 5}, {425, 13}, {436, 2}}, {98.86, 97.03, 99.54}, 98.48, "PH-P"},
      {"GLM-3", "zhipuai/glm-3", {{339, 99}, {292, 146}, {350, 88}}, {77.40, 66.67, 79.91}, 74.66, "PH-P"},
      {"GLM-4", "zhipuai/glm-4", {{378, 60}, {399, 39}, {399, 39}}, {86.30, 91.10, 91.10}, 89.50, "LH-P&PH-P"},
      {"GLM-4V", "zhipuai/glm-4v", {{0, 438}, {0, 438}, {0, 438}}, {0.00, 0.00, 0.00}, 0.00, "--"},
      {"Baichuan2", "baichuan/baichuan2-53b", {{371, 67}, {380, 58}, {419, 19}}, {84.70, 86.76, 95.66}, 89.04, "PH-P"},
      {"LLaMa2(7B)", "replicate/llama2-7b", {{151, 287}, {1, 437}, {185, 253}}, {34.47, 0.23, 42.24}, 25.65, "PH-P"},
      {"LLaMa2(13B)", "replicate/llama2-13b", {{188, 250}, {4, 434}, {177, 261}}, {42.92, 0.91, 40.41}, 28.08, "RH-P"},
      {"LLaMa2(70B)", "replicate/llama2-70b", {{344, 94}, {29, 409}, {338, 100}}, {78.54, 6.62, 77.17}, 54.11, "RH-P"},
      {"Spark-3", "iflytek/spark-3", {{202, 236}, {215, 223}, {316, 122}}, {46.12, 49.09, 72.15}, 55.78, "PH-P"},
      {"Spark-3.5", "iflytek/spark-3.5", {{297, 141}, {378, 60}, {418, 20}}, {67.81, 86.30, 95.43}, 83.18, "PH-P"},
  };
  return rows;
}

inline constexpr double kSsrReferenceVariantAvg[3] = {60.21, 50.27, 70.63};
inline constexpr double kSsrReferenceOverallAvg = 60.37;

inline std::vector<TrialRecord> ssr_reference_records() {
  const PromptVariant vs[3] = {PromptVariant::RH_P, PromptVariant::LH_P, PromptVariant::PH_P};
  std::vector<TrialRecord> out;
  for (const auto& row : ssr_reference())
    for (int v = 0; v < 3; ++v) {
      for (long k = 0; k < row.counts[v][0]; ++k) out.push_back(synthetic_record(row.model, vs[v], true));
      for (long k = 0; k < row.counts[v][1]; ++k) out.push_back(synthetic_record(row.model, vs[v], false));
    }
  return out;
}

/// Replays a fixture through the pipeline and returns one record per row.
inline std::vector<TrialRecord> replay_fixture(const std::string& fixture_file, const std::string& cassette_file) {
  auto fx = load_fixture(data_path("fixtures/" + fixture_file));
  RunConfig cfg;
  cfg.corpus_dir = data_path("corpus");
  cfg.forms = {fx.form};
  for (const auto& row : fx.rows) cfg.models.push_back(row.model);
  cfg.variants = {PromptVariant::PH_P};
  cfg.repetitions = 1;
  cfg.mode = RunMode::Replay;
  cfg.cassettes = {data_path("cassettes/" + cassette_file)};
  auto gw = make_gateway(cfg, std::make_shared<VirtualClock>());
  std::vector<TrialRecord> out;
  run_pipeline(cfg, *gw, simulator_factory(), [&](const TrialRecord& r) { out.push_back(r); });
  return out;
}

}  // namespace fftest
