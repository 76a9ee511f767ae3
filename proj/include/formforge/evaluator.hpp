#pragma once

// SSR tables, failure histograms and method comparisons over trial records.

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "formforge/stats.hpp"
#include "formforge/trial.hpp"

namespace formforge {

struct SsrCell {
  long success = 0;  // #
  long failure = 0;  // !#

  long total() const { return success + failure; }
  /// #/(#+!#)*100 at full precision.
  double rate() const {
    if (total() == 0) throw StatsError(StatsError::Kind::EmptyGroup, "SSR of an empty group");
    return 100.0 * static_cast<double>(success) / static_cast<double>(total());
  }
  void add(bool ok) { ++(ok ? success : failure); }

  bool operator==(const SsrCell&) const = default;
};

struct GroupBy {
  bool model = true;
  bool variant = true;
  bool category = false;

  /// Comma-separated subset of model,variant,category.
  static GroupBy parse(std::string_view csv) {
    GroupBy g{false, false, false};
    for (const auto& part : split(csv, ',')) {
      auto p = to_lower(trim(part));
      if (p == "model")
        g.model = true;
      else if (p == "variant")
        g.variant = true;
      else if (p == "category")
        g.category = true;
      else if (!p.empty())
        throw Error("unknown group-by key '" + p + "'");
    }
    return g;
  }
};

struct SsrKey {
  std::string model;     // empty when not grouped by model
  std::string variant;   // empty when not grouped by variant
  std::string category;  // empty when not grouped by category

  auto operator<=>(const SsrKey&) const = default;
  bool operator==(const SsrKey&) const = default;
};

struct SsrRow {
  SsrKey key;
  SsrCell cell;
};

/// Rows in order of first appearance of each group.
inline std::vector<SsrRow> compute_ssr(const std::vector<TrialRecord>& records, GroupBy by = {}) {
  std::vector<SsrRow> rows;
  std::map<SsrKey, std::size_t> index;
  for (const auto& r : records) {
    SsrKey k{by.model ? r.model.str() : "", by.variant ? std::string(to_string(r.variant)) : "",
             by.category ? std::string(to_string(r.category)) : ""};
    auto [it, fresh] = index.try_emplace(k, rows.size());
    if (fresh) rows.push_back({k, {}});
    rows[it->second].cell.add(r.outcome.success());
  }
  return rows;
}

struct FailureHistogram {
  std::map<FailureReason, long> counts;
  long failed = 0;

  double percent(FailureReason r) const {
    auto it = counts.find(r);
    return it == counts.end() || failed == 0 ? 0.0 : 100.0 * static_cast<double>(it->second) / static_cast<double>(failed);
  }
  bool empty() const { return failed == 0; }
};

inline FailureHistogram classify_failures(const std::vector<TrialRecord>& records) {
  FailureHistogram h;
  for (const auto& r : records) {
    if (r.outcome.success() || !r.outcome.reason) continue;
    ++h.counts[*r.outcome.reason];
    ++h.failed;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Method comparison

struct MethodKey {
  ModelId model;
  PromptVariant variant = PromptVariant::PH_P;

  bool matches(const TrialRecord& r) const { return r.model == model && r.variant == variant; }
  std::string str() const { return model.str() + "@" + std::string(to_string(variant)); }

  /// "provider/model@VARIANT"
  static MethodKey parse(std::string_view s) {
    auto at = s.rfind('@');
    if (at == std::string_view::npos) throw Error("method must look like provider/model@VARIANT: " + std::string(s));
    auto v = prompt_variant(s.substr(at + 1));
    if (!v) throw Error("unknown variant in method: " + std::string(s));
    return {ModelId::parse(s.substr(0, at)), *v};
  }
};

enum class Verdict { Better, Worse, Tie };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Better: return "better";
    case Verdict::Worse: return "worse";
    case Verdict::Tie: return "tie";
  }
  return "?";
}

struct StatComparison {
  double p_value = 1;
  double a12 = 0.5;
  double r1 = 0;
  std::size_t x_count = 0;
  std::size_t y_count = 0;
  UMode mode = UMode::Exact;
  Verdict verdict = Verdict::Tie;
};

struct CompareOptions {
  bool per_trial = false;  // sample unit: one 0/1 per trial instead of per-form success fraction
  std::size_t exact_max = kDefaultExactMax;
  double alpha = 0.05;
};

inline Verdict verdict_for(double p, double a12, double alpha = 0.05) {
  if (p < alpha && a12 > 0.5) return Verdict::Better;
  if (p < alpha && a12 < 0.5) return Verdict::Worse;
  return Verdict::Tie;
}

/// Compares two samples: exact U test when small enough, normal approximation otherwise.
inline StatComparison compare_samples(const std::vector<double>& xs, const std::vector<double>& ys,
                                      const CompareOptions& opt = {}) {
  StatComparison c;
  c.x_count = xs.size();
  c.y_count = ys.size();
  c.r1 = rank_sum_first(xs, ys);
  c.a12 = vargha_delaney_a12(xs, ys);
  c.mode = xs.size() + ys.size() <= opt.exact_max ? UMode::Exact : UMode::Approx;
  c.p_value = mann_whitney_u(xs, ys, c.mode, opt.exact_max).p_value;
  c.verdict = verdict_for(c.p_value, c.a12, opt.alpha);
  return c;
}

/// Per-method samples. Per-form unit: success fraction over that form's trials,
/// one value per form (forms in sorted order).
inline std::vector<double> method_sample(const std::vector<TrialRecord>& records, const MethodKey& m,
                                         bool per_trial) {
  std::vector<double> out;
  if (per_trial) {
    for (const auto& r : records)
      if (m.matches(r)) out.push_back(r.outcome.success() ? 1.0 : 0.0);
    return out;
  }
  std::map<std::string, SsrCell> per_form;
  for (const auto& r : records)
    if (m.matches(r)) per_form[r.url_or_path].add(r.outcome.success());
  for (const auto& [form, cell] : per_form)
    out.push_back(static_cast<double>(cell.success) / static_cast<double>(cell.total()));
  return out;
}

inline StatComparison compare_methods(const std::vector<TrialRecord>& records, const MethodKey& a,
                                      const MethodKey& b, const CompareOptions& opt = {}) {
  auto xs = method_sample(records, a, opt.per_trial);
  auto ys = method_sample(records, b, opt.per_trial);
  if (xs.empty()) throw StatsError(StatsError::Kind::EmptySample, "no trials for " + a.str());
  if (ys.empty()) throw StatsError(StatsError::Kind::EmptySample, "no trials for " + b.str());
  return compare_samples(xs, ys, opt);
}

}  // namespace formforge
