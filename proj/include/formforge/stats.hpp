#pragma once

// Vargha-Delaney A12 and the two-tailed Mann-Whitney U test.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "formforge/common.hpp"

namespace formforge {

class StatsError : public Error {
 public:
  enum class Kind { EmptySample, ExactTooLarge, EmptyGroup };
  StatsError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

namespace stats_detail {

/// Doubled midranks (integers) of the pooled sample, in input order: xs then ys.
inline std::vector<long> doubled_midranks(const std::vector<double>& pooled) {
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pooled[a] < pooled[b]; });
  std::vector<long> ranks(pooled.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    long twice = static_cast<long>(i + 1) + static_cast<long>(j + 1);  // first + last rank
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = twice;
    i = j + 1;
  }
  return ranks;
}

inline std::vector<double> pooled(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::vector<double> all(xs);
  all.insert(all.end(), ys.begin(), ys.end());
  return all;
}

inline void require_nonempty(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.empty() || ys.empty()) throw StatsError(StatsError::Kind::EmptySample, "both samples must be nonempty");
}

}  // namespace stats_detail

/// Midrank sum of the first sample within the pooled sample.
inline double rank_sum_first(const std::vector<double>& xs, const std::vector<double>& ys) {
  stats_detail::require_nonempty(xs, ys);
  auto ranks = stats_detail::doubled_midranks(stats_detail::pooled(xs, ys));
  long twice = std::accumulate(ranks.begin(), ranks.begin() + static_cast<long>(xs.size()), 0L);
  return static_cast<double>(twice) / 2.0;
}

/// A12 = (R1/X - (X+1)/2) / Y, with R1 the midrank sum of xs.
inline double vargha_delaney_a12(const std::vector<double>& xs, const std::vector<double>& ys) {
  double r1 = rank_sum_first(xs, ys);
  double x = static_cast<double>(xs.size());
  double y = static_cast<double>(ys.size());
  return (r1 / x - (x + 1) / 2) / y;
}

enum class UMode { Exact, Approx };

struct UTest {
  double u = 0;  // U statistic of the first sample
  double p_value = 1;
  UMode mode = UMode::Exact;
};

inline constexpr std::size_t kDefaultExactMax = 20;

/// Two-tailed Mann-Whitney U test. Exact mode enumerates the permutation
/// distribution of the (midrank) rank sum; approx uses the normal
/// approximation with tie and continuity correction.
inline UTest mann_whitney_u(const std::vector<double>& xs, const std::vector<double>& ys, UMode mode,
                            std::size_t exact_max = kDefaultExactMax) {
  stats_detail::require_nonempty(xs, ys);
  const auto all = stats_detail::pooled(xs, ys);
  const auto ranks = stats_detail::doubled_midranks(all);
  const std::size_t m = xs.size(), n = ys.size(), N = m + n;
  const long s_obs = std::accumulate(ranks.begin(), ranks.begin() + static_cast<long>(m), 0L);

  UTest out;
  out.mode = mode;
  out.u = static_cast<double>(s_obs) / 2.0 - static_cast<double>(m * (m + 1)) / 2.0;

  if (mode == UMode::Exact) {
    if (N > exact_max)
      throw StatsError(StatsError::Kind::ExactTooLarge,
                       "exact test limited to " + std::to_string(exact_max) + " observations, got " + std::to_string(N));
    // ways[j][s]: number of j-subsets of the pooled ranks whose doubled sum is s.
    const long total = std::accumulate(ranks.begin(), ranks.end(), 0L);
    std::vector<std::vector<double>> ways(m + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
    ways[0][0] = 1;
    for (std::size_t k = 0; k < N; ++k) {
      const auto r = static_cast<std::size_t>(ranks[k]);
      for (std::size_t j = std::min(m, k + 1); j >= 1; --j)
        for (std::size_t s = static_cast<std::size_t>(total); s >= r; --s) {
          ways[j][s] += ways[j - 1][s - r];
          if (s == r) break;
        }
    }
    const long center = static_cast<long>(m * (N + 1));  // doubled expected rank sum
    const long dev = std::labs(s_obs - center);
    double hit = 0, all_ways = 0;
    for (long s = 0; s <= total; ++s) {
      double w = ways[m][static_cast<std::size_t>(s)];
      all_ways += w;
      if (std::labs(s - center) >= dev) hit += w;
    }
    out.p_value = std::min(1.0, hit / all_ways);
    return out;
  }

  const double md = static_cast<double>(m), nd = static_cast<double>(n), Nd = static_cast<double>(N);
  const double mu = md * nd / 2.0;
  double tie_term = 0;
  {
    auto sorted = all;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      double t = static_cast<double>(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
  }
  const double var = md * nd / 12.0 * ((Nd + 1) - tie_term / (Nd * (Nd - 1)));
  if (!(var > 0)) {
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(0.0, std::fabs(out.u - mu) - 0.5) / std::sqrt(var);
  out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

}  // namespace formforge
