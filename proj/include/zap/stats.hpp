#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "zap/error.hpp"

namespace zap {

/// Ranks starting at 1 for the smallest value; tied values share the mean of
/// the ranks they span.
inline std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Sample standard deviation (n - 1); 0 for fewer than two values.
inline double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (auto x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

struct WilcoxonResult {
  double statistic = 0.0;  // sum of signed ranks, W+ - W-
  double p_value = 1.0;    // two-sided
  std::size_t n = 0;       // pairs left after dropping zero differences
  bool exact = false;
};

inline constexpr std::size_t kWilcoxonExactMax = 20;

/// Paired two-sided signed-rank test on a - b. Zero differences are dropped
/// and tied |differences| get midranks. Up to 20 pairs the null distribution
/// of the signed statistic is counted exactly; beyond that a normal
/// approximation with continuity correction is used.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("paired samples differ in length");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) diffs.push_back(a[i] - b[i]);
  if (diffs.size() < 5) throw ValidationError("insufficient pairs: fewer than 5 nonzero differences");

  std::vector<double> mags;
  for (auto d : diffs) mags.push_back(std::abs(d));
  const auto ranks = midranks(mags);

  WilcoxonResult out;
  out.n = diffs.size();
  // Midranks are multiples of 1/2, so doubled ranks are exact integers.
  std::vector<std::int64_t> doubled;
  std::int64_t observed = 0, total = 0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    const auto r2 = static_cast<std::int64_t>(std::llround(2.0 * ranks[i]));
    doubled.push_back(r2);
    observed += diffs[i] > 0 ? r2 : -r2;
    total += r2;
  }
  out.statistic = static_cast<double>(observed) / 2.0;

  if (out.n <= kWilcoxonExactMax) {
    out.exact = true;
    // counts[s + total] = number of sign patterns whose doubled signed sum is s.
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(2 * total + 1), 0);
    counts[static_cast<std::size_t>(total)] = 1;
    for (auto r2 : doubled) {
      std::vector<std::uint64_t> next(counts.size(), 0);
      for (std::size_t s = 0; s < counts.size(); ++s) {
        if (counts[s] == 0) continue;
        const auto sum = static_cast<std::int64_t>(s);
        if (sum + r2 < static_cast<std::int64_t>(counts.size())) next[static_cast<std::size_t>(sum + r2)] += counts[s];
        if (sum - r2 >= 0) next[static_cast<std::size_t>(sum - r2)] += counts[s];
      }
      counts.swap(next);
    }
    std::uint64_t extreme = 0;
    const auto cut = std::abs(observed);
    for (std::size_t s = 0; s < counts.size(); ++s)
      if (std::abs(static_cast<std::int64_t>(s) - total) >= cut) extreme += counts[s];
    out.p_value = static_cast<double>(extreme) / std::ldexp(1.0, static_cast<int>(out.n));
  } else {
    double var = 0.0;
    for (auto r : ranks) var += r * r;
    // The signed statistic moves in steps of 2, so the correction is 1.
    const double z = std::max(0.0, (std::abs(out.statistic) - 1.0) / std::sqrt(var));
    out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  }
  return out;
}

/// Holm step-down adjustment, returned in the input order.
inline std::vector<double> holm_correction(std::span<const double> pvals) {
  for (auto p : pvals)
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("p-values must lie in [0,1]");
  const std::size_t m = pvals.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pvals[a] < pvals[b]; });
  std::vector<double> out(m);
  double running = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double adj = std::min(1.0, pvals[order[i]] * static_cast<double>(m - i));
    running = std::max(running, adj);
    out[order[i]] = running;
  }
  return out;
}

struct RankTable {
  std::vector<std::string> methods;
  std::vector<double> mean_rank;  // over datasets and seeds
  std::vector<double> std_rank;   // over seeds, of the per-seed average rank
};

/// `alc[seed][dataset][method]`, higher is better. Rank 1 is the best method
/// on a dataset; ties share midranks.
inline RankTable average_ranks(const std::vector<std::vector<std::vector<double>>>& alc,
                               std::vector<std::string> methods) {
  const std::size_t m = methods.size();
  if (m == 0 || alc.empty()) throw ValidationError("rank table needs at least one method and one seed");
  std::vector<std::vector<double>> per_seed(m);
  for (const auto& seed : alc) {
    if (seed.empty()) throw ValidationError("rank table needs at least one dataset per seed");
    std::vector<double> sums(m, 0.0);
    for (const auto& row : seed) {
      if (row.size() != m) throw ValidationError("missing score: every method must be scored on every dataset");
      std::vector<double> neg;
      for (auto v : row) {
        if (std::isnan(v)) throw ValidationError("missing score: every method must be scored on every dataset");
        neg.push_back(-v);
      }
      const auto r = midranks(neg);
      for (std::size_t k = 0; k < m; ++k) sums[k] += r[k];
    }
    for (std::size_t k = 0; k < m; ++k) per_seed[k].push_back(sums[k] / static_cast<double>(seed.size()));
  }
  RankTable t;
  t.methods = std::move(methods);
  for (std::size_t k = 0; k < m; ++k) {
    t.mean_rank.push_back(mean(per_seed[k]));
    t.std_rank.push_back(sample_std(per_seed[k]));
  }
  return t;
}

// "2.07±0.05"
inline std::string format_mean_std(double mean_value, double std_value, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f±%.*f", decimals, mean_value, decimals, std_value);
  return buf;
}

}  // namespace zap
