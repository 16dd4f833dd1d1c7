#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "zap/error.hpp"
#include "zap/meta_dataset.hpp"
#include "zap/random.hpp"
#include "zap/surrogate.hpp"

namespace zap {

// `chosen` is the argmin of `scores` with ties to the lowest index. Selectors
// that maximize (mean ALC) store negated values so that the rule is uniform.
struct SelectionResult {
  std::size_t chosen = 0;
  std::vector<double> scores;
  std::string method;
  std::optional<std::uint64_t> seed;
};

inline std::size_t argmin_lowest(std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("cannot select from an empty candidate list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] < scores[best]) best = i;
  return best;
}

/// Surrogate scores for every candidate against one meta vector.
inline std::vector<double> score_candidates(const SurrogateParams& p, const MetaVector& meta_vec,
                                            std::span<const PipelineVector> candidates) {
  if (candidates.empty()) throw ValidationError("cannot select from an empty candidate list");
  const auto pd = candidates.front().size();
  if (pd + kMetaDim != p.input_dim())
    throw ValidationError("candidate dimension " + std::to_string(pd + kMetaDim) + " does not match network input " +
                          std::to_string(p.input_dim()));
  SurrogateParams::Matrix x(static_cast<Eigen::Index>(pd + kMetaDim), static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (candidates[c].size() != pd) throw ValidationError("candidate vectors differ in length");
    for (std::size_t r = 0; r < pd; ++r)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = candidates[c][r];
    for (std::size_t r = 0; r < kMetaDim; ++r)
      x(static_cast<Eigen::Index>(pd + r), static_cast<Eigen::Index>(c)) = meta_vec[r];
  }
  return forward_columns(p, std::move(x));
}

/// Zero-shot choice: the candidate with the lowest surrogate score.
inline SelectionResult select_zero_shot(const SurrogateParams& p, const MetaVector& meta_vec,
                                        std::span<const PipelineVector> candidates) {
  SelectionResult r;
  r.scores = score_candidates(p, meta_vec, candidates);
  r.chosen = argmin_lowest(r.scores);
  r.method = "zap_hpo";
  return r;
}

// Candidate indices sorted by ascending score, ties by index.
inline std::vector<std::size_t> rank_by_score(std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("cannot rank an empty candidate list");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

inline std::vector<std::size_t> rank_pipelines(const SurrogateParams& p, const MetaVector& meta_vec,
                                               std::span<const PipelineVector> candidates) {
  const auto scores = score_candidates(p, meta_vec, candidates);
  return rank_by_score(scores);
}

namespace detail {

// Mean ALC per pipeline over the given rows' observed cells; nullopt where a
// pipeline has no observation.
inline std::vector<std::optional<double>> column_means(const CostMatrix& m, std::span<const std::size_t> rows) {
  std::vector<double> sum(m.n_pipelines(), 0.0);
  std::vector<std::size_t> count(m.n_pipelines(), 0);
  for (auto d : rows)
    for (std::size_t p = 0; p < m.n_pipelines(); ++p)
      if (auto v = m.alc(d, p)) {
        sum[p] += *v;
        ++count[p];
      }
  std::vector<std::optional<double>> out(m.n_pipelines());
  for (std::size_t p = 0; p < m.n_pipelines(); ++p)
    if (count[p] > 0) out[p] = sum[p] / static_cast<double>(count[p]);
  return out;
}

// Pipelines without observations are an error unless `allow_missing`, in
// which case they score +inf and are never chosen.
inline SelectionResult best_mean(const CostMatrix& m, std::span<const std::size_t> rows, std::string method,
                                 bool allow_missing = false) {
  if (m.n_pipelines() == 0) throw ValidationError("cannot select from an empty candidate list");
  const auto means = column_means(m, rows);
  SelectionResult r;
  r.method = std::move(method);
  for (std::size_t p = 0; p < means.size(); ++p) {
    if (!means[p]) {
      if (!allow_missing) throw ValidationError("pipeline '" + m.pipeline_ids()[p] + "' has no observations");
      r.scores.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    r.scores.push_back(-*means[p]);
  }
  r.chosen = argmin_lowest(r.scores);
  if (std::isinf(r.scores[r.chosen])) throw ValidationError("no pipeline has observations in the selected rows");
  return r;
}

}  // namespace detail

/// The pipeline with the highest mean ALC over its observed cells.
inline SelectionResult select_single_best(const CostMatrix& m) {
  std::vector<std::size_t> rows(m.n_datasets());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return detail::best_mean(m, rows, "single_best");
}

inline SelectionResult select_random(std::size_t n_candidates, std::uint64_t seed) {
  if (n_candidates == 0) throw ValidationError("cannot select from an empty candidate list");
  auto rng = make_rng({seed, 0x4a4d});
  SelectionResult r;
  r.chosen = std::uniform_int_distribution<std::size_t>(0, n_candidates - 1)(rng);
  r.scores.assign(n_candidates, 0.0);
  r.method = "random";
  r.seed = seed;
  return r;
}

/// k-nearest-neighbour algorithm selection: the k train datasets closest to
/// the query in Euclidean distance vote with their mean ALC per pipeline.
/// Distance ties resolve to the lower row index.
inline SelectionResult select_knn(const CostMatrix& m, std::span<const MetaVector> train_meta,
                                  const MetaVector& query, std::size_t k) {
  if (train_meta.size() != m.n_datasets()) throw ValidationError("one meta vector per cost-matrix row is required");
  if (k < 1 || k > m.n_datasets())
    throw ValidationError("k=" + std::to_string(k) + " out of range [1," + std::to_string(m.n_datasets()) + "]");
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t d = 0; d < train_meta.size(); ++d) {
    double s = 0.0;
    for (std::size_t r = 0; r < kMetaDim; ++r) s += (train_meta[d][r] - query[r]) * (train_meta[d][r] - query[r]);
    dist.emplace_back(std::sqrt(s), d);
  }
  std::sort(dist.begin(), dist.end());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < k; ++i) rows.push_back(dist[i].second);
  // Row order fixes the summation order, so k = all rows reproduces the
  // single-best means bit for bit.
  std::sort(rows.begin(), rows.end());
  return detail::best_mean(m, rows, "zap_as_knn", true);
}

}  // namespace zap
