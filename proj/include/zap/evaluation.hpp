#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "zap/error.hpp"
#include "zap/meta_dataset.hpp"
#include "zap/pipeline_space.hpp"
#include "zap/random.hpp"
#include "zap/selector.hpp"
#include "zap/stats.hpp"
#include "zap/surrogate.hpp"

namespace zap {

enum class Method {
  zap_hpo,
  zap_as_knn,
  single_best,
  random,
  oracle,  // argmax of the held-out row; diagnostic only
};

inline std::string to_string(Method m) {
  switch (m) {
    case Method::zap_hpo: return "zap_hpo";
    case Method::zap_as_knn: return "zap_as_knn";
    case Method::single_best: return "single_best";
    case Method::random: return "random";
    case Method::oracle: return "oracle";
  }
  return "unknown";
}

inline Method method_from_string(const std::string& s) {
  if (s == "zap_hpo") return Method::zap_hpo;
  if (s == "zap_as_knn" || s == "knn") return Method::zap_as_knn;
  if (s == "single_best") return Method::single_best;
  if (s == "random") return Method::random;
  if (s == "oracle") return Method::oracle;
  throw ValidationError("unknown method '" + s + "'");
}

/// Cost matrix plus the descriptors aligned with its axes.
struct MetaDataset {
  CostMatrix costs;
  std::vector<DatasetMetaFeatures> meta;  // meta[i] describes costs row i
  std::vector<PipelineConfig> pipelines;  // pipelines[j] is costs column j
  SearchSpace space = default_space();

  void validate() const {
    if (meta.size() != costs.n_datasets()) throw ValidationError("meta-features do not cover every cost-matrix row");
    if (pipelines.size() != costs.n_pipelines())
      throw ValidationError("pipeline configs do not cover every cost-matrix column");
    for (std::size_t i = 0; i < meta.size(); ++i)
      if (meta[i].dataset_id != costs.dataset_ids()[i])
        throw ValidationError("meta-feature row " + std::to_string(i) + " is '" + meta[i].dataset_id +
                              "' but cost-matrix row is '" + costs.dataset_ids()[i] + "'");
  }
};

/// Reorders `meta` to follow the cost-matrix rows.
inline std::vector<DatasetMetaFeatures> align_meta(const CostMatrix& costs, std::span<const DatasetMetaFeatures> meta) {
  std::map<std::string, const DatasetMetaFeatures*> by_id;
  for (const auto& mf : meta) by_id[mf.dataset_id] = &mf;
  std::vector<DatasetMetaFeatures> out;
  for (const auto& id : costs.dataset_ids()) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError("no meta-features for dataset '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

struct FoldSpec {
  std::string group;
  std::vector<std::size_t> test;   // dataset indices of the held-out group
  std::vector<std::size_t> train;  // every other dataset
};

/// One fold per core group; a group's variants are always held out together.
/// Folds are ordered by group id.
inline std::vector<FoldSpec> make_logo_folds(std::span<const DatasetMetaFeatures> meta) {
  std::set<std::string> groups;
  for (const auto& mf : meta) {
    if (mf.group_id.empty()) throw ValidationError("dataset '" + mf.dataset_id + "' has no group_id");
    groups.insert(mf.group_id);
  }
  std::vector<FoldSpec> folds;
  for (const auto& g : groups) {
    FoldSpec f;
    f.group = g;
    for (std::size_t i = 0; i < meta.size(); ++i) (meta[i].group_id == g ? f.test : f.train).push_back(i);
    folds.push_back(std::move(f));
  }
  return folds;
}

inline double oracle_alc(const CostMatrix& m, std::size_t row) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < m.n_pipelines(); ++p)
    if (auto v = m.alc(row, p)) best = std::max(best, *v);
  if (std::isinf(best)) throw ValidationError("dataset '" + m.dataset_ids()[row] + "' has no observed cells");
  return best;
}

/// Best observed ALC in the row minus the ALC of the chosen pipeline.
inline double regret(std::size_t chosen, const CostMatrix& m, std::size_t row) {
  if (!m.observed(row, chosen))
    throw ValidationError("chosen pipeline '" + m.pipeline_ids()[chosen] + "' is unobserved on dataset '" +
                          m.dataset_ids()[row] + "'");
  return oracle_alc(m, row) - m.alc_at(row, chosen);
}

struct EvalOptions {
  TrainConfig train;
  std::size_t knn_k = 5;
  double keep_fraction = 1.0;  // applied to the meta-train cells only
  bool inner_cv = false;       // pick the step budget by inner cross-validation
  std::size_t inner_folds = 5;
  std::size_t checkpoints = 20;
  std::size_t jobs = 1;
};

struct EvalRecord {
  std::size_t fold = 0;
  std::uint64_t seed = 0;
  std::string dataset_id;
  std::size_t chosen = 0;
  std::string chosen_id;
  double alc = 0.0;
  double oracle_alc = 0.0;
  double regret = 0.0;
};

// Bookkeeping for one (fold, seed) fit.
struct FitRecord {
  std::size_t fold = 0;
  std::string group;
  std::uint64_t seed = 0;
  std::size_t train_cells = 0;
  std::size_t n_triples = 0;
  std::size_t steps = 0;
  std::size_t test_row_reads = 0;  // cell reads on held-out rows before selection
};

struct EvalReport {
  Method method = Method::zap_hpo;
  double keep_fraction = 1.0;
  std::vector<std::uint64_t> seeds;
  std::vector<EvalRecord> records;  // ordered by (fold, seed, dataset)
  std::vector<FitRecord> fits;      // ordered by (fold, seed)

  std::vector<double> per_seed_mean_regret() const {
    std::vector<double> out;
    for (auto s : seeds) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& r : records)
        if (r.seed == s) {
          sum += r.regret;
          ++n;
        }
      out.push_back(n ? sum / static_cast<double>(n) : 0.0);
    }
    return out;
  }

  double mean_regret() const {
    const auto v = per_seed_mean_regret();
    return mean(v);
  }
  double std_regret() const {
    const auto v = per_seed_mean_regret();
    return sample_std(v);
  }
  std::size_t test_row_reads() const {
    std::size_t n = 0;
    for (const auto& f : fits) n += f.test_row_reads;
    return n;
  }
};

namespace detail {

inline std::uint64_t fraction_bits(double f) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &f, sizeof bits);
  return bits;
}

// Lowest score among `candidates`, ties to the lowest pipeline index.
inline std::size_t choose_among(std::span<const double> scores, std::span<const std::size_t> candidates) {
  std::size_t best = candidates.front();
  for (auto c : candidates)
    if (scores[c] < scores[best]) best = c;
  return best;
}

inline std::vector<std::size_t> observed_columns(const CostMatrix& m, std::size_t row) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < m.n_pipelines(); ++p)
    if (m.observed(row, p)) out.push_back(p);
  return out;
}

template <typename T>
std::vector<T> pick(std::span<const T> xs, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(xs[i]);
  return out;
}

// Mean regret of zero-shot choices on `rows` of `m`.
inline double zero_shot_regret(const SurrogateParams& p, const CostMatrix& m, std::span<const std::size_t> rows,
                               std::span<const MetaVector> meta_vecs, std::span<const PipelineVector> pipes) {
  double sum = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto cand = observed_columns(m, rows[k]);
    if (cand.empty()) continue;
    const auto scores = score_candidates(p, meta_vecs[k], pipes);
    sum += regret(choose_among(scores, cand), m, rows[k]);
  }
  return rows.empty() ? 0.0 : sum / static_cast<double>(rows.size());
}

}  // namespace detail

/// Step budget chosen by group-respecting inner cross-validation on the
/// meta-train datasets: each inner fold trains on the others, mean validation
/// regret is tracked at `checkpoints` evenly spaced steps, and the checkpoint
/// with the lowest regret summed over folds wins (ties go to the later one).
inline std::size_t inner_cv_epochs(const CostMatrix& train_costs, std::span<const DatasetMetaFeatures> train_meta,
                                   std::span<const PipelineVector> pipes, const TrainConfig& cfg,
                                   std::size_t n_folds = 5, std::size_t checkpoints = 20) {
  cfg.validate();
  if (train_meta.size() != train_costs.n_datasets())
    throw ValidationError("meta-features do not match the train rows");
  if (n_folds < 2) throw ValidationError("inner cross-validation needs at least 2 folds");
  std::set<std::string> group_set;
  for (const auto& mf : train_meta) group_set.insert(mf.group_id);
  if (train_costs.n_datasets() < n_folds || group_set.size() < n_folds)
    throw ValidationError("too few datasets: inner cross-validation needs at least " + std::to_string(n_folds) +
                          " groups");

  std::vector<std::size_t> grid;
  for (std::size_t k = 1; k <= checkpoints; ++k) {
    const auto s = std::max<std::size_t>(1, (k * cfg.steps + checkpoints / 2) / checkpoints);
    if (grid.empty() || grid.back() != s) grid.push_back(s);
  }
  // Groups are dealt round-robin in id order.
  std::map<std::string, std::size_t> fold_of;
  std::size_t next = 0;
  for (const auto& g : group_set) fold_of[g] = next++ % n_folds;

  std::vector<double> total(grid.size(), 0.0);
  for (std::size_t f = 0; f < n_folds; ++f) {
    std::vector<std::size_t> fit_rows, val_rows;
    for (std::size_t i = 0; i < train_meta.size(); ++i)
      (fold_of[train_meta[i].group_id] == f ? val_rows : fit_rows).push_back(i);
    const auto fit_meta = detail::pick(train_meta, fit_rows);
    const auto stats = fit_feature_stats(fit_meta);
    const auto fit_vecs = featurize_all(fit_meta, stats);
    const auto val_vecs = featurize_all(detail::pick(train_meta, val_rows), stats);
    const auto fit_costs = train_costs.select_rows(fit_rows);
    const auto in = SurrogateInputs::from(pipes, fit_vecs);
    auto inner_cfg = cfg;
    inner_cfg.seed = derive_seed({cfg.seed, 0x1cf, f});
    std::size_t at = 0;
    zap::train(fit_costs, in, inner_cfg,
          [&](std::size_t step, const SurrogateParams& p) {
            if (at < grid.size() && grid[at] == step)
              total[at++] += detail::zero_shot_regret(p, train_costs, val_rows, val_vecs, pipes);
          },
          1);
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (total[k] <= total[best]) best = k;
  return grid[best];
}

namespace detail {

struct TaskOutput {
  std::vector<EvalRecord> records;
  FitRecord fit;
};

inline TaskOutput run_fold_seed(Method method, const MetaDataset& md, const FoldSpec& fold, std::size_t fold_index,
                                std::uint64_t seed, const EvalOptions& opts,
                                std::span<const PipelineVector> pipes) {
  auto audit = std::make_shared<ReadAudit>(md.costs.n_datasets());
  const auto full = md.costs.with_audit(audit);
  auto train = full.select_rows(fold.train);
  if (opts.keep_fraction < 1.0)
    train = sparsify(train, opts.keep_fraction, derive_seed({seed, fold_index, fraction_bits(opts.keep_fraction)}));

  TaskOutput out;
  out.fit.fold = fold_index;
  out.fit.group = fold.group;
  out.fit.seed = seed;
  out.fit.train_cells = train.n_observed();

  // Fitting: only meta-train rows and meta-train meta-features are visible.
  const auto train_meta = pick(std::span<const DatasetMetaFeatures>(md.meta), fold.train);
  std::vector<MetaVector> train_vecs;
  FeatureStats stats;
  if (method == Method::zap_hpo || method == Method::zap_as_knn) {
    stats = fit_feature_stats(train_meta);
    train_vecs = featurize_all(train_meta, stats);
  }
  SurrogateParams params;
  std::vector<double> fixed_scores;  // single-best
  if (method == Method::zap_hpo) {
    auto cfg = opts.train;
    cfg.seed = derive_seed({seed, fold_index, 0x2a9});
    if (opts.inner_cv) cfg.steps = inner_cv_epochs(train, train_meta, pipes, cfg, opts.inner_folds, opts.checkpoints);
    out.fit.steps = cfg.steps;
    out.fit.n_triples = is_ranking(cfg.objective) ? TripleSampler(train).size() : 0;
    params = zap::train(train, SurrogateInputs::from(pipes, train_vecs), cfg).params;
  } else if (method == Method::single_best) {
    fixed_scores = select_single_best(train).scores;
  }
  out.fit.test_row_reads = audit->reads(fold.test);

  // Selection and scoring on the held-out rows.
  for (auto row : fold.test) {
    const auto cand = observed_columns(full, row);
    if (cand.empty()) continue;
    std::size_t chosen = 0;
    switch (method) {
      case Method::zap_hpo: {
        const auto scores = score_candidates(params, featurize(md.meta[row], stats), pipes);
        chosen = choose_among(scores, cand);
        break;
      }
      case Method::zap_as_knn: {
        const auto k = std::min(opts.knn_k, train.n_datasets());
        const auto r = select_knn(train, train_vecs, featurize(md.meta[row], stats), k);
        chosen = choose_among(r.scores, cand);
        break;
      }
      case Method::single_best:
        chosen = choose_among(fixed_scores, cand);
        break;
      case Method::random:
        chosen = cand[select_random(cand.size(), derive_seed({seed, fold_index, row, 0x7a})).chosen];
        break;
      case Method::oracle: {
        std::vector<double> neg(full.n_pipelines(), 0.0);
        for (auto p : cand) neg[p] = -full.alc_at(row, p);
        chosen = choose_among(neg, cand);
        break;
      }
    }
    EvalRecord rec;
    rec.fold = fold_index;
    rec.seed = seed;
    rec.dataset_id = full.dataset_ids()[row];
    rec.chosen = chosen;
    rec.chosen_id = full.pipeline_ids()[chosen];
    rec.alc = full.alc_at(row, chosen);
    rec.oracle_alc = oracle_alc(full, row);
    rec.regret = regret(chosen, full, row);
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace detail

/// Leave-one-group-out evaluation of one method over every (fold, seed).
/// Tasks are independent and may run on `opts.jobs` threads; results are
/// merged in (fold, seed) order, so the report does not depend on `jobs`.
inline EvalReport evaluate_method(Method method, const MetaDataset& md, std::span<const FoldSpec> folds,
                                  std::span<const std::uint64_t> seeds, const EvalOptions& opts = {}) {
  md.validate();
  if (seeds.empty()) throw ValidationError("at least one seed is required");
  if (!(opts.keep_fraction > 0.0 && opts.keep_fraction <= 1.0))
    throw ValidationError("keep fraction must lie in (0,1]");
  const auto pipes = encode_all(md.pipelines, md.space);

  const std::size_t n_tasks = folds.size() * seeds.size();
  std::vector<detail::TaskOutput> outputs(n_tasks);
  std::vector<std::exception_ptr> errors(n_tasks);
  auto run = [&](std::size_t t) {
    try {
      const auto f = t / seeds.size();
      outputs[t] = detail::run_fold_seed(method, md, folds[f], f, seeds[t % seeds.size()], opts, pipes);
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(opts.jobs, n_tasks));
  if (jobs == 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) run(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < n_tasks; t = next++) run(t);
      });
    for (auto& th : pool) th.join();
  }
  for (std::size_t t = 0; t < n_tasks; ++t)
    if (errors[t]) {
      try {
        std::rethrow_exception(errors[t]);
      } catch (const std::exception& e) {
        throw std::runtime_error("fold '" + folds[t / seeds.size()].group + "' failed: " + e.what());
      }
    }

  EvalReport report;
  report.method = method;
  report.keep_fraction = opts.keep_fraction;
  report.seeds.assign(seeds.begin(), seeds.end());
  for (auto& o : outputs) {
    report.fits.push_back(o.fit);
    for (auto& r : o.records) report.records.push_back(std::move(r));
  }
  return report;
}

struct SweepEntry {
  double fraction = 1.0;
  EvalReport report;
};

/// zap_hpo retrained on meta-train matrices thinned to each fraction; the
/// held-out rows are never thinned.
inline std::vector<SweepEntry> sparsity_sweep(const MetaDataset& md, std::span<const double> fractions,
                                              std::span<const FoldSpec> folds, std::span<const std::uint64_t> seeds,
                                              EvalOptions opts = {}) {
  for (auto f : fractions)
    if (!(f > 0.0 && f <= 1.0)) throw ValidationError("sparsity fractions must lie in (0,1]");
  std::vector<SweepEntry> out;
  for (auto f : fractions) {
    opts.keep_fraction = f;
    out.push_back({f, evaluate_method(Method::zap_hpo, md, folds, seeds, opts)});
  }
  return out;
}

/// Per-seed, per-dataset ALC for each report, in the layout average_ranks
/// expects. All reports must cover the same seeds and datasets.
inline std::vector<std::vector<std::vector<double>>> alc_by_seed(std::span<const EvalReport> reports) {
  if (reports.empty()) throw ValidationError("no reports");
  const auto& seeds = reports.front().seeds;
  std::vector<std::vector<std::vector<double>>> out;
  for (auto s : seeds) {
    std::map<std::pair<std::size_t, std::string>, std::vector<double>> rows;
    for (std::size_t k = 0; k < reports.size(); ++k)
      for (const auto& r : reports[k].records)
        if (r.seed == s) {
          auto& row = rows[{r.fold, r.dataset_id}];
          row.resize(reports.size(), std::numeric_limits<double>::quiet_NaN());
          row[k] = r.alc;
        }
    std::vector<std::vector<double>> seed_rows;
    for (auto& [key, row] : rows) seed_rows.push_back(std::move(row));
    out.push_back(std::move(seed_rows));
  }
  return out;
}

inline RankTable rank_reports(std::span<const EvalReport> reports) {
  std::vector<std::string> names;
  for (const auto& r : reports) names.push_back(to_string(r.method));
  return average_ranks(alc_by_seed(reports), std::move(names));
}

struct SummaryRow {
  std::string method;
  double mean_regret = 0.0;
  double std_regret = 0.0;
  double mean_rank = 0.0;
  double std_rank = 0.0;
};

inline std::vector<SummaryRow> summarize(std::span<const EvalReport> reports) {
  const auto ranks = rank_reports(reports);
  std::vector<SummaryRow> out;
  for (std::size_t k = 0; k < reports.size(); ++k)
    out.push_back({to_string(reports[k].method), reports[k].mean_regret(), reports[k].std_regret(),
                   ranks.mean_rank[k], ranks.std_rank[k]});
  return out;
}

struct PairwiseTest {
  std::string a;
  std::string b;
  std::optional<double> statistic;
  std::optional<double> p_raw;
  std::optional<double> p_holm;
};

/// Signed-rank tests between every pair of methods on per-dataset ALC
/// averaged over seeds, Holm-adjusted across the pairs that could be tested.
inline std::vector<PairwiseTest> pairwise_significance(std::span<const EvalReport> reports) {
  const auto by_seed = alc_by_seed(reports);
  const std::size_t n_rows = by_seed.front().size();
  std::vector<std::vector<double>> avg(reports.size(), std::vector<double>(n_rows, 0.0));
  for (const auto& seed : by_seed)
    for (std::size_t d = 0; d < n_rows; ++d)
      for (std::size_t k = 0; k < reports.size(); ++k) avg[k][d] += seed[d][k] / static_cast<double>(by_seed.size());

  std::vector<PairwiseTest> out;
  std::vector<double> raw;
  std::vector<std::size_t> tested;
  for (std::size_t i = 0; i < reports.size(); ++i)
    for (std::size_t j = i + 1; j < reports.size(); ++j) {
      PairwiseTest t{to_string(reports[i].method), to_string(reports[j].method), {}, {}, {}};
      try {
        const auto w = wilcoxon_signed_rank(avg[i], avg[j]);
        t.statistic = w.statistic;
        t.p_raw = w.p_value;
        raw.push_back(w.p_value);
        tested.push_back(out.size());
      } catch (const ValidationError&) {
        // fewer than five datasets differ; left untested
      }
      out.push_back(std::move(t));
    }
  const auto adj = holm_correction(raw);
  for (std::size_t k = 0; k < tested.size(); ++k) out[tested[k]].p_holm = adj[k];
  return out;
}

}  // namespace zap
