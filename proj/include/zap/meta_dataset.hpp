#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "zap/csv.hpp"
#include "zap/error.hpp"
#include "zap/random.hpp"

namespace zap {

// Counts cell reads per source row. Attach one to a CostMatrix to prove which
// rows a computation touched; row subsets made from an audited matrix keep
// reporting against the original row numbering.
class ReadAudit {
 public:
  explicit ReadAudit(std::size_t n_rows) : counts_(n_rows) {}

  void record(std::size_t row) const { counts_[row].fetch_add(1, std::memory_order_relaxed); }

  std::size_t reads(std::size_t row) const { return counts_[row].load(std::memory_order_relaxed); }

  std::size_t reads(std::span<const std::size_t> rows) const {
    std::size_t total = 0;
    for (auto r : rows) total += reads(r);
    return total;
  }

  std::size_t n_rows() const { return counts_.size(); }

 private:
  mutable std::vector<std::atomic<std::size_t>> counts_;
};

/// Datasets x pipelines grid of ALC scores with an observation mask.
///
/// Rows are datasets, columns are pipelines (the on-disk CSV layout). Storage
/// is shared and immutable, so copies and row subsets are cheap. Every value
/// or mask lookup goes through `observed`/`alc`, which report to the attached
/// ReadAudit when there is one.
class CostMatrix {
 public:
  CostMatrix() = default;

  CostMatrix(std::vector<std::string> dataset_ids, std::vector<std::string> pipeline_ids,
             std::vector<double> values, std::vector<std::uint8_t> observed) {
    auto s = std::make_shared<Storage>();
    s->dataset_ids = std::move(dataset_ids);
    s->pipeline_ids = std::move(pipeline_ids);
    s->values = std::move(values);
    s->observed = std::move(observed);
    const std::size_t cells = s->dataset_ids.size() * s->pipeline_ids.size();
    if (s->values.size() != cells || s->observed.size() != cells)
      throw ValidationError("cost matrix storage does not match its id axes");
    check_unique(s->dataset_ids, "dataset");
    check_unique(s->pipeline_ids, "pipeline");
    for (std::size_t c = 0; c < cells; ++c) {
      if (!s->observed[c]) {
        s->values[c] = 0.0;
        continue;
      }
      const double v = s->values[c];
      if (!(v >= 0.0 && v <= 1.0)) {
        const auto np = s->pipeline_ids.size();
        throw ValidationError("value out of [0,1] at dataset '" + s->dataset_ids[c / np] + "', pipeline '" +
                              s->pipeline_ids[c % np] + "'");
      }
    }
    source_rows_.resize(s->dataset_ids.size());
    std::iota(source_rows_.begin(), source_rows_.end(), std::size_t{0});
    storage_ = std::move(s);
  }

  // Dense constructor.
  CostMatrix(std::vector<std::string> dataset_ids, std::vector<std::string> pipeline_ids, std::vector<double> values)
      : CostMatrix(std::move(dataset_ids), std::move(pipeline_ids), values,
                   std::vector<std::uint8_t>(values.size(), 1)) {}

  std::size_t n_datasets() const { return storage_ ? storage_->dataset_ids.size() : 0; }
  std::size_t n_pipelines() const { return storage_ ? storage_->pipeline_ids.size() : 0; }
  const std::vector<std::string>& dataset_ids() const { return storage_->dataset_ids; }
  const std::vector<std::string>& pipeline_ids() const { return storage_->pipeline_ids; }

  bool observed(std::size_t dataset, std::size_t pipeline) const {
    touch(dataset);
    return storage_->observed[index(dataset, pipeline)] != 0;
  }

  std::optional<double> alc(std::size_t dataset, std::size_t pipeline) const {
    touch(dataset);
    const auto c = index(dataset, pipeline);
    if (!storage_->observed[c]) return std::nullopt;
    return storage_->values[c];
  }

  // Observed value or throw.
  double alc_at(std::size_t dataset, std::size_t pipeline) const {
    auto v = alc(dataset, pipeline);
    if (!v)
      throw ValidationError("cell (" + dataset_ids()[dataset] + ", " + pipeline_ids()[pipeline] +
                            ") is unobserved");
    return *v;
  }

  std::size_t n_observed() const {
    if (!storage_) return 0;
    return static_cast<std::size_t>(std::count(storage_->observed.begin(), storage_->observed.end(), 1));
  }

  bool dense() const { return n_observed() == n_datasets() * n_pipelines(); }

  std::optional<std::size_t> find_dataset(const std::string& id) const { return find(dataset_ids(), id); }
  std::optional<std::size_t> find_pipeline(const std::string& id) const { return find(pipeline_ids(), id); }

  // Row subset in the given order. Audit reporting keeps the original rows.
  CostMatrix select_rows(std::span<const std::size_t> rows) const {
    const auto np = n_pipelines();
    std::vector<std::string> ids;
    std::vector<double> values;
    std::vector<std::uint8_t> mask;
    std::vector<std::size_t> sources;
    for (auto r : rows) {
      if (r >= n_datasets()) throw std::out_of_range("row index out of range");
      ids.push_back(dataset_ids()[r]);
      sources.push_back(source_rows_[r]);
      for (std::size_t p = 0; p < np; ++p) {
        values.push_back(storage_->values[index(r, p)]);
        mask.push_back(storage_->observed[index(r, p)]);
      }
    }
    CostMatrix out(std::move(ids), pipeline_ids(), std::move(values), std::move(mask));
    out.source_rows_ = std::move(sources);
    out.audit_ = audit_;
    return out;
  }

  // Same values, new observation mask. The new mask may only hide cells.
  CostMatrix with_mask(std::vector<std::uint8_t> mask) const {
    if (mask.size() != storage_->observed.size()) throw ValidationError("mask shape mismatch");
    for (std::size_t c = 0; c < mask.size(); ++c)
      if (mask[c] && !storage_->observed[c]) throw ValidationError("mask would reveal an unobserved cell");
    CostMatrix out(dataset_ids(), pipeline_ids(), storage_->values, std::move(mask));
    out.source_rows_ = source_rows_;
    out.audit_ = audit_;
    return out;
  }

  CostMatrix with_audit(std::shared_ptr<const ReadAudit> audit) const {
    CostMatrix out = *this;
    out.audit_ = std::move(audit);
    return out;
  }

  // Raw mask without audit bookkeeping; for structural bookkeeping such as
  // counting kept cells, never for fitting.
  const std::vector<std::uint8_t>& mask() const { return storage_->observed; }

 private:
  struct Storage {
    std::vector<std::string> dataset_ids;
    std::vector<std::string> pipeline_ids;
    std::vector<double> values;
    std::vector<std::uint8_t> observed;
  };

  static void check_unique(const std::vector<std::string>& ids, const char* axis) {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
      if (!seen.insert(id).second) throw ValidationError(std::string("duplicate ") + axis + " id '" + id + "'");
  }

  static std::optional<std::size_t> find(const std::vector<std::string>& ids, const std::string& id) {
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) return std::nullopt;
    return static_cast<std::size_t>(it - ids.begin());
  }

  std::size_t index(std::size_t dataset, std::size_t pipeline) const {
    if (dataset >= n_datasets() || pipeline >= n_pipelines()) throw std::out_of_range("cell index out of range");
    return dataset * n_pipelines() + pipeline;
  }

  void touch(std::size_t dataset) const {
    if (audit_) audit_->record(source_rows_[dataset]);
  }

  std::shared_ptr<const Storage> storage_;
  std::vector<std::size_t> source_rows_;
  std::shared_ptr<const ReadAudit> audit_;
};

// Higher ALC is better; the ranking and regression objectives work on costs.
inline double cost_from_alc(double alc) {
  if (!(alc >= 0.0 && alc <= 1.0)) throw ValidationError("ALC value out of [0,1]");
  return 1.0 - alc;
}

inline CostMatrix load_cost_matrix(const std::string& path) {
  const auto rows = csv::read_rows(path);
  if (rows.empty()) throw ParseError(path + ": empty cost matrix file");
  const auto& header = rows.front();
  if (header.size() < 2 || header[0] != "dataset_id")
    throw ParseError(path + ": header must start with 'dataset_id' followed by pipeline ids");
  std::vector<std::string> pipelines(header.begin() + 1, header.end());
  std::vector<std::string> datasets;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size())
      throw ParseError(path + ": row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                       " cells, expected " + std::to_string(header.size()));
    datasets.push_back(row[0]);
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c].empty()) {
        values.push_back(0.0);
        mask.push_back(0);
        continue;
      }
      const std::string where = path + " row " + std::to_string(r + 1) + " column " + std::to_string(c + 1) +
                                " (" + row[0] + ", " + header[c] + ")";
      const double v = csv::parse_double(row[c], where);
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("value out of [0,1] at " + where);
      values.push_back(v);
      mask.push_back(1);
    }
  }
  return CostMatrix(std::move(datasets), std::move(pipelines), std::move(values), std::move(mask));
}

inline void save_cost_matrix(const CostMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "dataset_id";
  for (const auto& id : m.pipeline_ids()) out << ',' << id;
  out << '\n';
  for (std::size_t d = 0; d < m.n_datasets(); ++d) {
    out << m.dataset_ids()[d];
    for (std::size_t p = 0; p < m.n_pipelines(); ++p) {
      out << ',';
      if (auto v = m.alc(d, p)) out << csv::fixed6(*v);
    }
    out << '\n';
  }
}

/// Keeps floor(keep_fraction * observed) cells, drawn uniformly without
/// replacement from the currently observed ones.
inline CostMatrix sparsify(const CostMatrix& m, double keep_fraction, std::uint64_t seed) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ValidationError("keep_fraction must lie in (0,1]");
  const auto& mask = m.mask();
  std::vector<std::size_t> cells;
  for (std::size_t c = 0; c < mask.size(); ++c)
    if (mask[c]) cells.push_back(c);
  const auto keep = static_cast<std::size_t>(std::floor(keep_fraction * static_cast<double>(cells.size())));
  auto rng = make_rng({seed, 0x5ba45e});
  // Partial Fisher-Yates: the first `keep` slots become a uniform sample.
  for (std::size_t i = 0; i < keep && i + 1 < cells.size(); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, cells.size() - 1);
    std::swap(cells[i], cells[pick(rng)]);
  }
  std::vector<std::uint8_t> out(mask.size(), 0);
  for (std::size_t i = 0; i < keep; ++i) out[cells[i]] = 1;
  return m.with_mask(std::move(out));
}

struct DatasetMetaFeatures {
  std::string dataset_id;
  long long n_train_images = 1;
  int n_channels = 3;
  int resolution = -1;  // -1: varying across images
  int n_classes = 2;
  std::string group_id;

  bool varying_resolution() const { return resolution == -1; }
};

inline void validate(const DatasetMetaFeatures& mf) {
  const std::string who = "dataset '" + mf.dataset_id + "': ";
  if (mf.dataset_id.empty()) throw ValidationError("empty dataset_id");
  if (mf.n_train_images < 1) throw ValidationError(who + "n_train_images must be >= 1");
  if (mf.n_channels != 1 && mf.n_channels != 3) throw ValidationError(who + "n_channels must be 1 or 3");
  if (!(mf.resolution > 0 || mf.resolution == -1)) throw ValidationError(who + "resolution must be > 0 or -1");
  if (mf.n_classes < 2) throw ValidationError(who + "n_classes must be >= 2");
  if (mf.group_id.empty()) throw ValidationError(who + "missing group_id");
}

inline std::vector<DatasetMetaFeatures> load_meta_features(const std::string& path) {
  static const std::array<const char*, 6> kColumns = {"dataset_id", "n_train_images", "n_channels",
                                                      "resolution", "n_classes",      "group_id"};
  const auto rows = csv::read_rows(path);
  if (rows.empty()) throw ParseError(path + ": empty meta-features file");
  std::array<std::size_t, 6> col{};
  for (std::size_t k = 0; k < kColumns.size(); ++k) {
    auto it = std::find(rows[0].begin(), rows[0].end(), kColumns[k]);
    if (it == rows[0].end()) throw ParseError(path + ": missing column '" + kColumns[k] + "'");
    col[k] = static_cast<std::size_t>(it - rows[0].begin());
  }
  std::vector<DatasetMetaFeatures> out;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != rows[0].size())
      throw ParseError(path + ": row " + std::to_string(r + 1) + " has the wrong number of cells");
    auto where = [&](std::size_t k) { return path + " row " + std::to_string(r + 1) + " column " + kColumns[k]; };
    DatasetMetaFeatures mf;
    mf.dataset_id = row[col[0]];
    mf.n_train_images = csv::parse_int(row[col[1]], where(1));
    mf.n_channels = static_cast<int>(csv::parse_int(row[col[2]], where(2)));
    mf.resolution = static_cast<int>(csv::parse_int(row[col[3]], where(3)));
    mf.n_classes = static_cast<int>(csv::parse_int(row[col[4]], where(4)));
    mf.group_id = row[col[5]];
    validate(mf);
    if (!seen.insert(mf.dataset_id).second) throw ValidationError("duplicate dataset_id '" + mf.dataset_id + "'");
    out.push_back(std::move(mf));
  }
  return out;
}

inline void save_meta_features(std::span<const DatasetMetaFeatures> meta, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "dataset_id,n_train_images,n_channels,resolution,n_classes,group_id\n";
  for (const auto& mf : meta)
    out << mf.dataset_id << ',' << mf.n_train_images << ',' << mf.n_channels << ',' << mf.resolution << ','
        << mf.n_classes << ',' << mf.group_id << '\n';
}

// Meta-feature vector layout.
inline constexpr std::size_t kMetaDim = 5;
inline constexpr std::size_t kVaryingFlagSlot = 3;

using MetaVector = std::array<double, kMetaDim>;

// [ln n_train, n_channels, ln max(resolution,1), varying flag, ln n_classes]
inline MetaVector raw_meta_vector(const DatasetMetaFeatures& mf) {
  return {std::log(static_cast<double>(mf.n_train_images)), static_cast<double>(mf.n_channels),
          std::log(static_cast<double>(std::max(mf.resolution, 1))), mf.varying_resolution() ? 1.0 : 0.0,
          std::log(static_cast<double>(mf.n_classes))};
}

/// Per-dimension mean and (population) std of the raw meta vector, fitted on
/// meta-train datasets only. The varying-resolution flag is left as a raw
/// 0/1 indicator, so its slot carries mean 0 and std 1.
struct FeatureStats {
  MetaVector mean{};
  MetaVector std{1, 1, 1, 1, 1};

  static constexpr double kStdFloor = 1e-8;
};

inline FeatureStats fit_feature_stats(std::span<const DatasetMetaFeatures> meta) {
  if (meta.empty()) throw ValidationError("cannot fit feature stats on an empty set");
  FeatureStats s;
  const double n = static_cast<double>(meta.size());
  for (const auto& mf : meta) {
    const auto x = raw_meta_vector(mf);
    for (std::size_t k = 0; k < kMetaDim; ++k) s.mean[k] += x[k] / n;
  }
  MetaVector var{};
  for (const auto& mf : meta) {
    const auto x = raw_meta_vector(mf);
    for (std::size_t k = 0; k < kMetaDim; ++k) var[k] += (x[k] - s.mean[k]) * (x[k] - s.mean[k]) / n;
  }
  for (std::size_t k = 0; k < kMetaDim; ++k) s.std[k] = std::max(std::sqrt(var[k]), FeatureStats::kStdFloor);
  s.mean[kVaryingFlagSlot] = 0.0;
  s.std[kVaryingFlagSlot] = 1.0;
  return s;
}

inline MetaVector featurize(const DatasetMetaFeatures& mf, const FeatureStats& stats) {
  auto x = raw_meta_vector(mf);
  for (std::size_t k = 0; k < kMetaDim; ++k) x[k] = (x[k] - stats.mean[k]) / stats.std[k];
  return x;
}

}  // namespace zap
