#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "zap/error.hpp"
#include "zap/meta_dataset.hpp"
#include "zap/pipeline_space.hpp"
#include "zap/random.hpp"

namespace zap {

struct SyntheticSpec {
  std::size_t n_groups = 20;
  std::size_t variants_per_group = 5;
  std::size_t n_pipelines = 100;
  std::size_t latent_rank = 4;
  double noise_std = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_groups < 1 || variants_per_group < 1 || n_pipelines < 1 || latent_rank < 1)
      throw ValidationError("synthetic spec counts must be >= 1");
    if (!(noise_std >= 0.0)) throw ValidationError("noise_std must be >= 0");
  }
};

/// The planted model behind a synthetic cost matrix:
///   ALC(i, j) = clip01(sigmoid(u_i . v_j + b_i + c_j) + noise).
struct LatentModel {
  std::vector<std::vector<double>> dataset_factors;   // u_i, one per cost-matrix row
  std::vector<std::vector<double>> group_factors;     // shared core of each group
  std::vector<std::vector<double>> pipeline_factors;  // v_j
  std::vector<double> dataset_bias;                   // b_i
  std::vector<double> pipeline_bias;                  // c_j
  double variant_radius = 0.0;  // sup-norm bound of u_i minus its group core

  double logit(std::size_t i, std::size_t j) const {
    double s = dataset_bias[i] + pipeline_bias[j];
    for (std::size_t r = 0; r < dataset_factors[i].size(); ++r) s += dataset_factors[i][r] * pipeline_factors[j][r];
    return s;
  }

  double expected_alc(std::size_t i, std::size_t j) const { return 1.0 / (1.0 + std::exp(-logit(i, j))); }
};

struct SyntheticMetaDataset {
  CostMatrix costs;
  std::vector<DatasetMetaFeatures> meta;  // aligned with cost-matrix rows
  std::vector<PipelineConfig> pipelines;  // aligned with cost-matrix columns
  LatentModel latent;
};

namespace detail {

inline std::string padded_id(char prefix, std::size_t i, std::size_t count) {
  const int width = std::max(2, static_cast<int>(std::to_string(count > 0 ? count - 1 : 0).size()));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
  return buf;
}

// Standardizes each column of rows x cols data to zero mean, unit std.
inline void standardize_columns(std::vector<std::vector<double>>& rows) {
  if (rows.size() < 2) return;
  const auto cols = rows.front().size();
  for (std::size_t c = 0; c < cols; ++c) {
    double mean = 0.0, sq = 0.0;
    for (const auto& r : rows) mean += r[c];
    mean /= static_cast<double>(rows.size());
    for (const auto& r : rows) sq += (r[c] - mean) * (r[c] - mean);
    const double sd = std::sqrt(sq / static_cast<double>(rows.size()));
    for (auto& r : rows) r[c] = sd > 1e-12 ? (r[c] - mean) / sd : 0.0;
  }
}

}  // namespace detail

/// Desk-scale stand-in for a real pipelines x datasets benchmark. Groups play
/// the role of core datasets; their variants share channels and resolution
/// and differ in class count and training-set size.
///
/// Dataset factors are group cores (driven by the group's image format plus
/// a hidden group effect) perturbed by a bounded function of the variant's
/// size and class count, so meta-features explain most of the structure.
/// Pipeline factors are a random linear projection of the encoded config.
inline SyntheticMetaDataset generate_synthetic(const SyntheticSpec& spec,
                                               const SearchSpace& space = default_space()) {
  spec.validate();
  constexpr double kInteraction = 1.6;  // scale of u . v
  constexpr double kPipelineBias = 0.5;
  constexpr double kGroupNoise = 0.35;
  constexpr double kVariantRadius = 0.6;
  static constexpr std::array<int, 8> kResolutions = {28, 32, 48, 64, 96, 128, 160, 224};

  const std::size_t rank = spec.latent_rank;
  auto rng = make_rng({spec.seed, 0x5e7});
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticMetaDataset out;
  auto& lm = out.latent;
  lm.variant_radius = kVariantRadius;

  // Pipelines.
  std::vector<std::string> pipeline_ids;
  std::vector<PipelineVector> encoded;
  for (std::size_t j = 0; j < spec.n_pipelines; ++j) {
    out.pipelines.push_back(sample(space, derive_seed({spec.seed, 0xc0f, j})));
    encoded.push_back(encode(out.pipelines.back(), space));
    pipeline_ids.push_back(detail::padded_id('p', j, spec.n_pipelines));
  }
  const std::size_t dim = space.vector_length();
  std::vector<std::vector<double>> projection(rank + 1, std::vector<double>(dim));
  for (auto& row : projection)
    for (auto& x : row) x = gauss(rng);
  std::vector<std::vector<double>> pipe_feats(spec.n_pipelines, std::vector<double>(rank + 1, 0.0));
  for (std::size_t j = 0; j < spec.n_pipelines; ++j)
    for (std::size_t r = 0; r <= rank; ++r)
      for (std::size_t k = 0; k < dim; ++k) pipe_feats[j][r] += projection[r][k] * encoded[j][k];
  detail::standardize_columns(pipe_feats);
  for (std::size_t j = 0; j < spec.n_pipelines; ++j) {
    lm.pipeline_factors.emplace_back(pipe_feats[j].begin(), pipe_feats[j].begin() + static_cast<std::ptrdiff_t>(rank));
    lm.pipeline_bias.push_back(kPipelineBias * pipe_feats[j][rank]);
  }

  // Feature-to-factor maps: group format features -> core, variant size
  // features -> bounded perturbation.
  const double scale = kInteraction / std::sqrt(static_cast<double>(rank));
  std::vector<std::array<double, 3>> format_map(rank);
  std::vector<std::array<double, 2>> variant_map(rank);
  for (auto& a : format_map)
    for (auto& x : a) x = gauss(rng) / std::sqrt(3.0);
  for (auto& a : variant_map)
    for (auto& x : a) x = gauss(rng);

  std::vector<std::string> dataset_ids;
  for (std::size_t g = 0; g < spec.n_groups; ++g) {
    const auto group_id = detail::padded_id('g', g, spec.n_groups);
    const int channels = unit(rng) < 0.6 ? 3 : 1;
    const bool varying = unit(rng) < 0.15;
    const int resolution =
        varying ? -1 : kResolutions[std::min(kResolutions.size() - 1, static_cast<std::size_t>(unit(rng) * 8.0))];
    const double log_res = std::log(varying ? 160.0 : static_cast<double>(resolution));
    const std::array<double, 3> format = {channels == 3 ? 1.0 : -1.0, (log_res - 4.3) / 0.7, varying ? 1.0 : 0.0};

    std::vector<double> core(rank);
    for (std::size_t r = 0; r < rank; ++r) {
      double s = kGroupNoise * gauss(rng);
      for (std::size_t k = 0; k < 3; ++k) s += format_map[r][k] * format[k];
      core[r] = s;
    }
    lm.group_factors.push_back(core);

    for (std::size_t v = 0; v < spec.variants_per_group; ++v) {
      DatasetMetaFeatures mf;
      mf.dataset_id = group_id + "_v" + std::to_string(v);
      mf.group_id = group_id;
      mf.n_channels = channels;
      mf.resolution = resolution;
      mf.n_classes = static_cast<int>(std::lround(std::exp(std::log(2.0) + unit(rng) * (std::log(100.0) - std::log(2.0)))));
      const double per_class = std::exp(std::log(20.0) + unit(rng) * (std::log(1000.0) - std::log(20.0)));
      mf.n_train_images = std::clamp<long long>(std::llround(per_class * mf.n_classes), 20, 100000);

      const double z_size = (std::log(static_cast<double>(mf.n_train_images)) - 8.0) / 1.5;
      const double z_classes = (std::log(static_cast<double>(mf.n_classes)) - 2.6) / 1.1;
      std::vector<double> u(rank);
      for (std::size_t r = 0; r < rank; ++r)
        u[r] = core[r] + kVariantRadius * std::tanh(variant_map[r][0] * z_size + variant_map[r][1] * z_classes);
      lm.dataset_factors.push_back(u);
      lm.dataset_bias.push_back(-0.4 * z_classes + 0.2 * z_size + 0.1 * gauss(rng));
      dataset_ids.push_back(mf.dataset_id);
      out.meta.push_back(std::move(mf));
    }
  }
  // Fold the interaction scale into the pipeline side so u_i keep their
  // group-core geometry (and the perturbation bound) verbatim.
  for (auto& vj : lm.pipeline_factors)
    for (auto& x : vj) x *= scale;

  const std::size_t n_datasets = dataset_ids.size();
  std::vector<double> values(n_datasets * spec.n_pipelines);
  std::normal_distribution<double> noise(0.0, spec.noise_std > 0 ? spec.noise_std : 1.0);
  for (std::size_t i = 0; i < n_datasets; ++i)
    for (std::size_t j = 0; j < spec.n_pipelines; ++j) {
      double a = lm.expected_alc(i, j);
      if (spec.noise_std > 0) a += noise(rng);
      values[i * spec.n_pipelines + j] = std::clamp(a, 0.0, 1.0);
    }
  out.costs = CostMatrix(std::move(dataset_ids), std::move(pipeline_ids), std::move(values));
  return out;
}

}  // namespace zap
