#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "zap/error.hpp"
#include "zap/meta_dataset.hpp"
#include "zap/pipeline_space.hpp"
#include "zap/random.hpp"

namespace zap {

enum class Objective { ranking_bounded, ranking_literal, least_squares };

inline std::string to_string(Objective o) {
  switch (o) {
    case Objective::ranking_bounded: return "ranking_bounded";
    case Objective::ranking_literal: return "ranking_literal";
    case Objective::least_squares: return "least_squares";
  }
  return "unknown";
}

inline Objective objective_from_string(const std::string& s) {
  if (s == "ranking_bounded" || s == "ranking") return Objective::ranking_bounded;
  if (s == "ranking_literal") return Objective::ranking_literal;
  if (s == "least_squares") return Objective::least_squares;
  throw ValidationError("unknown objective '" + s + "'");
}

inline bool is_ranking(Objective o) { return o != Objective::least_squares; }

struct TrainConfig {
  std::vector<std::size_t> hidden = {128, 128};
  double learning_rate = 1e-3;
  std::size_t triples_per_step = 64;  // also the cell batch size for least squares
  std::size_t steps = 600;
  std::uint64_t seed = 0;
  Objective objective = Objective::ranking_bounded;
  double weight_decay = 1e-5;

  void validate() const {
    if (hidden.empty()) throw ValidationError("at least one hidden layer is required");
    for (auto h : hidden)
      if (h == 0) throw ValidationError("hidden layer sizes must be positive");
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
    if (triples_per_step == 0) throw ValidationError("triples per step must be positive");
    if (steps == 0) throw ValidationError("steps must be positive");
    if (!(weight_decay >= 0.0)) throw ValidationError("weight decay must be >= 0");
  }
};

// (dataset, better pipeline, worse pipeline): cost(better) < cost(worse).
struct Triple {
  std::uint32_t dataset = 0;
  std::uint32_t better = 0;
  std::uint32_t worse = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

// One observed cell with its regression target in cost orientation.
struct Cell {
  std::uint32_t dataset = 0;
  std::uint32_t pipeline = 0;
  double cost = 0.0;
};

/// Every strictly ordered observed pair, per dataset. Ties yield nothing.
inline std::vector<Triple> build_triples(const CostMatrix& m) {
  std::vector<Triple> out;
  std::vector<std::pair<std::uint32_t, double>> row;
  for (std::size_t d = 0; d < m.n_datasets(); ++d) {
    row.clear();
    for (std::size_t p = 0; p < m.n_pipelines(); ++p)
      if (auto v = m.alc(d, p)) row.emplace_back(static_cast<std::uint32_t>(p), cost_from_alc(*v));
    for (std::size_t a = 0; a < row.size(); ++a)
      for (std::size_t b = 0; b < row.size(); ++b)
        if (row[a].second < row[b].second)
          out.push_back({static_cast<std::uint32_t>(d), row[a].first, row[b].first});
  }
  return out;
}

inline std::vector<Cell> observed_cells(const CostMatrix& m) {
  std::vector<Cell> out;
  for (std::size_t d = 0; d < m.n_datasets(); ++d)
    for (std::size_t p = 0; p < m.n_pipelines(); ++p)
      if (auto v = m.alc(d, p))
        out.push_back({static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(p), cost_from_alc(*v)});
  return out;
}

/// Draws triples uniformly from the full triple set without materializing
/// it: a dataset is picked with probability proportional to its number of
/// ordered pairs, then an untied pair of its observed cells uniformly.
class TripleSampler {
 public:
  explicit TripleSampler(const CostMatrix& m) {
    rows_.resize(m.n_datasets());
    std::vector<double> weights(m.n_datasets(), 0.0);
    for (std::size_t d = 0; d < m.n_datasets(); ++d) {
      auto& row = rows_[d];
      for (std::size_t p = 0; p < m.n_pipelines(); ++p)
        if (auto v = m.alc(d, p)) row.push_back({static_cast<std::uint32_t>(p), cost_from_alc(*v)});
      weights[d] = static_cast<double>(count_ordered_pairs(row));
      total_ += static_cast<std::size_t>(weights[d]);
    }
    if (total_ > 0) pick_row_ = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
  }

  // |E|
  std::size_t size() const { return total_; }

  Triple operator()(Rng& rng) {
    const auto d = pick_row_(rng);
    const auto& row = rows_[d];
    std::uniform_int_distribution<std::size_t> first(0, row.size() - 1);
    std::uniform_int_distribution<std::size_t> second(0, row.size() - 2);
    while (true) {
      const auto a = first(rng);
      auto b = second(rng);
      if (b >= a) ++b;
      if (row[a].cost == row[b].cost) continue;
      const bool a_better = row[a].cost < row[b].cost;
      return {static_cast<std::uint32_t>(d), a_better ? row[a].pipeline : row[b].pipeline,
              a_better ? row[b].pipeline : row[a].pipeline};
    }
  }

 private:
  struct Entry {
    std::uint32_t pipeline;
    double cost;
  };

  static std::size_t count_ordered_pairs(const std::vector<Entry>& row) {
    std::vector<double> costs;
    for (const auto& e : row) costs.push_back(e.cost);
    std::sort(costs.begin(), costs.end());
    const std::size_t n = costs.size();
    std::size_t pairs = n * (n - (n > 0 ? 1 : 0)) / 2;
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j < n && costs[j] == costs[i]) ++j;
      pairs -= (j - i) * (j - i - 1) / 2;
      i = j;
    }
    return pairs;
  }

  std::vector<std::vector<Entry>> rows_;
  std::discrete_distribution<std::size_t> pick_row_;
  std::size_t total_ = 0;
};

/// Fully connected ReLU network with a scalar output. weights[l] maps layer l
/// to layer l+1 (rows = outputs), so layer_sizes = {in, h1, ..., 1}.
template <typename T>
struct BasicSurrogateParams {
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static BasicSurrogateParams zeros(std::span<const std::size_t> layer_sizes) {
    if (layer_sizes.size() < 2 || layer_sizes.back() != 1)
      throw ValidationError("layer sizes must run from the input dimension down to 1");
    BasicSurrogateParams p;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
      if (layer_sizes[l] == 0) throw ValidationError("layer sizes must be positive");
      p.weights.push_back(Matrix::Zero(static_cast<Eigen::Index>(layer_sizes[l + 1]),
                                       static_cast<Eigen::Index>(layer_sizes[l])));
      p.biases.push_back(Vector::Zero(static_cast<Eigen::Index>(layer_sizes[l + 1])));
    }
    return p;
  }

  // Fan-in scaled uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
  static BasicSurrogateParams init(std::span<const std::size_t> layer_sizes, std::uint64_t seed) {
    auto p = zeros(layer_sizes);
    auto rng = make_rng({seed, 0x1417});
    for (auto& w : p.weights) {
      const T limit = std::sqrt(T(6) / static_cast<T>(w.cols()));
      std::uniform_real_distribution<T> u(-limit, limit);
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
    }
    return p;
  }

  std::size_t n_layers() const { return weights.size(); }
  std::size_t input_dim() const { return weights.empty() ? 0 : static_cast<std::size_t>(weights.front().cols()); }

  std::vector<std::size_t> layer_sizes() const {
    std::vector<std::size_t> out;
    if (weights.empty()) return out;
    out.push_back(input_dim());
    for (const auto& w : weights) out.push_back(static_cast<std::size_t>(w.rows()));
    return out;
  }

  std::size_t n_parameters() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
      n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    return n;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l)
      if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    return true;
  }

  // Visits every scalar parameter in a fixed order (weights column-major,
  // then biases, layer by layer).
  template <typename F>
  void for_each(F&& f) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      for (Eigen::Index i = 0; i < weights[l].size(); ++i) f(weights[l].data()[i]);
      for (Eigen::Index i = 0; i < biases[l].size(); ++i) f(biases[l].data()[i]);
    }
  }

  BasicSurrogateParams& operator+=(const BasicSurrogateParams& o) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += o.weights[l];
      biases[l] += o.biases[l];
    }
    return *this;
  }

  T squared_norm() const {
    T s = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) s += weights[l].squaredNorm() + biases[l].squaredNorm();
    return s;
  }

  friend bool operator==(const BasicSurrogateParams& a, const BasicSurrogateParams& b) {
    if (a.weights.size() != b.weights.size()) return false;
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
      if (a.weights[l].rows() != b.weights[l].rows() || a.weights[l].cols() != b.weights[l].cols()) return false;
      if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
    }
    return true;
  }
};

using SurrogateParams = BasicSurrogateParams<double>;

/// Encoded inputs for one meta-train (or meta-test) problem: one meta vector
/// per cost-matrix row and one encoded vector per pipeline column.
template <typename T>
struct BasicSurrogateInputs {
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix pipelines;  // pipeline_dim x n_pipelines
  Matrix meta;       // meta_dim x n_datasets

  static BasicSurrogateInputs from(std::span<const PipelineVector> pipeline_vecs,
                                   std::span<const MetaVector> meta_vecs) {
    BasicSurrogateInputs in;
    const auto pd = pipeline_vecs.empty() ? 0 : pipeline_vecs.front().size();
    in.pipelines.resize(static_cast<Eigen::Index>(pd), static_cast<Eigen::Index>(pipeline_vecs.size()));
    for (std::size_t j = 0; j < pipeline_vecs.size(); ++j) {
      if (pipeline_vecs[j].size() != pd) throw ValidationError("pipeline vectors differ in length");
      for (std::size_t r = 0; r < pd; ++r)
        in.pipelines(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = static_cast<T>(pipeline_vecs[j][r]);
    }
    in.meta.resize(static_cast<Eigen::Index>(kMetaDim), static_cast<Eigen::Index>(meta_vecs.size()));
    for (std::size_t i = 0; i < meta_vecs.size(); ++i)
      for (std::size_t r = 0; r < kMetaDim; ++r)
        in.meta(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = static_cast<T>(meta_vecs[i][r]);
    return in;
  }

  std::size_t input_dim() const { return static_cast<std::size_t>(pipelines.rows() + meta.rows()); }
  std::size_t n_pipelines() const { return static_cast<std::size_t>(pipelines.cols()); }
  std::size_t n_datasets() const { return static_cast<std::size_t>(meta.cols()); }

  // Column c of the result is concat(pipeline[pipes[c]], meta[datasets[c]]).
  Matrix assemble(std::span<const std::uint32_t> datasets, std::span<const std::uint32_t> pipes) const {
    Matrix x(static_cast<Eigen::Index>(input_dim()), static_cast<Eigen::Index>(pipes.size()));
    const auto pd = pipelines.rows();
    for (std::size_t c = 0; c < pipes.size(); ++c) {
      const auto col = static_cast<Eigen::Index>(c);
      x.col(col).head(pd) = pipelines.col(static_cast<Eigen::Index>(pipes[c]));
      x.col(col).tail(meta.rows()) = meta.col(static_cast<Eigen::Index>(datasets[c]));
    }
    return x;
  }
};

using SurrogateInputs = BasicSurrogateInputs<double>;

namespace detail {

// Overflow-safe ln(1 + e^x).
template <typename T>
T softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Activations of every layer for a batch of input columns.
template <typename T>
struct ForwardTrace {
  using Matrix = typename BasicSurrogateParams<T>::Matrix;
  std::vector<Matrix> activations;  // activations[0] = inputs; back() = 1 x n scores
};

template <typename T>
ForwardTrace<T> forward_trace(const BasicSurrogateParams<T>& p, typename BasicSurrogateParams<T>::Matrix x) {
  if (static_cast<std::size_t>(x.rows()) != p.input_dim())
    throw ValidationError("input dimension " + std::to_string(x.rows()) + " does not match network input " +
                          std::to_string(p.input_dim()));
  ForwardTrace<T> tr;
  tr.activations.push_back(std::move(x));
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    typename BasicSurrogateParams<T>::Matrix z = p.weights[l] * tr.activations.back();
    z.colwise() += p.biases[l];
    if (l + 1 < p.n_layers()) z = z.cwiseMax(T(0));
    tr.activations.push_back(std::move(z));
  }
  return tr;
}

// Accumulates dLoss/dparams given dLoss/dscores (1 x n).
template <typename T>
BasicSurrogateParams<T> backward(const BasicSurrogateParams<T>& p, const ForwardTrace<T>& tr,
                                 typename BasicSurrogateParams<T>::Matrix upstream) {
  BasicSurrogateParams<T> g;
  g.weights.resize(p.n_layers());
  g.biases.resize(p.n_layers());
  for (std::size_t l = p.n_layers(); l-- > 0;) {
    // upstream is dLoss/dz_l here (ReLU mask already applied for hidden layers).
    g.weights[l].noalias() = upstream * tr.activations[l].transpose();
    g.biases[l] = upstream.rowwise().sum();
    if (l == 0) break;
    typename BasicSurrogateParams<T>::Matrix down = p.weights[l].transpose() * upstream;
    down.array() *= (tr.activations[l].array() > T(0)).template cast<T>();
    upstream = std::move(down);
  }
  return g;
}

template <typename T>
void add_weight_decay(const BasicSurrogateParams<T>& p, BasicSurrogateParams<T>& g, T& loss, double weight_decay) {
  if (weight_decay == 0.0) return;
  const T wd = static_cast<T>(weight_decay);
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    loss += wd / T(2) * p.weights[l].squaredNorm();
    g.weights[l] += wd * p.weights[l];
  }
}

inline void split_triples(std::span<const Triple> batch, std::vector<std::uint32_t>& datasets,
                   std::vector<std::uint32_t>& pipes) {
  datasets.clear();
  pipes.clear();
  for (const auto& t : batch) {
    datasets.push_back(t.dataset);
    datasets.push_back(t.dataset);
    pipes.push_back(t.better);
    pipes.push_back(t.worse);
  }
}

}  // namespace detail

/// Scalar score for one (pipeline, meta-features) pair. Lower means the
/// pipeline is predicted to be better.
template <typename T>
T forward(const BasicSurrogateParams<T>& p, std::span<const T> pipeline_vec, std::span<const T> meta_vec) {
  typename BasicSurrogateParams<T>::Matrix x(static_cast<Eigen::Index>(pipeline_vec.size() + meta_vec.size()), 1);
  for (std::size_t i = 0; i < pipeline_vec.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = pipeline_vec[i];
  for (std::size_t i = 0; i < meta_vec.size(); ++i)
    x(static_cast<Eigen::Index>(pipeline_vec.size() + i), 0) = meta_vec[i];
  return detail::forward_trace(p, std::move(x)).activations.back()(0, 0);
}

inline double forward(const SurrogateParams& p, const PipelineVector& pipeline_vec, const MetaVector& meta_vec) {
  return forward<double>(p, std::span<const double>(pipeline_vec), std::span<const double>(meta_vec));
}

// Scores for many input columns at once.
template <typename T>
std::vector<T> forward_columns(const BasicSurrogateParams<T>& p, typename BasicSurrogateParams<T>::Matrix x) {
  const auto tr = detail::forward_trace(p, std::move(x));
  const auto& s = tr.activations.back();
  return std::vector<T>(s.data(), s.data() + s.size());
}

template <typename T>
struct LossAndGradient {
  T loss = 0;
  BasicSurrogateParams<T> gradient;
};

/// Mean pairwise ranking loss over the batch. The bounded form is
/// softplus(f_better - f_worse); the literal form is ln sigmoid(f_better -
/// f_worse), which is unbounded below.
template <typename T>
LossAndGradient<T> ranking_loss_and_gradient(const BasicSurrogateParams<T>& p, const BasicSurrogateInputs<T>& in,
                                             std::span<const Triple> batch, Objective objective,
                                             double weight_decay = 0.0) {
  if (batch.empty()) throw ValidationError("ranking loss needs a non-empty batch");
  if (!is_ranking(objective)) throw ValidationError("ranking loss called with a regression objective");
  std::vector<std::uint32_t> datasets, pipes;
  detail::split_triples(batch, datasets, pipes);
  const auto tr = detail::forward_trace(p, in.assemble(datasets, pipes));
  const auto& s = tr.activations.back();
  const T n = static_cast<T>(batch.size());
  typename BasicSurrogateParams<T>::Matrix upstream(1, s.cols());
  LossAndGradient<T> out;
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const auto b = static_cast<Eigen::Index>(2 * t);
    const T diff = s(0, b) - s(0, b + 1);
    T dl_ddiff;
    if (objective == Objective::ranking_bounded) {
      out.loss += detail::softplus(diff) / n;
      dl_ddiff = detail::sigmoid(diff) / n;
    } else {
      out.loss -= detail::softplus(-diff) / n;
      dl_ddiff = detail::sigmoid(-diff) / n;
    }
    upstream(0, b) = dl_ddiff;
    upstream(0, b + 1) = -dl_ddiff;
  }
  out.gradient = detail::backward(p, tr, std::move(upstream));
  detail::add_weight_decay(p, out.gradient, out.loss, weight_decay);
  return out;
}

/// Mean squared error between scores and costs over the given cells.
template <typename T>
LossAndGradient<T> least_squares_loss_and_gradient(const BasicSurrogateParams<T>& p,
                                                   const BasicSurrogateInputs<T>& in, std::span<const Cell> cells,
                                                   double weight_decay = 0.0) {
  if (cells.empty()) throw ValidationError("least-squares loss needs a non-empty cell set");
  std::vector<std::uint32_t> datasets, pipes;
  for (const auto& c : cells) {
    datasets.push_back(c.dataset);
    pipes.push_back(c.pipeline);
  }
  const auto tr = detail::forward_trace(p, in.assemble(datasets, pipes));
  const auto& s = tr.activations.back();
  const T n = static_cast<T>(cells.size());
  typename BasicSurrogateParams<T>::Matrix upstream(1, s.cols());
  LossAndGradient<T> out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto i = static_cast<Eigen::Index>(c);
    const T r = s(0, i) - static_cast<T>(cells[c].cost);
    out.loss += r * r / n;
    upstream(0, i) = T(2) * r / n;
  }
  out.gradient = detail::backward(p, tr, std::move(upstream));
  detail::add_weight_decay(p, out.gradient, out.loss, weight_decay);
  return out;
}

template <typename T>
T ranking_loss(const BasicSurrogateParams<T>& p, const BasicSurrogateInputs<T>& in, std::span<const Triple> batch,
               Objective objective = Objective::ranking_bounded) {
  return ranking_loss_and_gradient(p, in, batch, objective).loss;
}

template <typename T>
T least_squares_loss(const BasicSurrogateParams<T>& p, const BasicSurrogateInputs<T>& in,
                     std::span<const Cell> cells) {
  return least_squares_loss_and_gradient(p, in, cells).loss;
}

struct TrainResult {
  SurrogateParams params;
  std::vector<double> loss_history;  // batch loss (without weight decay) per step
};

/// Checkpoint hook: called with the number of completed steps and the
/// current parameters.
using CheckpointFn = std::function<void(std::size_t, const SurrogateParams&)>;

/// Stochastic training with Adam (bias-corrected moments). Each step draws a
/// batch uniformly with replacement: triples for the ranking objectives,
/// observed cells for least squares.
inline TrainResult train(const CostMatrix& costs, const SurrogateInputs& in, const TrainConfig& cfg,
                         const CheckpointFn& on_checkpoint = {}, std::size_t checkpoint_every = 0) {
  cfg.validate();
  if (in.n_datasets() != costs.n_datasets() || in.n_pipelines() != costs.n_pipelines())
    throw ValidationError("encoded inputs do not match the cost matrix shape");

  std::vector<std::size_t> sizes = {in.input_dim()};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);

  std::optional<TripleSampler> triples;
  std::vector<Cell> cells;
  if (is_ranking(cfg.objective)) {
    triples.emplace(costs);
    if (triples->size() == 0) throw ValidationError("no triples: every dataset's observed costs are tied");
  } else {
    cells = observed_cells(costs);
    if (cells.empty()) throw ValidationError("no observed cells to regress on");
  }

  TrainResult out;
  out.params = SurrogateParams::init(sizes, cfg.seed);
  auto m = SurrogateParams::zeros(sizes);
  auto v = SurrogateParams::zeros(sizes);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  double beta1_t = 1.0, beta2_t = 1.0;

  auto rng = make_rng({cfg.seed, 0x7a1e});
  std::vector<Triple> triple_batch(cfg.triples_per_step);
  std::vector<Cell> cell_batch(cfg.triples_per_step);
  std::uniform_int_distribution<std::size_t> pick_cell(0, cells.empty() ? 0 : cells.size() - 1);
  out.loss_history.reserve(cfg.steps);

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    LossAndGradient<double> lg;
    if (triples) {
      for (auto& t : triple_batch) t = (*triples)(rng);
      lg = ranking_loss_and_gradient(out.params, in, triple_batch, cfg.objective, 0.0);
    } else {
      for (auto& c : cell_batch) c = cells[pick_cell(rng)];
      lg = least_squares_loss_and_gradient(out.params, in, cell_batch, 0.0);
    }
    out.loss_history.push_back(lg.loss);
    auto& g = lg.gradient;
    for (std::size_t l = 0; l < out.params.n_layers(); ++l) g.weights[l] += cfg.weight_decay * out.params.weights[l];

    beta1_t *= kBeta1;
    beta2_t *= kBeta2;
    const double lr_t = cfg.learning_rate * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t);
    auto update = [&](auto& param, auto& grad, auto& m1, auto& m2) {
      m1 = kBeta1 * m1 + (1.0 - kBeta1) * grad;
      m2 = kBeta2 * m2 + (1.0 - kBeta2) * grad.cwiseProduct(grad);
      param.array() -= lr_t * m1.array() / (m2.array().sqrt() + kEps);
    };
    for (std::size_t l = 0; l < out.params.n_layers(); ++l) {
      update(out.params.weights[l], g.weights[l], m.weights[l], v.weights[l]);
      update(out.params.biases[l], g.biases[l], m.biases[l], v.biases[l]);
    }
    if (on_checkpoint && checkpoint_every > 0 && step % checkpoint_every == 0) on_checkpoint(step, out.params);
  }
  if (!out.params.all_finite()) throw std::runtime_error("training diverged to non-finite parameters");
  return out;
}

/// Encodes every pipeline config against the space.
inline std::vector<PipelineVector> encode_all(std::span<const PipelineConfig> configs, const SearchSpace& space) {
  std::vector<PipelineVector> out;
  out.reserve(configs.size());
  for (const auto& c : configs) out.push_back(encode(c, space));
  return out;
}

inline std::vector<MetaVector> featurize_all(std::span<const DatasetMetaFeatures> meta, const FeatureStats& stats) {
  std::vector<MetaVector> out;
  out.reserve(meta.size());
  for (const auto& mf : meta) out.push_back(featurize(mf, stats));
  return out;
}

}  // namespace zap
