#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "zap/error.hpp"
#include "zap/random.hpp"

namespace zap {

enum class ParamKind { integer, real, categorical };
enum class ParamScale { linear, log };

// Active iff `parent` currently takes one of `values`.
struct Condition {
  std::string parent;
  std::vector<std::string> values;
};

struct HyperparameterSpec {
  std::string name;
  ParamKind kind = ParamKind::real;
  ParamScale scale = ParamScale::linear;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::string> categories;
  std::optional<Condition> condition;

  bool numeric() const { return kind != ParamKind::categorical; }
  // Width of this parameter's block in the encoded vector.
  std::size_t width() const { return numeric() ? 1 : categories.size(); }
};

using ParamValue = std::variant<long long, double, std::string>;
using PipelineConfig = std::map<std::string, ParamValue>;
using PipelineVector = std::vector<double>;

inline HyperparameterSpec int_param(std::string name, double lo, double hi, ParamScale scale = ParamScale::linear) {
  return {std::move(name), ParamKind::integer, scale, lo, hi, {}, std::nullopt};
}
inline HyperparameterSpec real_param(std::string name, double lo, double hi, ParamScale scale = ParamScale::linear) {
  return {std::move(name), ParamKind::real, scale, lo, hi, {}, std::nullopt};
}
inline HyperparameterSpec cat_param(std::string name, std::vector<std::string> categories,
                                    std::optional<Condition> condition = std::nullopt) {
  return {std::move(name), ParamKind::categorical, ParamScale::linear, 0.0, 0.0, std::move(categories),
          std::move(condition)};
}

/// An ordered list of hyperparameters. Parents precede their conditional
/// children, which `validate` and `sample` rely on.
class SearchSpace {
 public:
  SearchSpace() = default;

  explicit SearchSpace(std::vector<HyperparameterSpec> specs) : specs_(std::move(specs)) {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      const auto& s = specs_[i];
      if (s.numeric()) {
        if (!(s.lo < s.hi)) throw ValidationError(s.name + ": lo must be < hi");
        if (s.scale == ParamScale::log && !(s.lo > 0.0)) throw ValidationError(s.name + ": log scale needs lo > 0");
      } else {
        if (s.categories.empty()) throw ValidationError(s.name + ": empty category list");
        auto sorted = s.categories;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
          throw ValidationError(s.name + ": duplicate category");
      }
      if (s.condition) {
        auto parent = index_of(s.condition->parent);
        if (!parent || *parent >= i) throw ValidationError(s.name + ": condition parent must precede it");
      }
      for (std::size_t j = 0; j < i; ++j)
        if (specs_[j].name == s.name) throw ValidationError("duplicate hyperparameter '" + s.name + "'");
    }
  }

  const std::vector<HyperparameterSpec>& specs() const { return specs_; }
  std::size_t size() const { return specs_.size(); }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t i = 0; i < specs_.size(); ++i)
      if (specs_[i].name == name) return i;
    return std::nullopt;
  }

  const HyperparameterSpec& at(const std::string& name) const {
    auto i = index_of(name);
    if (!i) throw ValidationError("unknown hyperparameter '" + name + "'");
    return specs_[*i];
  }

  std::size_t vector_length() const {
    std::size_t n = 0;
    for (const auto& s : specs_) n += s.width();
    return n;
  }

  // Offset of each parameter's block in the encoded vector.
  std::vector<std::size_t> offsets() const {
    std::vector<std::size_t> out;
    std::size_t n = 0;
    for (const auto& s : specs_) {
      out.push_back(n);
      n += s.width();
    }
    return out;
  }

  bool is_active(const HyperparameterSpec& s, const PipelineConfig& c) const {
    if (!s.condition) return true;
    const auto& parent = at(s.condition->parent);
    if (!is_active(parent, c)) return false;
    auto it = c.find(parent.name);
    if (it == c.end()) return false;
    const auto* v = std::get_if<std::string>(&it->second);
    return v && std::find(s.condition->values.begin(), s.condition->values.end(), *v) != s.condition->values.end();
  }

 private:
  std::vector<HyperparameterSpec> specs_;
};

/// The 26-parameter fine-tuning pipeline space: general DL and fine-tuning
/// parameters first, then the online evaluation and early-stopping schedule.
inline SearchSpace default_space() {
  const auto log = ParamScale::log;
  const std::vector<std::string> flags = {"true", "false"};
  return SearchSpace({
      int_param("batch_size", 16, 64, log),
      real_param("learning_rate", 1e-5, 1e-1, log),
      real_param("min_learning_rate", 1e-8, 1e-5, log),
      real_param("weight_decay", 1e-5, 1e-2, log),
      cat_param("optimizer", {"SGD", "Adam", "AdamW"}),
      {"momentum", ParamKind::real, ParamScale::linear, 0.01, 0.99, {}, Condition{"optimizer", {"SGD"}}},
      cat_param("nesterov", flags, Condition{"optimizer", {"SGD"}}),
      cat_param("amsgrad", flags, Condition{"optimizer", {"Adam", "AdamW"}}),
      cat_param("scheduler", {"plateau", "cosine"}),
      cat_param("freeze_portion", {"0.0", "0.1", "0.2", "0.3", "0.4", "0.5"}),
      cat_param("warmup_multiplier", {"1.0", "1.5", "2.0", "2.5", "3.0"}),
      int_param("warmup_epoch", 3, 6),
      cat_param("architecture", {"ResNet18", "EffNet-b0", "EffNet-b1", "EffNet-b2"}),
      int_param("steps_per_epoch", 5, 250, log),
      int_param("early_epoch", 1, 3),
      real_param("cv_ratio", 0.05, 0.2),
      int_param("max_valid_count", 128, 512, log),
      real_param("skip_valid_threshold", 0.7, 0.95),
      int_param("test_freq", 1, 3),
      int_param("test_freq_max", 60, 120),
      int_param("test_freq_step", 2, 10),
      real_param("max_inner_loop", 0.1, 0.3),
      int_param("n_init_samples", 128, 512, log),
      int_param("max_input_size", 5, 7),
      cat_param("first_simple_model", flags),
      cat_param("simple_model", {"SVC", "NuSVC", "RF", "LR"}, Condition{"first_simple_model", {"true"}}),
  });
}

struct Violation {
  std::string name;
  std::string message;
};

namespace detail {

inline std::optional<double> numeric_value(const ParamValue& v) {
  if (const auto* i = std::get_if<long long>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::nullopt;
}

inline std::string format_bound(double x) {
  if (x == std::floor(x) && std::abs(x) < 1e9) return std::to_string(static_cast<long long>(x));
  std::ostringstream os;
  os << x;
  return os.str();
}

}  // namespace detail

/// Empty result means the configuration is valid.
inline std::vector<Violation> validate(const PipelineConfig& c, const SearchSpace& space) {
  std::vector<Violation> out;
  for (const auto& [name, value] : c)
    if (!space.index_of(name)) out.push_back({name, "unknown hyperparameter"});
  for (const auto& s : space.specs()) {
    const bool active = space.is_active(s, c);
    auto it = c.find(s.name);
    if (!active) {
      if (it != c.end()) out.push_back({s.name, "inactive conditional present"});
      continue;
    }
    if (it == c.end()) {
      out.push_back({s.name, "missing active hyperparameter"});
      continue;
    }
    if (s.numeric()) {
      auto v = detail::numeric_value(it->second);
      if (!v) {
        out.push_back({s.name, "expected a number"});
        continue;
      }
      if (s.kind == ParamKind::integer && !std::holds_alternative<long long>(it->second) && *v != std::floor(*v)) {
        out.push_back({s.name, "expected an integer"});
        continue;
      }
      if (!(*v >= s.lo && *v <= s.hi))
        out.push_back({s.name, "out of range [" + detail::format_bound(s.lo) + "," + detail::format_bound(s.hi) + "]"});
    } else {
      const auto* v = std::get_if<std::string>(&it->second);
      if (!v) {
        out.push_back({s.name, "expected a category string"});
        continue;
      }
      if (std::find(s.categories.begin(), s.categories.end(), *v) == s.categories.end())
        out.push_back({s.name, "unknown category '" + *v + "'"});
    }
  }
  return out;
}

// Numeric slot mapping: linear (v-lo)/(hi-lo), log (ln v - ln lo)/(ln hi - ln lo).
inline double normalize_slot(const HyperparameterSpec& s, double v) {
  if (s.scale == ParamScale::log) return (std::log(v) - std::log(s.lo)) / (std::log(s.hi) - std::log(s.lo));
  return (v - s.lo) / (s.hi - s.lo);
}

inline double denormalize_slot(const HyperparameterSpec& s, double u) {
  if (s.scale == ParamScale::log) return std::exp(std::log(s.lo) + u * (std::log(s.hi) - std::log(s.lo)));
  return s.lo + u * (s.hi - s.lo);
}

/// One-hot block per categorical, one normalized slot per numeric. Inactive
/// conditionals encode as zeros.
inline PipelineVector encode(const PipelineConfig& c, const SearchSpace& space) {
  if (auto v = validate(c, space); !v.empty())
    throw ValidationError("cannot encode invalid config: " + v.front().name + " " + v.front().message);
  PipelineVector out(space.vector_length(), 0.0);
  std::size_t offset = 0;
  for (const auto& s : space.specs()) {
    auto it = c.find(s.name);
    if (it != c.end()) {
      if (s.numeric()) {
        out[offset] = normalize_slot(s, *detail::numeric_value(it->second));
      } else {
        const auto& cat = std::get<std::string>(it->second);
        const auto k = std::find(s.categories.begin(), s.categories.end(), cat) - s.categories.begin();
        out[offset + static_cast<std::size_t>(k)] = 1.0;
      }
    }
    offset += s.width();
  }
  return out;
}

/// Inverse of `encode` on vectors it produced.
inline PipelineConfig decode(const PipelineVector& x, const SearchSpace& space) {
  if (x.size() != space.vector_length()) throw ValidationError("vector length does not match the space");
  PipelineConfig out;
  std::size_t offset = 0;
  for (const auto& s : space.specs()) {
    if (space.is_active(s, out)) {
      if (s.numeric()) {
        const double v = denormalize_slot(s, x[offset]);
        if (s.kind == ParamKind::integer)
          out[s.name] = static_cast<long long>(std::llround(v));
        else
          out[s.name] = v;
      } else {
        const auto first = x.begin() + static_cast<std::ptrdiff_t>(offset);
        const auto k = std::max_element(first, first + static_cast<std::ptrdiff_t>(s.width())) - first;
        out[s.name] = s.categories[static_cast<std::size_t>(k)];
      }
    }
    offset += s.width();
  }
  return out;
}

/// Uniform over the encoded space: log-uniform for log-scale numerics (integer
/// draws rounded), uniform over categories, conditionals respected.
inline PipelineConfig sample(const SearchSpace& space, std::uint64_t seed) {
  auto rng = make_rng({seed, 0x5a3b1e});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PipelineConfig out;
  for (const auto& s : space.specs()) {
    // Draw for every parameter so later parameters do not shift with the
    // activity pattern of earlier ones.
    const double u = unit(rng);
    if (!space.is_active(s, out)) continue;
    switch (s.kind) {
      case ParamKind::real:
        out[s.name] = std::clamp(denormalize_slot(s, u), s.lo, s.hi);
        break;
      case ParamKind::integer:
        if (s.scale == ParamScale::log) {
          out[s.name] = static_cast<long long>(std::clamp(std::llround(denormalize_slot(s, u)),
                                                          static_cast<long long>(s.lo), static_cast<long long>(s.hi)));
        } else {
          const auto lo = static_cast<long long>(s.lo);
          const auto span = static_cast<long long>(s.hi) - lo + 1;
          out[s.name] = lo + std::min(static_cast<long long>(u * static_cast<double>(span)), span - 1);
        }
        break;
      case ParamKind::categorical: {
        const auto k = std::min(static_cast<std::size_t>(u * static_cast<double>(s.categories.size())),
                                s.categories.size() - 1);
        out[s.name] = s.categories[k];
        break;
      }
    }
  }
  return out;
}

}  // namespace zap
