#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "zap/pipeline_space.hpp"

namespace zap {
namespace {

PipelineConfig sgd_config() {
  return {{"batch_size", 32LL},
          {"learning_rate", 1e-3},
          {"min_learning_rate", 1e-6},
          {"weight_decay", 1e-4},
          {"optimizer", std::string("SGD")},
          {"momentum", 0.9},
          {"nesterov", std::string("true")},
          {"scheduler", std::string("cosine")},
          {"freeze_portion", std::string("0.2")},
          {"warmup_multiplier", std::string("2.0")},
          {"warmup_epoch", 4LL},
          {"architecture", std::string("ResNet18")},
          {"steps_per_epoch", 50LL},
          {"early_epoch", 2LL},
          {"cv_ratio", 0.1},
          {"max_valid_count", 256LL},
          {"skip_valid_threshold", 0.8},
          {"test_freq", 1LL},
          {"test_freq_max", 100LL},
          {"test_freq_step", 5LL},
          {"max_inner_loop", 0.2},
          {"n_init_samples", 256LL},
          {"max_input_size", 6LL},
          {"first_simple_model", std::string("false")}};
}

bool has_violation(const std::vector<Violation>& v, const std::string& name, const std::string& needle) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) {
    return x.name == name && x.message.find(needle) != std::string::npos;
  });
}

TEST(SearchSpace, VectorLengthIsCategoriesPlusNumerics) {
  const auto space = default_space();
  std::size_t cats = 0, numerics = 0;
  for (const auto& s : space.specs()) (s.numeric() ? numerics += 1 : cats += s.categories.size());
  EXPECT_EQ(cats, 30u);
  EXPECT_EQ(numerics, 17u);
  EXPECT_EQ(space.vector_length(), 47u);
  EXPECT_EQ(encode(sgd_config(), space).size(), 47u);
}

TEST(SearchSpace, RejectsChildBeforeParent) {
  EXPECT_THROW(SearchSpace({cat_param("child", {"a"}, Condition{"parent", {"x"}}), cat_param("parent", {"x", "y"})}),
               ValidationError);
  EXPECT_THROW(SearchSpace({real_param("a", 1.0, 1.0)}), ValidationError);
  EXPECT_THROW(SearchSpace({real_param("a", 0.0, 1.0, ParamScale::log)}), ValidationError);
  EXPECT_THROW(SearchSpace({cat_param("a", {"x", "x"})}), ValidationError);
}

TEST(Validate, AcceptsWellFormedConfig) { EXPECT_TRUE(validate(sgd_config(), default_space()).empty()); }

TEST(Validate, IntegerOutOfRange) {
  auto c = sgd_config();
  c["batch_size"] = 8LL;
  const auto v = validate(c, default_space());
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].name, "batch_size");
  EXPECT_EQ(v[0].message, "out of range [16,64]");
}

TEST(Validate, InactiveConditionalPresent) {
  auto c = sgd_config();
  c["optimizer"] = std::string("Adam");
  c["amsgrad"] = std::string("true");
  const auto v = validate(c, default_space());
  EXPECT_TRUE(has_violation(v, "momentum", "inactive conditional present"));
  EXPECT_TRUE(has_violation(v, "nesterov", "inactive conditional present"));
}

TEST(Validate, MissingActiveConditional) {
  auto c = sgd_config();
  c.erase("momentum");
  EXPECT_TRUE(has_violation(validate(c, default_space()), "momentum", "missing active hyperparameter"));
  c = sgd_config();
  c["first_simple_model"] = std::string("true");
  EXPECT_TRUE(has_violation(validate(c, default_space()), "simple_model", "missing active hyperparameter"));
}

TEST(Validate, TypeAndCategoryErrors) {
  auto c = sgd_config();
  c["learning_rate"] = std::string("fast");
  c["architecture"] = std::string("VGG");
  c["warmup_epoch"] = 4.5;
  c["bogus"] = 1LL;
  const auto v = validate(c, default_space());
  EXPECT_TRUE(has_violation(v, "learning_rate", "expected a number"));
  EXPECT_TRUE(has_violation(v, "architecture", "unknown category 'VGG'"));
  EXPECT_TRUE(has_violation(v, "warmup_epoch", "expected an integer"));
  EXPECT_TRUE(has_violation(v, "bogus", "unknown hyperparameter"));
}

TEST(Encode, OptimizerOneHot) {
  const auto space = default_space();
  const auto off = space.offsets()[*space.index_of("optimizer")];
  const auto x = encode(sgd_config(), space);
  EXPECT_EQ(x[off], 1.0);
  EXPECT_EQ(x[off + 1], 0.0);
  EXPECT_EQ(x[off + 2], 0.0);
}

TEST(Encode, LogScaleLearningRate) {
  const auto space = default_space();
  const auto slot = space.offsets()[*space.index_of("learning_rate")];
  auto c = sgd_config();
  c["learning_rate"] = 1e-5;
  EXPECT_NEAR(encode(c, space)[slot], 0.0, 1e-12);
  c["learning_rate"] = 1e-3;
  EXPECT_NEAR(encode(c, space)[slot], 0.5, 1e-12);
  c["learning_rate"] = 1e-1;
  EXPECT_NEAR(encode(c, space)[slot], 1.0, 1e-12);
}

TEST(Encode, InactiveBlocksAreZero) {
  const auto space = default_space();
  const auto x = encode(sgd_config(), space);
  const auto off = space.offsets();
  for (const auto* name : {"amsgrad", "simple_model"}) {
    const auto i = *space.index_of(name);
    for (std::size_t k = 0; k < space.specs()[i].width(); ++k) EXPECT_EQ(x[off[i] + k], 0.0) << name;
  }
}

TEST(Encode, RejectsInvalidConfig) {
  auto c = sgd_config();
  c.erase("optimizer");
  EXPECT_THROW(encode(c, default_space()), ValidationError);
}

TEST(EncodeDecode, RoundTripOnHandConfig) {
  const auto space = default_space();
  const auto c = sgd_config();
  const auto back = decode(encode(c, space), space);
  ASSERT_EQ(back.size(), c.size());
  for (const auto& [name, value] : c) {
    ASSERT_TRUE(back.count(name)) << name;
    if (const auto* d = std::get_if<double>(&value))
      EXPECT_NEAR(std::get<double>(back.at(name)), *d, 1e-9 * std::max(1.0, std::abs(*d))) << name;
    else
      EXPECT_EQ(back.at(name), value) << name;
  }
}

TEST(EncodeDecode, RoundTripOnSamples) {
  const auto space = default_space();
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    const auto c = sample(space, seed);
    ASSERT_TRUE(validate(c, space).empty()) << seed;
    const auto back = decode(encode(c, space), space);
    ASSERT_EQ(back.size(), c.size()) << seed;
    for (const auto& [name, value] : c) {
      if (const auto* d = std::get_if<double>(&value)) {
        EXPECT_NEAR(std::get<double>(back.at(name)), *d, 1e-9 * std::max(1.0, std::abs(*d))) << name;
      } else {
        EXPECT_EQ(back.at(name), value) << name;
      }
    }
  }
}

TEST(Sample, LearningRateMedianIsLogCentered) {
  const auto space = default_space();
  std::vector<double> lr;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) lr.push_back(std::get<double>(sample(space, seed).at("learning_rate")));
  std::nth_element(lr.begin(), lr.begin() + 5000, lr.end());
  EXPECT_GE(lr[5000], 5e-4);
  EXPECT_LE(lr[5000], 2e-3);
}

TEST(Sample, CategoriesRoughlyUniformAndConditionalsTrack) {
  const auto space = default_space();
  std::map<std::string, int> counts;
  const int n = 6000;
  for (std::uint64_t seed = 0; seed < n; ++seed) {
    const auto c = sample(space, seed);
    const auto& opt = std::get<std::string>(c.at("optimizer"));
    ++counts[opt];
    EXPECT_EQ(c.count("momentum") == 1, opt == "SGD");
    EXPECT_EQ(c.count("amsgrad") == 1, opt != "SGD");
    EXPECT_EQ(c.count("simple_model") == 1, std::get<std::string>(c.at("first_simple_model")) == "true");
  }
  for (const auto& [k, v] : counts) EXPECT_NEAR(v / double(n), 1.0 / 3.0, 0.03) << k;
}

TEST(Sample, IntegersCoverTheirRange) {
  const auto space = default_space();
  std::map<long long, int> warmup, batch;
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    const auto c = sample(space, seed);
    ++warmup[std::get<long long>(c.at("warmup_epoch"))];
    ++batch[std::get<long long>(c.at("batch_size"))];
  }
  EXPECT_EQ(warmup.size(), 4u);
  EXPECT_EQ(warmup.begin()->first, 3);
  EXPECT_EQ(warmup.rbegin()->first, 6);
  EXPECT_EQ(batch.begin()->first, 16);
  EXPECT_EQ(batch.rbegin()->first, 64);
}

TEST(Sample, Deterministic) {
  const auto space = default_space();
  EXPECT_EQ(sample(space, 5), sample(space, 5));
  EXPECT_NE(sample(space, 5), sample(space, 6));
}

}  // namespace
}  // namespace zap
