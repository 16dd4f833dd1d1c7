#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "test_util.hpp"
#include "zap/meta_dataset.hpp"
#include "zap/synthetic.hpp"

namespace zap {
namespace {

CostMatrix dense(std::size_t rows, std::size_t cols, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::string> d, p;
  for (std::size_t i = 0; i < rows; ++i) d.push_back("d" + std::to_string(i));
  for (std::size_t j = 0; j < cols; ++j) p.push_back("p" + std::to_string(j));
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = u(rng);
  return CostMatrix(d, p, v);
}

TEST(CostMatrixCsv, DenseFileHasFullMask) {
  const auto dir = test::scratch_dir("cm_dense");
  const auto path = test::write_file(dir / "c.csv", "dataset_id,p0,p1\nd0,0.5,0.25\nd1,1.0,0\n");
  const auto m = load_cost_matrix(path);
  ASSERT_EQ(m.n_datasets(), 2u);
  ASSERT_EQ(m.n_pipelines(), 2u);
  for (std::size_t d = 0; d < 2; ++d)
    for (std::size_t p = 0; p < 2; ++p) EXPECT_TRUE(m.observed(d, p));
  EXPECT_DOUBLE_EQ(*m.alc(0, 1), 0.25);
  EXPECT_EQ(m.pipeline_ids()[1], "p1");
}

TEST(CostMatrixCsv, EmptyCellIsUnobserved) {
  const auto dir = test::scratch_dir("cm_sparse");
  const auto m = load_cost_matrix(test::write_file(dir / "c.csv", "dataset_id,p0,p1\nd0,0.5,\nd1,,0.3\n"));
  EXPECT_TRUE(m.observed(0, 0));
  EXPECT_FALSE(m.observed(0, 1));
  EXPECT_FALSE(m.alc(1, 0).has_value());
  EXPECT_EQ(m.n_observed(), 2u);
  EXPECT_THROW(m.alc_at(0, 1), ValidationError);
}

TEST(CostMatrixCsv, OutOfRangeValueIsValidationError) {
  const auto dir = test::scratch_dir("cm_range");
  const auto path = test::write_file(dir / "c.csv", "dataset_id,p0\nd0,1.2\n");
  try {
    load_cost_matrix(path);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("value out of [0,1]"), std::string::npos);
  }
}

TEST(CostMatrixCsv, MalformedCellNamesRowAndColumn) {
  const auto dir = test::scratch_dir("cm_bad");
  const auto path = test::write_file(dir / "c.csv", "dataset_id,p0,p1\nd0,0.1,0.2\nd1,0.3,zero\n");
  try {
    load_cost_matrix(path);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("zero"), std::string::npos) << msg;
  }
}

TEST(CostMatrixCsv, SaveLoadKeepsMaskAndValues) {
  const auto dir = test::scratch_dir("cm_roundtrip");
  const auto m = sparsify(dense(4, 3), 0.5, 9);
  save_cost_matrix(m, (dir / "c.csv").string());
  const auto back = load_cost_matrix((dir / "c.csv").string());
  EXPECT_EQ(back.mask(), m.mask());
  for (std::size_t d = 0; d < 4; ++d)
    for (std::size_t p = 0; p < 3; ++p)
      if (auto v = m.alc(d, p)) {
        EXPECT_NEAR(*back.alc(d, p), *v, 5e-7);
      }
}

TEST(CostMatrix, RejectsDuplicateIds) {
  EXPECT_THROW(CostMatrix({"a", "a"}, {"p"}, {0.1, 0.2}), ValidationError);
  EXPECT_THROW(CostMatrix({"a"}, {"p", "p"}, {0.1, 0.2}), ValidationError);
}

TEST(CostMatrix, AuditFollowsRowSubsetsBackToSourceRows) {
  const auto m = dense(5, 2);
  auto audit = std::make_shared<ReadAudit>(5);
  const auto audited = m.with_audit(audit);
  const std::vector<std::size_t> rows = {3, 1};
  const auto sub = audited.select_rows(rows);
  (void)sub.alc(0, 0);  // source row 3
  (void)sub.observed(1, 1);  // source row 1
  (void)sub.alc(1, 0);
  EXPECT_EQ(audit->reads(3), 1u);
  EXPECT_EQ(audit->reads(1), 2u);
  EXPECT_EQ(audit->reads(0), 0u);
  const auto sparse = sparsify(sub, 0.5, 1);
  (void)sparse.alc(0, 1);
  EXPECT_EQ(audit->reads(3), 2u);
}

TEST(MetaFeaturesCsv, ParsesRows) {
  const auto dir = test::scratch_dir("mf_parse");
  const auto meta = load_meta_features(test::write_file(
      dir / "m.csv",
      "dataset_id,n_train_images,n_channels,resolution,n_classes,group_id\nd1,5000,3,32,10,g1\nd2,80,1,-1,2,g1\n"));
  ASSERT_EQ(meta.size(), 2u);
  EXPECT_EQ(meta[0].dataset_id, "d1");
  EXPECT_EQ(meta[0].n_train_images, 5000);
  EXPECT_EQ(meta[0].n_channels, 3);
  EXPECT_EQ(meta[0].resolution, 32);
  EXPECT_EQ(meta[0].n_classes, 10);
  EXPECT_EQ(meta[0].group_id, "g1");
  EXPECT_TRUE(meta[1].varying_resolution());
}

TEST(MetaFeaturesCsv, ColumnOrderIsByName) {
  const auto dir = test::scratch_dir("mf_order");
  const auto meta = load_meta_features(test::write_file(
      dir / "m.csv", "group_id,n_classes,resolution,n_channels,n_train_images,dataset_id\ng,4,28,1,100,d\n"));
  EXPECT_EQ(meta[0].dataset_id, "d");
  EXPECT_EQ(meta[0].n_train_images, 100);
  EXPECT_EQ(meta[0].n_classes, 4);
}

TEST(MetaFeaturesCsv, Errors) {
  const auto dir = test::scratch_dir("mf_err");
  const std::string header = "dataset_id,n_train_images,n_channels,resolution,n_classes,group_id\n";
  EXPECT_THROW(load_meta_features(test::write_file(dir / "a.csv", header + "d,10,3,32,1,g\n")), ValidationError);
  EXPECT_THROW(load_meta_features(test::write_file(dir / "b.csv", header + "d,10,3,32,5,g\nd,20,3,32,5,g\n")),
               ValidationError);
  EXPECT_THROW(load_meta_features(test::write_file(dir / "c.csv", "dataset_id,n_train_images,n_channels,resolution,"
                                                                  "group_id\nd,10,3,32,g\n")),
               ParseError);
  EXPECT_THROW(load_meta_features(test::write_file(dir / "d.csv", header + "d,10,2,32,5,g\n")), ValidationError);
  EXPECT_THROW(load_meta_features(test::write_file(dir / "e.csv", header + "d,10,3,0,5,g\n")), ValidationError);
  EXPECT_THROW(load_meta_features(test::write_file(dir / "f.csv", header + "d,ten,3,32,5,g\n")), ParseError);
}

DatasetMetaFeatures mf(long long n, int ch, int res, int classes, std::string id = "d") {
  return {std::move(id), n, ch, res, classes, "g"};
}

TEST(Featurize, MeanRecordMapsToZero) {
  const auto x = mf(5000, 3, 32, 10);
  FeatureStats stats;
  stats.mean = raw_meta_vector(x);
  stats.mean[kVaryingFlagSlot] = 0.0;
  stats.std = {0.7, 0.9, 1.1, 1.0, 2.0};
  for (double v : featurize(x, stats)) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Featurize, VaryingResolutionSentinel) {
  FeatureStats stats;
  stats.mean = {8.0, 2.0, 3.5, 0.0, 2.0};
  stats.std = {1.5, 1.0, 0.5, 1.0, 1.2};
  const auto v = featurize(mf(1000, 3, -1, 10), stats);
  EXPECT_DOUBLE_EQ(v[kVaryingFlagSlot], 1.0);
  EXPECT_DOUBLE_EQ(v[2], (std::log(1.0) - 3.5) / 0.5);
  EXPECT_DOUBLE_EQ(featurize(mf(1000, 3, 64, 10), stats)[kVaryingFlagSlot], 0.0);
}

TEST(Featurize, OnlyTrainingSetSizeComponentDiffers) {
  FeatureStats stats;
  stats.mean = {7.0, 2.0, 4.0, 0.0, 2.5};
  stats.std = {2.0, 1.0, 1.0, 1.0, 1.0};
  const auto a = featurize(mf(100, 3, 64, 10), stats);
  const auto b = featurize(mf(10000, 3, 64, 10), stats);
  // Hand z-scores: (ln 100 - 7)/2 and (ln 10000 - 7)/2.
  EXPECT_NEAR(a[0], (4.605170185988091 - 7.0) / 2.0, 1e-12);
  EXPECT_NEAR(b[0], (9.210340371976184 - 7.0) / 2.0, 1e-12);
  for (std::size_t k = 1; k < kMetaDim; ++k) EXPECT_EQ(a[k], b[k]);
}

TEST(Featurize, FittedSetIsStandardized) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<DatasetMetaFeatures> set;
    std::uniform_int_distribution<long long> n(20, 100000);
    std::uniform_int_distribution<int> c(2, 100), r(8, 512), ch(0, 1);
    for (int i = 0; i < 30; ++i) set.push_back(mf(n(rng), ch(rng) ? 3 : 1, i % 7 == 0 ? -1 : r(rng), c(rng)));
    const auto stats = fit_feature_stats(set);
    for (std::size_t k : {0u, 1u, 2u, 4u}) {
      double s = 0.0, sq = 0.0;
      for (const auto& x : set) s += featurize(x, stats)[k];
      const double m = s / static_cast<double>(set.size());
      for (const auto& x : set) sq += (featurize(x, stats)[k] - m) * (featurize(x, stats)[k] - m);
      EXPECT_NEAR(m, 0.0, 1e-9);
      EXPECT_NEAR(std::sqrt(sq / static_cast<double>(set.size())), 1.0, 1e-6);
    }
  }
}

TEST(Featurize, ConstantDimensionUsesStdFloor) {
  std::vector<DatasetMetaFeatures> set = {mf(100, 3, 32, 5), mf(200, 3, 32, 7)};
  const auto stats = fit_feature_stats(set);
  EXPECT_DOUBLE_EQ(stats.std[1], FeatureStats::kStdFloor);
  EXPECT_DOUBLE_EQ(featurize(set[0], stats)[1], 0.0);
}

TEST(Sparsify, FullFractionIsIdentity) {
  const auto m = sparsify(dense(6, 5), 0.7, 2);
  EXPECT_EQ(sparsify(m, 1.0, 11).mask(), m.mask());
}

TEST(Sparsify, KeepsExactlyFloorCount) {
  EXPECT_EQ(sparsify(dense(10, 10), 0.25, 5).n_observed(), 25u);
  EXPECT_EQ(sparsify(dense(7, 3), 0.5, 5).n_observed(), 10u);  // floor(10.5)
}

TEST(Sparsify, DeterministicPerSeed) {
  const auto m = dense(8, 8);
  EXPECT_EQ(sparsify(m, 0.4, 42).mask(), sparsify(m, 0.4, 42).mask());
  EXPECT_NE(sparsify(m, 0.4, 42).mask(), sparsify(m, 0.4, 43).mask());
}

TEST(Sparsify, NeverResurrectsDroppedCells) {
  const auto m = dense(10, 10);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto once = sparsify(m, 0.5, s);
    const auto twice = sparsify(once, 0.5, s + 1000);
    for (std::size_t c = 0; c < once.mask().size(); ++c)
      if (!once.mask()[c]) {
        EXPECT_FALSE(twice.mask()[c]);
      }
    EXPECT_EQ(twice.n_observed(), 25u);
  }
}

TEST(Sparsify, InvalidFraction) {
  EXPECT_THROW(sparsify(dense(2, 2), 0.0, 1), ValidationError);
  EXPECT_THROW(sparsify(dense(2, 2), -0.5, 1), ValidationError);
  EXPECT_THROW(sparsify(dense(2, 2), 1.5, 1), ValidationError);
}

TEST(CostFromAlc, Endpoints) {
  EXPECT_DOUBLE_EQ(cost_from_alc(1.0), 0.0);
  EXPECT_DOUBLE_EQ(cost_from_alc(0.0), 1.0);
  EXPECT_DOUBLE_EQ(cost_from_alc(0.75), 0.25);
  EXPECT_THROW(cost_from_alc(1.01), ValidationError);
  EXPECT_THROW(cost_from_alc(-0.01), ValidationError);
}

TEST(CostFromAlc, StrictlyOrderReversing) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double a = u(rng), b = u(rng);
    EXPECT_EQ(cost_from_alc(a) < cost_from_alc(b), a > b);
  }
}

TEST(Synthetic, ShapeContract) {
  SyntheticSpec spec;
  spec.n_groups = 2;
  spec.variants_per_group = 2;
  spec.n_pipelines = 3;
  const auto s = generate_synthetic(spec);
  EXPECT_EQ(s.costs.n_pipelines(), 3u);
  EXPECT_EQ(s.costs.n_datasets(), 4u);
  EXPECT_TRUE(s.costs.dense());
  EXPECT_EQ(s.meta.size(), 4u);
  EXPECT_EQ(s.pipelines.size(), 3u);
  for (const auto& m : s.meta) EXPECT_NO_THROW(validate(m));
}

TEST(Synthetic, NoiselessBestMatchesLatentArgmax) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticSpec spec;
    spec.n_groups = 4;
    spec.variants_per_group = 3;
    spec.n_pipelines = 25;
    spec.latent_rank = 1;
    spec.noise_std = 0.0;
    spec.seed = seed;
    const auto s = generate_synthetic(spec);
    for (std::size_t i = 0; i < s.costs.n_datasets(); ++i) {
      // Brute force over the closed-form model.
      std::size_t model_best = 0, matrix_best = 0;
      for (std::size_t j = 1; j < s.costs.n_pipelines(); ++j) {
        if (s.latent.logit(i, j) > s.latent.logit(i, model_best)) model_best = j;
        if (s.costs.alc_at(i, j) > s.costs.alc_at(i, matrix_best)) matrix_best = j;
      }
      EXPECT_EQ(matrix_best, model_best);
    }
  }
}

TEST(Synthetic, VariantsShareGroupWithinPerturbationBound) {
  SyntheticSpec spec;
  spec.n_groups = 6;
  spec.variants_per_group = 4;
  spec.n_pipelines = 10;
  const auto s = generate_synthetic(spec);
  for (std::size_t g = 0; g < spec.n_groups; ++g)
    for (std::size_t v = 0; v < spec.variants_per_group; ++v) {
      const auto i = g * spec.variants_per_group + v;
      EXPECT_EQ(s.meta[i].group_id, s.meta[g * spec.variants_per_group].group_id);
      EXPECT_EQ(s.meta[i].n_channels, s.meta[g * spec.variants_per_group].n_channels);
      for (std::size_t r = 0; r < spec.latent_rank; ++r)
        EXPECT_LE(std::abs(s.latent.dataset_factors[i][r] - s.latent.group_factors[g][r]),
                  s.latent.variant_radius + 1e-12);
    }
}

TEST(Synthetic, DeterministicPerSeed) {
  SyntheticSpec spec;
  spec.n_groups = 3;
  spec.n_pipelines = 7;
  spec.seed = 99;
  const auto a = generate_synthetic(spec), b = generate_synthetic(spec);
  for (std::size_t i = 0; i < a.costs.n_datasets(); ++i)
    for (std::size_t j = 0; j < a.costs.n_pipelines(); ++j) EXPECT_EQ(a.costs.alc_at(i, j), b.costs.alc_at(i, j));
  EXPECT_EQ(a.pipelines, b.pipelines);
  spec.seed = 100;
  EXPECT_NE(generate_synthetic(spec).costs.alc_at(0, 0), a.costs.alc_at(0, 0));
}

TEST(Synthetic, RejectsBadSpec) {
  SyntheticSpec spec;
  spec.n_groups = 0;
  EXPECT_THROW(generate_synthetic(spec), ValidationError);
  spec = {};
  spec.noise_std = -1.0;
  EXPECT_THROW(generate_synthetic(spec), ValidationError);
}

}  // namespace
}  // namespace zap
