#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>

#include "test_util.hpp"
#include "zap/io.hpp"

namespace zap {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;  // stdout and stderr together
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" ZAP_CLI_PATH "\" " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// Small and quick: 5 groups of 3, 20 pipelines.
fs::path generated(const std::string& name) {
  const auto dir = test::scratch_dir(name);
  EXPECT_EQ(run("--out " + q(dir) + " --seed 7 generate --groups 5 --variants 3 --pipelines 20").code, 0);
  return dir;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

TEST(Cli, NoSubcommandIsUsageError) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(CliGenerate, ShapeAndFiles) {
  const auto dir = generated("cli_gen");
  const auto csv = test::read_file(dir / "cost_matrix.csv");
  EXPECT_EQ(count_lines(csv), 16u);
  const auto header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 20);
  EXPECT_EQ(count_lines(test::read_file(dir / "meta_features.csv")), 16u);
  EXPECT_EQ(read_json((dir / "pipelines.json").string()).size(), 20u);
  const auto prov = read_json((dir / "provenance.json").string());
  EXPECT_EQ(prov["seed"], 7);
  EXPECT_EQ(prov["groups"], 5);
  EXPECT_EQ(prov["variants"], 3);
  EXPECT_EQ(prov["pipelines"], 20);
}

TEST(CliGenerate, RerunIsByteIdentical) {
  const auto a = generated("cli_gen_a"), b = generated("cli_gen_b");
  for (const char* f : {"cost_matrix.csv", "meta_features.csv", "pipelines.json", "provenance.json"})
    EXPECT_EQ(test::read_file(a / f), test::read_file(b / f)) << f;
}

TEST(CliGenerate, ZeroGroupsIsUsageError) {
  const auto dir = test::scratch_dir("cli_gen_zero");
  EXPECT_EQ(run("--out " + q(dir) + " generate --groups 0").code, 2);
  EXPECT_EQ(run("--out " + q(dir) + " generate --noise -1").code, 2);
  EXPECT_EQ(run("--out " + q(dir) + " generate --groups x").code, 2);
}

TEST(CliGenerate, EnvironmentSetsOutputDir) {
  const auto env_dir = test::scratch_dir("cli_env");
  const auto flag_dir = test::scratch_dir("cli_env_flag");
  const std::string env = "ZAP_OUT_DIR=" + q(env_dir);
  EXPECT_EQ(run("generate --groups 2 --variants 2 --pipelines 4", env).code, 0);
  EXPECT_TRUE(fs::exists(env_dir / "cost_matrix.csv"));
  EXPECT_EQ(run("--out " + q(flag_dir) + " generate --groups 2 --variants 2 --pipelines 4", env).code, 0);
  EXPECT_TRUE(fs::exists(flag_dir / "cost_matrix.csv"));
}

TEST(CliTrain, WritesParamsAndHistory) {
  const auto dir = generated("cli_train");
  const auto r = run("--out " + q(dir) + " train --steps 30 --hidden 8 --objective least_squares");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto params = read_json((dir / "params.json").string());
  EXPECT_EQ(params["config"]["objective"], "least_squares");
  const auto hist = test::read_file(dir / "loss_history.csv");
  EXPECT_EQ(hist.substr(0, hist.find('\n')), "step,loss");
  EXPECT_EQ(count_lines(hist), 31u);
  EXPECT_NO_THROW(surrogate_from_json(params));
}

TEST(CliTrain, AllTiedMatrixFails) {
  const auto dir = generated("cli_train_tied");
  std::string csv = "dataset_id";
  for (int j = 0; j < 20; ++j) csv += ",p" + std::string(j < 10 ? "0" : "") + std::to_string(j);
  csv += "\n";
  const auto meta = test::read_file(dir / "meta_features.csv");
  std::size_t pos = meta.find('\n') + 1;
  while (pos < meta.size()) {
    csv += meta.substr(pos, meta.find(',', pos) - pos);
    for (int j = 0; j < 20; ++j) csv += ",0.5";
    csv += "\n";
    pos = meta.find('\n', pos) + 1;
  }
  test::write_file(dir / "cost_matrix.csv", csv);
  const auto r = run("--out " + q(dir) + " train --steps 5 --hidden 4");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("tied"), std::string::npos) << r.out;
}

TEST(CliTrain, CorruptCsvNamesTheCell) {
  const auto dir = generated("cli_train_corrupt");
  auto csv = test::read_file(dir / "cost_matrix.csv");
  // third field of the second data row
  std::size_t pos = csv.find('\n', csv.find('\n') + 1) + 1;
  for (int k = 0; k < 2; ++k) pos = csv.find(',', pos) + 1;
  csv.replace(pos, csv.find(',', pos) - pos, "abc");
  test::write_file(dir / "cost_matrix.csv", csv);
  const auto r = run("--out " + q(dir) + " train --steps 5 --hidden 4");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("row 3 column 3"), std::string::npos) << r.out;  // file lines, header first
  EXPECT_NE(r.out.find("g00_v1"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("p01"), std::string::npos) << r.out;
}

TEST(CliTrain, ConfigFileAndFlags) {
  const auto dir = generated("cli_train_cfg");
  const auto cfg = test::write_file(dir / "cfg.json", "{\"steps\": 12, \"hidden\": \"4\"}");
  ASSERT_EQ(run("--out " + q(dir) + " --config " + q(cfg) + " train").code, 0);
  EXPECT_EQ(count_lines(test::read_file(dir / "loss_history.csv")), 13u);
  ASSERT_EQ(run("--out " + q(dir) + " --config " + q(cfg) + " train --steps 7").code, 0);
  EXPECT_EQ(count_lines(test::read_file(dir / "loss_history.csv")), 8u);
  const auto bad = test::write_file(dir / "bad.json", "{\"stepz\": 12}");
  EXPECT_EQ(run("--out " + q(dir) + " --config " + q(bad) + " train").code, 2);
  const auto obj = test::write_file(dir / "obj.json", "{\"objective\": \"hinge\"}");
  EXPECT_EQ(run("--out " + q(dir) + " --config " + q(obj) + " train").code, 2);
}

TEST(CliSelect, PrintsMethodChoiceAndScores) {
  const auto dir = generated("cli_select");
  ASSERT_EQ(run("--out " + q(dir) + " train --steps 20 --hidden 8").code, 0);
  for (const char* m : {"zap_hpo", "single_best", "random", "zap_as_knn"}) {
    const auto r = run("--out " + q(dir) + " select --dataset g01_v0 --method " + m);
    ASSERT_EQ(r.code, 0) << m << r.out;
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["method"], m);
    EXPECT_EQ(j["scores"].size(), 20u);
    EXPECT_TRUE(j["scores"].contains(j["chosen"].get<std::string>()));
  }
}

TEST(CliSelect, RandomIsDeterministicPerSeed) {
  const auto dir = generated("cli_select_rand");
  const auto a = run("--out " + q(dir) + " --seed 11 select --dataset g00_v0 --method random");
  const auto b = run("--out " + q(dir) + " --seed 11 select --dataset g00_v0 --method random");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST(CliSelect, DimensionMismatchFails) {
  const auto dir = generated("cli_select_dims");
  const auto other = test::scratch_dir("cli_select_dims_other");
  ASSERT_EQ(run("--out " + q(other) + " generate --groups 5 --variants 3 --pipelines 25").code, 0);
  const auto r = run("--out " + q(dir) + " select --dataset g00_v0 --method single_best --costs " +
                     q(other / "cost_matrix.csv"));
  EXPECT_EQ(r.code, 1) << r.out;
  // a surrogate whose input layer does not fit the encoded pipeline + meta vector
  ASSERT_EQ(run("--out " + q(dir) + " train --steps 5 --hidden 4").code, 0);
  auto params = read_json((dir / "params.json").string());
  params["layer_sizes"][0] = 10;
  params["layers"][0]["weights"] = std::vector<double>(40, 0.0);
  write_json(params, (dir / "params.json").string());
  EXPECT_EQ(run("--out " + q(dir) + " select --dataset g00_v0").code, 1);
  EXPECT_EQ(run("--out " + q(dir) + " select --dataset nope --method random").code, 1);
}

TEST(CliEvaluate, DefaultsWriteAllMethods) {
  const auto dir = generated("cli_eval");
  const auto r = run("--out " + q(dir) + " evaluate --steps 30 --hidden 8 --n-seeds 2");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto summary = test::read_file(dir / "summary.csv");
  EXPECT_EQ(count_lines(summary), 5u);
  for (const char* m : {"zap_hpo", "zap_as_knn", "single_best", "random"})
    EXPECT_NE(summary.find(std::string("\n") + m + ","), std::string::npos) << m;
  const auto report = read_json((dir / "report.json").string());
  EXPECT_EQ(report["methods"]["zap_hpo"].size(), 5u);  // folds
  EXPECT_EQ(report["methods"]["zap_hpo"]["g00"].size(), 2u);  // seeds
  EXPECT_EQ(count_lines(test::read_file(dir / "significance.csv")), 7u);
  EXPECT_EQ(run("--out " + q(dir) + " report").code, 0);
}

TEST(CliEvaluate, FractionsGiveSweepSections) {
  const auto dir = generated("cli_eval_sweep");
  const auto r = run("--out " + q(dir) + " evaluate --steps 20 --hidden 8 --n-seeds 1 --fractions 1.0,0.25");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto report = read_json((dir / "report.json").string());
  ASSERT_EQ(report["sparsity_sweep"].size(), 2u);
  EXPECT_EQ(report["sparsity_sweep"][1]["fraction"], 0.25);
  EXPECT_EQ(run("--out " + q(dir) + " evaluate --n-seeds 1 --fractions 0").code, 2);
  EXPECT_EQ(run("--out " + q(dir) + " evaluate --n-seeds 1 --methods autofolio").code, 2);
}

TEST(CliEvaluate, ConfigFileWithFlagOverride) {
  const auto dir = generated("cli_eval_cfg");
  const auto cfg = test::write_file(dir / "cfg.json",
                                    "{\"methods\": \"random,single_best\", \"n_seeds\": 3, \"steps\": 5, \"hidden\": \"4\"}");
  ASSERT_EQ(run("--out " + q(dir) + " --config " + q(cfg) + " evaluate --methods random").code, 0);
  const auto report = read_json((dir / "report.json").string());
  EXPECT_EQ(report["methods"].size(), 1u);
  EXPECT_EQ(report["methods"]["random"]["g00"].size(), 3u);
}

TEST(CliEvaluate, FailingFoldIsNamed) {
  // g0 is all ties, so the fold holding out g1 has nothing to rank.
  const auto dir = test::scratch_dir("cli_eval_fold");
  test::write_file(dir / "cost_matrix.csv", "dataset_id,a,b\nx0,0.5,0.5\nx1,0.5,0.5\ny0,0.2,0.9\ny1,0.7,0.1\n");
  test::write_file(dir / "meta_features.csv",
                   "dataset_id,n_train_images,n_channels,resolution,n_classes,group_id\n"
                   "x0,100,3,32,10,g0\nx1,200,3,32,10,g0\ny0,300,1,64,5,g1\ny1,400,1,64,5,g1\n");
  const auto gen = test::scratch_dir("cli_eval_fold_pipes");
  ASSERT_EQ(run("--out " + q(gen) + " generate --groups 1 --variants 1 --pipelines 2").code, 0);
  auto pipes = read_json((gen / "pipelines.json").string());
  pipes[0]["id"] = "a";
  pipes[1]["id"] = "b";
  write_json(pipes, (dir / "pipelines.json").string());
  const auto r = run("--out " + q(dir) + " evaluate --methods zap_hpo --steps 5 --hidden 4 --n-seeds 1");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("fold 'g1'"), std::string::npos) << r.out;
}

TEST(CliAlc, ReferenceCurves) {
  const auto dir = test::scratch_dir("cli_alc");
  const std::pair<const char*, const char*> cases[] = {
      {"[{\"t\": 0, \"nauc\": 0.6}]", "0.600000\n"},
      {"[{\"t\": 60, \"nauc\": 1.0}]", "0.772330\n"},
      {"[]", "0.000000\n"},
  };
  int i = 0;
  for (const auto& [curve, expected] : cases) {
    const auto path = test::write_file(dir / ("c" + std::to_string(i++) + ".json"), curve);
    const auto r = run("alc --curve " + q(path) + " --budget 1200 --t0 60");
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, expected) << curve;
  }
  const auto late = test::write_file(dir / "late.json", "[{\"t\": 1300, \"nauc\": 1.0}]");
  EXPECT_EQ(run("alc --curve " + q(late) + " --budget 1200 --t0 60").code, 1);
  EXPECT_EQ(run("alc --curve " + q(dir / "missing.json")).code, 1);
  EXPECT_EQ(run("alc").code, 2);
}

TEST(CliPipeline, GenerateTrainEvaluateDefaults) {
  const auto dir = test::scratch_dir("cli_defaults");
  ASSERT_EQ(run("--out " + q(dir) + " generate").code, 0);
  ASSERT_EQ(run("--out " + q(dir) + " train --steps 50").code, 0);
  const auto r = run("--out " + q(dir) + " evaluate --n-seeds 1 --steps 50");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto summary = test::read_file(dir / "summary.csv");
  const auto at = summary.find("\nzap_hpo,");
  ASSERT_NE(at, std::string::npos);
  const auto start = at + 9;
  const double regret = std::stod(summary.substr(start, summary.find(',', start) - start));
  EXPECT_TRUE(std::isfinite(regret));
}

}  // namespace
}  // namespace zap
