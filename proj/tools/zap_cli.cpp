// zap: generate synthetic meta-datasets, train the zero-shot surrogate, select
// pipelines, run leave-one-group-out evaluations and score learning curves.
//
// Exit codes: 0 ok, 1 data or runtime error, 2 usage error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "zap/zap.hpp"

namespace fs = std::filesystem;
using zap::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr const char* kCostsFile = "cost_matrix.csv";
constexpr const char* kMetaFile = "meta_features.csv";
constexpr const char* kPipelinesFile = "pipelines.json";
constexpr const char* kParamsFile = "params.json";

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  std::size_t jobs = 1;
};

// --out, then ZAP_OUT_DIR, then ./zap_out
fs::path output_dir(const Globals& g) {
  fs::path dir = g.out;
  if (dir.empty()) {
    const char* env = std::getenv("ZAP_OUT_DIR");
    dir = env && *env ? env : "zap_out";
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

// Flat JSON config: values fill every option the command line left unset.
class Config {
 public:
  void load(const std::string& path) {
    if (path.empty()) return;
    doc_ = zap::read_json(path);
    if (!doc_.is_object()) throw UsageError(path + ": config must be a flat JSON object");
    path_ = path;
  }

  template <typename T>
  void fill(CLI::App* cmd, const std::string& key, T& var) {
    used_.insert(key);
    if (!doc_.contains(key)) return;
    if (cmd->get_option("--" + flag_name(key))->count() > 0) return;
    try {
      var = doc_[key].get<T>();
    } catch (const json::exception&) {
      throw UsageError(path_ + ": bad value for '" + key + "'");
    }
  }

  void reject_unknown() const {
    for (const auto& [k, v] : doc_.items())
      if (!used_.count(k)) throw UsageError(path_ + ": unknown config key '" + k + "'");
  }

 private:
  static std::string flag_name(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
  }

  json doc_ = json::object();
  std::string path_;
  std::set<std::string> used_;
};

std::string in_dir(const std::string& explicit_path, const fs::path& dir, const char* name) {
  return explicit_path.empty() ? (dir / name).string() : explicit_path;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

std::vector<std::size_t> parse_hidden(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ','))
    out.push_back(static_cast<std::size_t>(zap::csv::parse_int(part, "--hidden")));
  return out;
}

// Inputs shared by train, select and evaluate.
struct DataPaths {
  std::string data;  // directory with the three standard files
  std::string costs, meta, pipelines;

  void add(CLI::App* cmd) {
    cmd->add_option("--data", data, "directory holding cost_matrix.csv, meta_features.csv, pipelines.json");
    cmd->add_option("--costs", costs, "cost matrix CSV");
    cmd->add_option("--meta", meta, "meta-features CSV");
    cmd->add_option("--pipelines", pipelines, "pipelines JSON");
  }

  void fill(CLI::App* cmd, Config& cfg) {
    cfg.fill(cmd, "data", data);
    cfg.fill(cmd, "costs", costs);
    cfg.fill(cmd, "meta", meta);
    cfg.fill(cmd, "pipelines", pipelines);
  }

  zap::MetaDataset load(const fs::path& fallback) const {
    const fs::path dir = data.empty() ? fallback : fs::path(data);
    zap::MetaDataset md;
    md.costs = zap::load_cost_matrix(in_dir(costs, dir, kCostsFile));
    const auto meta_rows = zap::load_meta_features(in_dir(meta, dir, kMetaFile));
    md.meta = zap::align_meta(md.costs, meta_rows);
    md.pipelines = zap::align_pipelines(md.costs, zap::load_pipelines(in_dir(pipelines, dir, kPipelinesFile)));
    md.validate();
    return md;
  }
};

struct TrainFlags {
  std::string hidden = "128,128";
  double learning_rate = 1e-3;
  std::size_t triples_per_step = 64;
  std::size_t steps = 600;
  std::string objective = "ranking_bounded";
  double weight_decay = 1e-5;

  void add(CLI::App* cmd) {
    cmd->add_option("--hidden", hidden, "hidden layer sizes, comma separated")->capture_default_str();
    cmd->add_option("--learning-rate", learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--triples-per-step", triples_per_step)->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--steps", steps)->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--objective", objective, "ranking_bounded | ranking_literal | least_squares")
        ->capture_default_str()
        ->check(CLI::IsMember({"ranking", "ranking_bounded", "ranking_literal", "least_squares"}));
    cmd->add_option("--weight-decay", weight_decay)->capture_default_str()->check(CLI::NonNegativeNumber);
  }

  void fill(CLI::App* cmd, Config& cfg) {
    cfg.fill(cmd, "hidden", hidden);
    cfg.fill(cmd, "learning_rate", learning_rate);
    cfg.fill(cmd, "triples_per_step", triples_per_step);
    cfg.fill(cmd, "steps", steps);
    cfg.fill(cmd, "objective", objective);
    cfg.fill(cmd, "weight_decay", weight_decay);
  }

  zap::TrainConfig build(std::uint64_t seed) const {
    zap::TrainConfig c;
    try {
      c.hidden = parse_hidden(hidden);
    } catch (const zap::ParseError& e) {
      throw UsageError(e.what());
    }
    c.learning_rate = learning_rate;
    c.triples_per_step = triples_per_step;
    c.steps = steps;
    c.seed = seed;
    c.weight_decay = weight_decay;
    try {
      c.objective = zap::objective_from_string(objective);
      c.validate();
    } catch (const zap::ValidationError& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

// ---- generate ----

struct GenerateCmd {
  zap::SyntheticSpec spec;

  void run(const Globals& g) {
    spec.seed = g.seed;
    const auto dir = output_dir(g);
    const auto s = zap::generate_synthetic(spec);
    zap::save_cost_matrix(s.costs, (dir / kCostsFile).string());
    zap::save_meta_features(s.meta, (dir / kMetaFile).string());
    zap::save_pipelines({s.costs.pipeline_ids(), s.pipelines}, (dir / kPipelinesFile).string());
    zap::write_json({{"generator", "synthetic_low_rank"},
                     {"seed", spec.seed},
                     {"groups", spec.n_groups},
                     {"variants", spec.variants_per_group},
                     {"pipelines", spec.n_pipelines},
                     {"rank", spec.latent_rank},
                     {"noise", zap::round6(spec.noise_std)},
                     {"datasets", s.costs.n_datasets()},
                     {"files", {kCostsFile, kMetaFile, kPipelinesFile}}},
                    (dir / "provenance.json").string());
    std::cout << "wrote " << s.costs.n_pipelines() << "x" << s.costs.n_datasets() << " cost matrix to "
              << dir.string() << "\n";
  }
};

// ---- train ----

struct TrainCmd {
  DataPaths paths;
  TrainFlags flags;

  void run(CLI::App* cmd, const Globals& g, Config& cfg) {
    paths.fill(cmd, cfg);
    flags.fill(cmd, cfg);
    cfg.reject_unknown();
    const auto tc = flags.build(g.seed);
    const auto dir = output_dir(g);
    const auto md = paths.load(dir);

    const auto stats = zap::fit_feature_stats(md.meta);
    const auto in = zap::SurrogateInputs::from(zap::encode_all(md.pipelines, md.space),
                                               zap::featurize_all(md.meta, stats));
    const auto result = zap::train(md.costs, in, tc);
    zap::write_json(zap::surrogate_to_json({result.params, tc, stats}), (dir / kParamsFile).string());

    std::ostringstream hist;
    hist << "step,loss\n";
    for (std::size_t i = 0; i < result.loss_history.size(); ++i)
      hist << i + 1 << ',' << zap::csv::fixed6(result.loss_history[i]) << '\n';
    write_text(dir / "loss_history.csv", hist.str());
    std::cout << "trained " << zap::to_string(tc.objective) << " surrogate for " << tc.steps
              << " steps, final batch loss " << zap::csv::fixed6(result.loss_history.back()) << "\n";
  }
};

// ---- select ----

struct SelectCmd {
  DataPaths paths;
  std::string params;
  std::string dataset;
  std::string method = "zap_hpo";
  std::size_t k = 5;

  void run(CLI::App* cmd, const Globals& g, Config& cfg) {
    paths.fill(cmd, cfg);
    cfg.fill(cmd, "params", params);
    cfg.fill(cmd, "dataset", dataset);
    cfg.fill(cmd, "method", method);
    cfg.fill(cmd, "k", k);
    cfg.reject_unknown();
    const auto m = zap::method_from_string(method);
    if (m == zap::Method::oracle) throw UsageError("the oracle needs held-out results and cannot select");

    const fs::path dir = paths.data.empty() ? output_dir(g) : fs::path(paths.data);
    const auto pipes = zap::load_pipelines(in_dir(paths.pipelines, dir, kPipelinesFile));
    const auto meta_rows = zap::load_meta_features(in_dir(paths.meta, dir, kMetaFile));
    auto query = std::find_if(meta_rows.begin(), meta_rows.end(),
                              [&](const auto& mf) { return mf.dataset_id == dataset; });
    if (query == meta_rows.end()) throw std::runtime_error("dataset '" + dataset + "' not in the meta-features file");

    zap::SelectionResult r;
    std::vector<std::string> ids = pipes.ids;
    switch (m) {
      case zap::Method::zap_hpo: {
        const auto saved = zap::surrogate_from_json(zap::read_json(in_dir(params, dir, kParamsFile)));
        const auto vecs = zap::encode_all(pipes.configs, zap::default_space());
        r = zap::select_zero_shot(saved.params, zap::featurize(*query, saved.stats), vecs);
        break;
      }
      case zap::Method::random:
        r = zap::select_random(ids.size(), g.seed);
        break;
      case zap::Method::single_best:
      case zap::Method::zap_as_knn: {
        auto costs = zap::load_cost_matrix(in_dir(paths.costs, dir, kCostsFile));
        zap::align_pipelines(costs, pipes);
        ids = costs.pipeline_ids();
        // The query dataset never votes for itself.
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < costs.n_datasets(); ++i)
          if (costs.dataset_ids()[i] != dataset) rows.push_back(i);
        costs = costs.select_rows(rows);
        if (costs.n_datasets() == 0) throw std::runtime_error("no other datasets in the cost matrix");
        if (m == zap::Method::single_best) {
          r = zap::select_single_best(costs);
        } else {
          const auto train_meta = zap::align_meta(costs, meta_rows);
          const auto stats = zap::fit_feature_stats(train_meta);
          r = zap::select_knn(costs, zap::featurize_all(train_meta, stats), zap::featurize(*query, stats),
                              std::min(k, costs.n_datasets()));
        }
        break;
      }
      case zap::Method::oracle:
        break;
    }
    json scores = json::object();
    for (std::size_t i = 0; i < ids.size(); ++i)
      scores[ids[i]] = std::isfinite(r.scores[i]) ? json(zap::round6(r.scores[i])) : json(nullptr);
    std::cout << json{{"method", zap::to_string(m)}, {"chosen", ids[r.chosen]}, {"scores", scores}}.dump(2) << "\n";
  }
};

// ---- evaluate ----

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ','))
    if (!part.empty()) out.push_back(part);
  return out;
}

struct EvaluateCmd {
  DataPaths paths;
  TrainFlags flags;
  std::string methods = "zap_hpo,zap_as_knn,single_best,random";
  std::string seeds;
  std::size_t n_seeds = 10;
  std::string fractions;
  std::size_t knn_k = 5;
  bool inner_cv = false;
  std::size_t inner_folds = 5;

  void run(CLI::App* cmd, const Globals& g, Config& cfg) {
    paths.fill(cmd, cfg);
    flags.fill(cmd, cfg);
    cfg.fill(cmd, "methods", methods);
    cfg.fill(cmd, "seeds", seeds);
    cfg.fill(cmd, "n_seeds", n_seeds);
    cfg.fill(cmd, "fractions", fractions);
    cfg.fill(cmd, "knn_k", knn_k);
    cfg.fill(cmd, "inner_cv", inner_cv);
    cfg.fill(cmd, "inner_folds", inner_folds);
    cfg.reject_unknown();

    zap::EvalOptions opts;
    opts.train = flags.build(0);
    opts.knn_k = knn_k;
    opts.inner_cv = inner_cv;
    opts.inner_folds = inner_folds;
    opts.jobs = g.jobs;

    std::vector<zap::Method> method_list;
    for (const auto& m : split_list(methods)) {
      try {
        method_list.push_back(zap::method_from_string(m));
      } catch (const zap::ValidationError& e) {
        throw UsageError(e.what());
      }
    }
    if (method_list.empty()) throw UsageError("--methods is empty");
    std::vector<std::uint64_t> seed_list;
    for (const auto& s : split_list(seeds))
      seed_list.push_back(static_cast<std::uint64_t>(parse_usage_int(s, "--seeds")));
    if (seed_list.empty())
      for (std::size_t i = 0; i < n_seeds; ++i) seed_list.push_back(g.seed + i);
    if (seed_list.empty()) throw UsageError("no seeds");
    std::vector<double> fraction_list;
    for (const auto& f : split_list(fractions)) {
      double v;
      try {
        v = zap::csv::parse_double(f, "--fractions");
      } catch (const zap::ParseError& e) {
        throw UsageError(e.what());
      }
      if (!(v > 0.0 && v <= 1.0)) throw UsageError("--fractions values must lie in (0,1]");
      fraction_list.push_back(v);
    }

    const auto dir = output_dir(g);
    const auto md = paths.load(paths.data.empty() ? dir : fs::path(paths.data));
    const auto folds = zap::make_logo_folds(md.meta);

    std::vector<zap::EvalReport> reports;
    for (auto m : method_list) reports.push_back(zap::evaluate_method(m, md, folds, seed_list, opts));
    std::vector<zap::SweepEntry> sweep;
    if (!fraction_list.empty()) sweep = zap::sparsity_sweep(md, fraction_list, folds, seed_list, opts);

    zap::write_json(zap::report_to_json(reports, folds, sweep), (dir / "report.json").string());
    zap::write_summary_csv(reports, (dir / "summary.csv").string());
    zap::write_significance_csv(reports, (dir / "significance.csv").string());
    zap::write_records_csv(reports, folds, (dir / "records.csv").string());
    if (!sweep.empty()) zap::write_sweep_csv(sweep, (dir / "sweep.csv").string());

    for (const auto& row : zap::summarize(reports))
      std::cout << row.method << " regret " << zap::csv::fixed6(row.mean_regret) << " rank "
                << zap::format_mean_std(row.mean_rank, row.std_rank) << "\n";
  }

  static long long parse_usage_int(const std::string& s, const std::string& where) {
    try {
      return zap::csv::parse_int(s, where);
    } catch (const zap::ParseError& e) {
      throw UsageError(e.what());
    }
  }
};

// ---- alc ----

struct AlcCmd {
  std::string curve;
  zap::AlcConfig cfg;

  void run() const {
    std::cout << zap::csv::fixed6(zap::alc(zap::load_curve(curve), cfg)) << "\n";
  }
};

// ---- report ----

struct ReportCmd {
  std::string report;

  void run(const Globals& g) const {
    const auto path = report.empty() ? (output_dir(g) / "report.json").string() : report;
    const auto doc = zap::read_json(path);
    if (!doc.contains("summary") || !doc["summary"].is_array()) throw zap::ParseError(path + ": no summary section");
    std::printf("%-12s %12s %14s\n", "method", "regret", "rank");
    for (const auto& row : doc["summary"]) {
      const auto regret = zap::format_mean_std(row.at("mean_regret").get<double>(), row.at("std_regret").get<double>(), 3);
      const auto rank = zap::format_mean_std(row.at("mean_rank").get<double>(), row.at("std_rank").get<double>());
      // ± is two bytes in UTF-8, so widths are one wider than the header's
      std::printf("%-12s %13s %15s\n", row.at("method").get<std::string>().c_str(), regret.c_str(), rank.c_str());
    }
    if (doc.contains("sparsity_sweep"))
      for (const auto& e : doc["sparsity_sweep"])
        std::printf("fraction %s regret %s\n", zap::csv::fixed6(e.at("fraction").get<double>()).c_str(),
                    zap::csv::fixed6(e.at("mean_regret").get<double>()).c_str());
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot pipeline selection from a meta-learned cost matrix"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--out", g.out, "output directory (default $ZAP_OUT_DIR or ./zap_out)");
  app.add_option("--jobs", g.jobs, "worker threads for evaluate")->capture_default_str()->check(CLI::PositiveNumber);
  std::string config_path;
  app.add_option("--config", config_path, "flat JSON config; command-line flags win");

  GenerateCmd gen;
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic meta-dataset");
  gen_cmd->add_option("--groups", gen.spec.n_groups)->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--variants", gen.spec.variants_per_group)->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--pipelines", gen.spec.n_pipelines)->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--rank", gen.spec.latent_rank)->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--noise", gen.spec.noise_std)->capture_default_str()->check(CLI::NonNegativeNumber);

  TrainCmd train;
  auto* train_cmd = app.add_subcommand("train", "fit the surrogate on a cost matrix");
  train.paths.add(train_cmd);
  train.flags.add(train_cmd);

  SelectCmd sel;
  auto* sel_cmd = app.add_subcommand("select", "pick a pipeline for one dataset");
  sel.paths.add(sel_cmd);
  sel_cmd->add_option("--params", sel.params, "trained surrogate JSON");
  sel_cmd->add_option("--dataset", sel.dataset, "dataset id in the meta-features file")->required();
  sel_cmd->add_option("--method", sel.method, "zap_hpo | zap_as_knn | single_best | random")
      ->capture_default_str()
      ->check(CLI::IsMember({"zap_hpo", "zap_as_knn", "knn", "single_best", "random"}));
  sel_cmd->add_option("--k", sel.k, "neighbours for zap_as_knn")->capture_default_str()->check(CLI::PositiveNumber);

  EvaluateCmd eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "leave-one-group-out evaluation");
  eval.paths.add(eval_cmd);
  eval.flags.add(eval_cmd);
  eval_cmd->add_option("--methods", eval.methods)->capture_default_str();
  eval_cmd->add_option("--seeds", eval.seeds, "explicit seed list, comma separated");
  eval_cmd->add_option("--n-seeds", eval.n_seeds, "seeds --seed, --seed+1, ...")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--fractions", eval.fractions, "sparsity sweep, e.g. 1.0,0.25");
  eval_cmd->add_option("--knn-k", eval.knn_k)->capture_default_str()->check(CLI::PositiveNumber);
  eval_cmd->add_option("--inner-cv", eval.inner_cv, "choose the step budget by inner cross-validation")
      ->capture_default_str();
  eval_cmd->add_option("--inner-folds", eval.inner_folds)->capture_default_str()->check(CLI::Range(2, 100));

  AlcCmd alc;
  auto* alc_cmd = app.add_subcommand("alc", "area under a learning curve");
  alc_cmd->add_option("--curve", alc.curve, "JSON array of {t, nauc}")->required();
  alc_cmd->add_option("--budget", alc.cfg.budget)->capture_default_str()->check(CLI::PositiveNumber);
  alc_cmd->add_option("--t0", alc.cfg.reference)->capture_default_str()->check(CLI::PositiveNumber);

  ReportCmd rep;
  auto* rep_cmd = app.add_subcommand("report", "print the summary table of an evaluate run");
  rep_cmd->add_option("--report", rep.report, "report.json (default <out>/report.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Config cfg;
    cfg.load(config_path);
    if (*gen_cmd) {
      gen.run(g);
    } else if (*train_cmd) {
      train.run(train_cmd, g, cfg);
    } else if (*sel_cmd) {
      sel.run(sel_cmd, g, cfg);
    } else if (*eval_cmd) {
      eval.run(eval_cmd, g, cfg);
    } else if (*alc_cmd) {
      alc.run();
    } else if (*rep_cmd) {
      rep.run(g);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
