#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "zap/csv.hpp"
#include "zap/evaluation.hpp"
#include "zap/io.hpp"

namespace zap {

// method -> fold group -> seed -> dataset -> {chosen, alc, oracle_alc, regret}
inline json records_to_json(const EvalReport& r, std::span<const FoldSpec> folds) {
  json by_fold = json::object();
  for (const auto& rec : r.records) {
    auto& cell = by_fold[folds[rec.fold].group][std::to_string(rec.seed)][rec.dataset_id];
    cell = {{"chosen", rec.chosen_id},
            {"alc", round6(rec.alc)},
            {"oracle_alc", round6(rec.oracle_alc)},
            {"regret", round6(rec.regret)}};
  }
  return by_fold;
}

inline json fits_to_json(const EvalReport& r) {
  json out = json::array();
  for (const auto& f : r.fits)
    out.push_back({{"fold", f.group},
                   {"seed", f.seed},
                   {"train_cells", f.train_cells},
                   {"triples", f.n_triples},
                   {"steps", f.steps},
                   {"test_row_reads_before_selection", f.test_row_reads}});
  return out;
}

inline json report_to_json(std::span<const EvalReport> reports, std::span<const FoldSpec> folds,
                           std::span<const SweepEntry> sweep = {}) {
  json doc;
  json methods = json::object();
  for (const auto& r : reports) methods[to_string(r.method)] = records_to_json(r, folds);
  doc["methods"] = methods;
  json fits = json::object();
  for (const auto& r : reports) fits[to_string(r.method)] = fits_to_json(r);
  doc["fits"] = fits;
  if (!reports.empty()) {
    json summary = json::array();
    for (const auto& s : summarize(reports))
      summary.push_back({{"method", s.method},
                         {"mean_regret", round6(s.mean_regret)},
                         {"std_regret", round6(s.std_regret)},
                         {"mean_rank", round6(s.mean_rank)},
                         {"std_rank", round6(s.std_rank)}});
    doc["summary"] = summary;
    // Learning-curve NAUC ranks need full curves, which a cost matrix lacks.
    doc["nauc_rank"] = "unavailable";
  }
  if (!sweep.empty()) {
    json sections = json::array();
    for (const auto& e : sweep) {
      std::size_t cells = 0;
      for (const auto& f : e.report.fits) cells += f.train_cells;
      sections.push_back({{"fraction", round6(e.fraction)},
                          {"mean_regret", round6(e.report.mean_regret())},
                          {"std_regret", round6(e.report.std_regret())},
                          {"train_cells_total", cells},
                          {"records", records_to_json(e.report, folds)},
                          {"fits", fits_to_json(e.report)}});
    }
    doc["sparsity_sweep"] = sections;
  }
  return doc;
}

inline void write_summary_csv(std::span<const EvalReport> reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "method,mean_regret,std_regret,mean_rank,std_rank\n";
  for (const auto& s : summarize(reports))
    out << s.method << ',' << csv::fixed6(s.mean_regret) << ',' << csv::fixed6(s.std_regret) << ','
        << csv::fixed6(s.mean_rank) << ',' << csv::fixed6(s.std_rank) << '\n';
}

inline void write_significance_csv(std::span<const EvalReport> reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "method_a,method_b,statistic,p_raw,p_holm\n";
  auto opt = [](const std::optional<double>& v) { return v ? csv::fixed6(*v) : std::string("NA"); };
  for (const auto& t : pairwise_significance(reports))
    out << t.a << ',' << t.b << ',' << opt(t.statistic) << ',' << opt(t.p_raw) << ',' << opt(t.p_holm) << '\n';
}

// One row per (method, fold, seed, dataset): raw material for box plots.
inline void write_records_csv(std::span<const EvalReport> reports, std::span<const FoldSpec> folds,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "method,fold,seed,dataset_id,chosen,alc,oracle_alc,regret\n";
  for (const auto& r : reports)
    for (const auto& rec : r.records)
      out << to_string(r.method) << ',' << folds[rec.fold].group << ',' << rec.seed << ',' << rec.dataset_id << ','
          << rec.chosen_id << ',' << csv::fixed6(rec.alc) << ',' << csv::fixed6(rec.oracle_alc) << ','
          << csv::fixed6(rec.regret) << '\n';
}

inline void write_sweep_csv(std::span<const SweepEntry> sweep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "fraction,mean_regret,std_regret\n";
  for (const auto& e : sweep)
    out << csv::fixed6(e.fraction) << ',' << csv::fixed6(e.report.mean_regret()) << ','
        << csv::fixed6(e.report.std_regret()) << '\n';
}

}  // namespace zap
