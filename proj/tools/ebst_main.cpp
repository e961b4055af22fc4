// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

// ebst: run self-training experiments, alpha sweeps and plot-data export.
//
//   ebst run --config exp.cfg --mode rebm --alpha 1.0 --seed 0,1,2 --out runs/
//   ebst run --config exp.cfg --sweep-alphas 0.8,0.9,1.0,1.1
//   ebst plot-data runs/*.json --out runs/tidy.csv
//   ebst gen-data --generator two_moons --source src.csv --target tgt.csv

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ebst/error.hpp"
#include "ebst/experiment.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& from_report,
                const std::vector<std::string>& sets, const ebst::ConfigMap& flag_overrides) {
  ebst::ConfigMap entries;
  if (!from_report.empty()) {
    std::ifstream in(from_report);
    if (!in) throw ebst::ConfigError("cannot open report " + from_report);
    const auto report = nlohmann::json::parse(in);
    entries = report.at("config").get<ebst::ConfigMap>();
  }
  if (!config_path.empty())
    for (const auto& [k, v] : ebst::read_config_file(config_path)) entries[k] = v;
  for (const auto& s : sets) {
    const auto parsed = ebst::parse_config_text(s);
    if (parsed.empty()) throw ebst::ConfigError("--set expects key=value, got '" + s + "'");
    for (const auto& [k, v] : parsed) entries[k] = v;
  }
  for (const auto& [k, v] : flag_overrides) entries[k] = v;

  const auto config = ebst::config_from_map(entries);
  config.validate();

  if (!config.sweep_alphas.empty()) {
    const auto sweep = ebst::alpha_sweep(config, config.sweep_alphas);
    std::cout << "sweep: " << sweep.rows.size() << " rows -> " << sweep.sweep_csv.string() << '\n';
    for (const auto& r : sweep.rows)
      std::cout << "  alpha=" << r.alpha << " seed=" << r.seed << " target_acc=" << r.final_target_acc << " ["
                << r.status << "]\n";
    return 0;
  }

  const auto result = ebst::run_experiment(config);
  for (const auto& run : result.runs)
    std::cout << run.run_id << ": status=" << run.status << " initial_target_acc=" << run.initial.mean_acc
              << " final_target_acc=" << run.final_eval.mean_acc << '\n';
  std::cout << "reports in " << config.out_dir << ", rows appended to " << result.runs_csv.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-constrained self-training for domain adaptation"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run seeded self-training experiments (or an alpha sweep)");
  std::string config_path, from_report, mode, out, seeds, sweep;
  double alpha = 0.0;
  int rounds = 0;
  std::vector<std::string> sets;
  run->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  run->add_option("--from-report", from_report, "Re-run the config embedded in a run report")
      ->check(CLI::ExistingFile);
  auto* mode_opt = run->add_option("--mode", mode, "cbst | crst-ls | rebm | lebm | anneal");
  auto* alpha_opt = run->add_option("--alpha", alpha, "Energy regularizer weight");
  auto* rounds_opt = run->add_option("--rounds", rounds, "Self-training rounds");
  auto* seed_opt = run->add_option("--seed", seeds, "Seed or comma-separated seeds");
  auto* out_opt = run->add_option("--out", out, "Output directory");
  auto* sweep_opt = run->add_option("--sweep-alphas", sweep, "Comma-separated alphas for a sweep");
  run->add_option("--set", sets, "Extra key=value overrides")->take_all();

  auto* plot = app.add_subcommand("plot-data", "Long-format CSV from run reports");
  std::vector<std::string> report_paths;
  std::string plot_out = "tidy.csv";
  plot->add_option("reports", report_paths, "Run report JSON files")->required();
  plot->add_option("--out", plot_out, "Output CSV");

  auto* gen = app.add_subcommand("gen-data", "Write a generated source/target pair as CSV");
  std::string gen_config, gen_src = "source.csv", gen_tgt = "target.csv";
  std::vector<std::string> gen_sets;
  bool hide = false;
  gen->add_option("--config", gen_config, "Config file (data.* keys are used)")->check(CLI::ExistingFile);
  gen->add_option("--set", gen_sets, "key=value overrides for data.* keys")->take_all();
  gen->add_option("--source", gen_src, "Source CSV path");
  gen->add_option("--target", gen_tgt, "Target CSV path");
  gen->add_flag("--hide-target-labels", hide, "Write -1 for every target label");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) {
      ebst::ConfigMap flags;
      if (*mode_opt) flags["train.mode"] = mode;
      if (*alpha_opt) {
        std::ostringstream s;
        s.precision(17);
        s << alpha;
        flags["train.alpha"] = s.str();
      }
      if (*rounds_opt) flags["train.rounds"] = std::to_string(rounds);
      if (*seed_opt) flags["run.seeds"] = seeds;
      if (*out_opt) flags["run.out"] = out;
      if (*sweep_opt) flags["run.sweep_alphas"] = sweep;
      return run_command(config_path, from_report, sets, flags);
    }
    if (*plot) {
      std::vector<std::filesystem::path> paths(report_paths.begin(), report_paths.end());
      const auto n = ebst::emit_plot_data(paths, plot_out);
      std::cout << n << " rows -> " << plot_out << '\n';
      return 0;
    }
    if (*gen) {
      ebst::ConfigMap entries;
      if (!gen_config.empty()) entries = ebst::read_config_file(gen_config);
      for (const auto& s : gen_sets)
        for (const auto& [k, v] : ebst::parse_config_text(s)) entries[k] = v;
      const auto cfg = ebst::config_from_map(entries);
      const auto data = ebst::make_datasets(cfg.data);
      ebst::write_csv(data.source, gen_src);
      if (hide)
        ebst::write_csv(data.target, gen_tgt);
      else
        ebst::write_csv(ebst::DomainDataset(data.target.features(), ebst::Evaluator::target_truth(data.target),
                                            data.target.num_classes()),
                        gen_tgt);
      std::cout << "wrote " << gen_src << " (" << data.source.size() << " rows) and " << gen_tgt << " ("
                << data.target.size() << " rows)\n";
      return 0;
    }
  } catch (const ebst::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ebst::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
