// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

// Seeded experiment runs: config parsing, run reports, alpha sweeps and
// long-format plot data.
//
// Config files are flat `key = value` lines with dotted keys; `#` starts a
// comment and lists are comma-separated:
//
//   train.mode  = rebm
//   train.alpha = 1.0
//   run.seeds   = 0,1,2,3,4

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ebst/datagen.hpp"
#include "ebst/selftrain.hpp"
#include "json.hpp"

namespace ebst {

inline constexpr int kReportSchema = 1;

struct DataSpec {
  std::string generator = "two_moons";  // two_moons | gaussian_shift | csv
  int n_source = 400;
  int n_target = 400;
  double noise = 0.1;
  double rotation = 45.0;
  int classes = 3;                        // gaussian_shift only
  std::vector<double> shift{10.0, 10.0};  // gaussian_shift only
  std::uint64_t seed = 0;
  std::string source_csv;
  std::string target_csv;

  bool operator==(const DataSpec&) const = default;
};

struct ExperimentConfig {
  DataSpec data;
  std::vector<int> hidden{32, 32};
  TrainConfig train;
  int rounds = 6;
  int pretrain_epochs = 300;
  /// Source-only pretraining step size (momentum and decay follow train).
  double pretrain_lr = 0.05;
  std::vector<std::uint64_t> seeds{0};
  std::string out_dir = "runs";
  std::vector<double> sweep_alphas;

  /// Throws ConfigError (including for missing CSV files).
  void validate() const;
};

using ConfigMap = std::map<std::string, std::string>;

/// Parses key = value text. Throws ParseError on malformed lines.
ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::filesystem::path& path);

/// Applies `entries` on top of `base`. Throws ConfigError on unknown keys
/// or bad values.
ExperimentConfig apply_config(ExperimentConfig base, const ConfigMap& entries);
ExperimentConfig config_from_map(const ConfigMap& entries);

/// Every key with its resolved value; config_from_map inverts it exactly.
ConfigMap config_to_map(const ExperimentConfig& config);
std::string config_to_text(const ExperimentConfig& config);

struct Datasets {
  DomainDataset source;
  DomainDataset target;
};

/// Builds the source and target sets named by `spec`. Both are pure
/// functions of the spec.
Datasets make_datasets(const DataSpec& spec);

/// Everything one seed produces.
struct RunOutcome {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string status;  // "ok" or "diverged"
  std::string message;
  EvalReport initial;  // source-only model, before any round
  std::vector<RoundReport> rounds;
  EvalReport final_eval;
  nlohmann::json report;  // the JSON written to disk
};

/// Runs one seed entirely in memory.
RunOutcome run_seed(const ExperimentConfig& config, const Datasets& data, std::uint64_t seed);

struct ExperimentResult {
  std::vector<RunOutcome> runs;
  std::vector<std::filesystem::path> report_files;
  std::filesystem::path runs_csv;
};

/// For each seed: the full self-training loop, one `<run_id>.json` report,
/// a `<run_id>.meta.json` timing sidecar and one row per round appended to
/// `runs.csv` in config.out_dir. Seeds run on up to EBST_THREADS workers.
ExperimentResult run_experiment(const ExperimentConfig& config);

inline const std::vector<std::string> kRunsCsvColumns = {
    "run_id",      "seed",         "mode",       "alpha",      "round",
    "step1_loss",  "step2_final_loss", "mean_target_energy", "selection_fraction",
    "beta",        "lower_bound",  "source_acc", "target_acc", "marginal_kl"};

inline const std::vector<std::string> kSweepCsvColumns = {
    "alpha", "seed", "mode", "final_target_acc", "final_source_acc", "final_marginal_kl", "status"};

struct SweepRow {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::string mode;
  double final_target_acc = 0.0;
  double final_source_acc = 0.0;
  double final_marginal_kl = 0.0;
  std::string status;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<double> alphas;  // deduplicated, first-seen order
  std::filesystem::path sweep_csv;
};

/// One experiment per distinct alpha; writes `sweep.csv` in config.out_dir.
/// Duplicate alphas are dropped with a warning on stderr.
SweepResult alpha_sweep(const ExperimentConfig& config, const std::vector<double>& alphas);

/// Metric names emitted by emit_plot_data, in output order.
inline const std::vector<std::string> kPlotMetrics = {
    "target_acc", "source_acc", "marginal_kl", "mean_target_energy", "selection_fraction", "step2_final_loss"};

/// Long-format rows run_id,round,metric,value from run reports. Unreadable
/// reports are skipped with a warning; throws ConfigError only if every
/// report was skipped. Returns the number of data rows written.
std::size_t emit_plot_data(const std::vector<std::filesystem::path>& reports, const std::filesystem::path& out);

nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const RoundReport& r);
nlohmann::json to_json(const CemTrace& t);

}  // namespace ebst
