// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

#include "ebst/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "ebst/error.hpp"

namespace ebst {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

// Shortest representation that parses back to the same double.
std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const auto s = trim(raw);
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("bad value '" + raw + "' for " + key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const auto s = trim(raw);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("bad boolean '" + raw + "' for " + key);
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& raw) {
  std::vector<T> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) out.push_back(parse_number<T>(key, item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<T>)
      s += fmt(v[i]);
    else
      s += std::to_string(v[i]);
  }
  return s;
}

std::string kl_name(KlDirection d) { return d == KlDirection::true_to_pred ? "true_to_pred" : "pred_to_true"; }

KlDirection parse_kl(const std::string& raw) {
  const auto s = trim(raw);
  if (s == "true_to_pred") return KlDirection::true_to_pred;
  if (s == "pred_to_true") return KlDirection::pred_to_true;
  throw ConfigError("metrics.kl_direction must be true_to_pred or pred_to_true");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = [] {
    std::map<std::string, Field> m;
    auto num = [&m](const std::string& key, auto member) {
      using T = std::remove_reference_t<decltype(std::invoke(member, std::declval<ExperimentConfig&>()))>;
      m[key] = {[key, member](ExperimentConfig& c, const std::string& v) {
                  std::invoke(member, c) = parse_number<T>(key, v);
                },
                [member](const ExperimentConfig& c) {
                  const T v = std::invoke(member, const_cast<ExperimentConfig&>(c));
                  if constexpr (std::is_floating_point_v<T>)
                    return fmt(v);
                  else
                    return std::to_string(v);
                }};
    };
    auto str = [&m](const std::string& key, auto member) {
      m[key] = {[member](ExperimentConfig& c, const std::string& v) { std::invoke(member, c) = trim(v); },
                [member](const ExperimentConfig& c) { return std::invoke(member, const_cast<ExperimentConfig&>(c)); }};
    };
    auto flag = [&m](const std::string& key, auto member) {
      m[key] = {[key, member](ExperimentConfig& c, const std::string& v) { std::invoke(member, c) = parse_bool(key, v); },
                [member](const ExperimentConfig& c) {
                  return std::string(std::invoke(member, const_cast<ExperimentConfig&>(c)) ? "true" : "false");
                }};
    };

    str("data.generator", [](ExperimentConfig& c) -> auto& { return c.data.generator; });
    num("data.n_source", [](ExperimentConfig& c) -> auto& { return c.data.n_source; });
    num("data.n_target", [](ExperimentConfig& c) -> auto& { return c.data.n_target; });
    num("data.noise", [](ExperimentConfig& c) -> auto& { return c.data.noise; });
    num("data.rotation", [](ExperimentConfig& c) -> auto& { return c.data.rotation; });
    num("data.classes", [](ExperimentConfig& c) -> auto& { return c.data.classes; });
    m["data.shift"] = {[](ExperimentConfig& c, const std::string& v) { c.data.shift = parse_list<double>("data.shift", v); },
                       [](const ExperimentConfig& c) { return join(c.data.shift); }};
    num("data.seed", [](ExperimentConfig& c) -> auto& { return c.data.seed; });
    str("data.source_csv", [](ExperimentConfig& c) -> auto& { return c.data.source_csv; });
    str("data.target_csv", [](ExperimentConfig& c) -> auto& { return c.data.target_csv; });

    m["model.hidden"] = {[](ExperimentConfig& c, const std::string& v) { c.hidden = parse_list<int>("model.hidden", v); },
                         [](const ExperimentConfig& c) { return join(c.hidden); }};

    m["train.mode"] = {[](ExperimentConfig& c, const std::string& v) { c.train.mode = parse_mode(trim(v)); },
                       [](const ExperimentConfig& c) { return std::string(to_string(c.train.mode)); }};
    num("train.rounds", [](ExperimentConfig& c) -> auto& { return c.rounds; });
    num("train.alpha", [](ExperimentConfig& c) -> auto& { return c.train.alpha; });
    num("train.epsilon", [](ExperimentConfig& c) -> auto& { return c.train.epsilon; });
    num("train.portion_start", [](ExperimentConfig& c) -> auto& { return c.train.portion_start; });
    num("train.portion_step", [](ExperimentConfig& c) -> auto& { return c.train.portion_step; });
    num("train.portion_max", [](ExperimentConfig& c) -> auto& { return c.train.portion_max; });
    num("train.lr", [](ExperimentConfig& c) -> auto& { return c.train.sgd.lr; });
    num("train.momentum", [](ExperimentConfig& c) -> auto& { return c.train.sgd.momentum; });
    num("train.weight_decay", [](ExperimentConfig& c) -> auto& { return c.train.sgd.weight_decay; });
    num("train.epochs", [](ExperimentConfig& c) -> auto& { return c.train.epochs; });
    num("train.pretrain_epochs", [](ExperimentConfig& c) -> auto& { return c.pretrain_epochs; });
    num("train.pretrain_lr", [](ExperimentConfig& c) -> auto& { return c.pretrain_lr; });
    flag("train.step2_energy", [](ExperimentConfig& c) -> auto& { return c.train.step2_energy; });
    flag("train.freeze_lambdas", [](ExperimentConfig& c) -> auto& { return c.train.freeze_lambdas; });
    m["train.estimator"] = {[](ExperimentConfig& c, const std::string& v) { c.train.estimator = parse_estimator(trim(v)); },
                            [](const ExperimentConfig& c) { return std::string(to_string(c.train.estimator)); }};
    num("train.sgld_steps", [](ExperimentConfig& c) -> auto& { return c.train.sgld.steps; });
    num("train.sgld_step_size", [](ExperimentConfig& c) -> auto& { return c.train.sgld.step_size; });
    num("train.sgld_noise", [](ExperimentConfig& c) -> auto& { return c.train.sgld.noise_scale; });
    num("train.divergence_limit", [](ExperimentConfig& c) -> auto& { return c.train.divergence_limit; });

    m["metrics.kl_direction"] = {[](ExperimentConfig& c, const std::string& v) { c.train.kl_direction = parse_kl(v); },
                                 [](const ExperimentConfig& c) { return kl_name(c.train.kl_direction); }};

    m["run.seeds"] = {[](ExperimentConfig& c, const std::string& v) { c.seeds = parse_list<std::uint64_t>("run.seeds", v); },
                      [](const ExperimentConfig& c) { return join(c.seeds); }};
    str("run.out", [](ExperimentConfig& c) -> auto& { return c.out_dir; });
    m["run.sweep_alphas"] = {
        [](ExperimentConfig& c, const std::string& v) { c.sweep_alphas = parse_list<double>("run.sweep_alphas", v); },
        [](const ExperimentConfig& c) { return join(c.sweep_alphas); }};
    return m;
  }();
  return f;
}

std::string fingerprint(const DomainDataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t i = 0; i < ds.size(); ++i) {
    feed(ds.features()[i].data(), ds.features()[i].size() * sizeof(double));
    feed(&ds.labels()[i], sizeof(int));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string make_run_id(const ExperimentConfig& c, std::uint64_t seed) {
  return std::string(to_string(c.train.mode)) + "-a" + fmt(c.train.alpha) + "-s" + std::to_string(seed);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::size_t worker_count(std::size_t jobs) {
  std::size_t n = jobs;
  if (const char* env = std::getenv("EBST_THREADS")) {
    const auto cap = std::strtol(env, nullptr, 10);
    if (cap > 0) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return std::max<std::size_t>(1, n);
}

}  // namespace

void ExperimentConfig::validate() const {
  train.validate();
  if (rounds < 1) throw ConfigError("train.rounds must be >= 1");
  if (pretrain_epochs < 0) throw ConfigError("train.pretrain_epochs must be >= 0");
  if (!(pretrain_lr >= 0.0)) throw ConfigError("train.pretrain_lr must be >= 0");
  if (seeds.empty()) throw ConfigError("run.seeds needs at least one seed");
  if (std::any_of(hidden.begin(), hidden.end(), [](int h) { return h <= 0; }))
    throw ConfigError("model.hidden widths must be positive");
  if (data.generator == "csv") {
    for (const auto& p : {data.source_csv, data.target_csv})
      if (p.empty() || !fs::exists(p)) throw ConfigError("CSV file not found: '" + p + "'");
  } else if (data.generator != "two_moons" && data.generator != "gaussian_shift") {
    throw ConfigError("data.generator must be two_moons, gaussian_shift or csv");
  }
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", lineno);
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

ConfigMap read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ExperimentConfig apply_config(ExperimentConfig base, const ConfigMap& entries) {
  const auto& f = fields();
  for (const auto& [key, value] : entries) {
    const auto it = f.find(key);
    if (it == f.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(base, value);
  }
  return base;
}

ExperimentConfig config_from_map(const ConfigMap& entries) { return apply_config(ExperimentConfig{}, entries); }

ConfigMap config_to_map(const ExperimentConfig& config) {
  ConfigMap out;
  for (const auto& [key, field] : fields()) out[key] = field.get(config);
  return out;
}

std::string config_to_text(const ExperimentConfig& config) {
  std::string s;
  for (const auto& [k, v] : config_to_map(config)) s += k + " = " + v + "\n";
  return s;
}

Datasets make_datasets(const DataSpec& spec) {
  if (spec.generator == "two_moons") {
    auto src = gen_two_moons(spec.n_source, spec.noise, stream_seed(spec.seed, "data/source"));
    auto tgt = rotate_domain(gen_two_moons(spec.n_target, spec.noise, stream_seed(spec.seed, "data/target")),
                             spec.rotation);
    return {std::move(src), std::move(tgt)};
  }
  if (spec.generator == "gaussian_shift") {
    auto src = gen_gaussian_shift(spec.n_source, spec.classes, spec.shift, spec.seed).first;
    auto tgt = gen_gaussian_shift(spec.n_target, spec.classes, spec.shift, spec.seed).second;
    return {std::move(src), std::move(tgt)};
  }
  if (spec.generator == "csv") {
    auto src = load_csv(spec.source_csv);
    if (src.tag() != DomainTag::source) throw ConfigError("source CSV contains unlabeled rows");
    auto tgt = load_csv(spec.target_csv, src.num_classes()).as_target();
    if (src.dim() != tgt.dim() && !tgt.empty()) throw ConfigError("source and target CSV dimensions differ");
    return {std::move(src), std::move(tgt)};
  }
  throw ConfigError("unknown generator '" + spec.generator + "'");
}

json to_json(const EvalReport& r) {
  return {{"per_class_acc", r.per_class_acc}, {"mean_acc", r.mean_acc},       {"marginal_kl", r.marginal_kl},
          {"mean_energy", r.mean_energy},     {"min_energy", r.min_energy},   {"max_energy", r.max_energy}};
}

json to_json(const RoundReport& r) {
  return {{"round", r.round},
          {"portion", r.portion},
          {"lambdas", r.lambdas},
          {"step1_loss_before", r.step1_loss_before},
          {"step1_loss_after", r.step1_loss_after},
          {"step2_loss_trace", r.step2_loss_trace},
          {"step2_final_loss", r.step2_final_loss()},
          {"terms",
           {{"source_ce", r.final_terms.source_ce},
            {"target_term", r.final_terms.target_term},
            {"energy_term", r.final_terms.energy_term},
            {"total", r.final_terms.total}}},
          {"mean_target_energy", r.mean_target_energy},
          {"selection_fraction", r.selection_fraction},
          {"beta", r.beta},
          {"lower_bound", r.lower_bound},
          {"source_acc", r.source_acc},
          {"target_acc", r.target_acc},
          {"marginal_kl", r.marginal_kl},
          {"checks",
           {{"step1_nonincreasing", r.step1_nonincreasing},
            {"step2_nonincreasing", r.step2_nonincreasing},
            {"bound_holds", r.bound_holds}}},
          {"renormalized_labels", r.renormalized_labels}};
}

json to_json(const CemTrace& t) {
  json phases = json::array();
  for (const auto& p : t.phases) phases.push_back({{"round", p.round}, {"step", std::string(1, p.step)}, {"rcml", p.rcml}});
  return {{"phases", phases}, {"ascending", t.ascending}};
}

RunOutcome run_seed(const ExperimentConfig& config, const Datasets& data, std::uint64_t seed) {
  RunOutcome out;
  out.run_id = make_run_id(config, seed);
  out.seed = seed;
  out.status = "ok";

  std::vector<int> dims{data.source.dim()};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(data.source.num_classes());
  auto params = ModelParams::glorot(dims, stream_seed(seed, "init"));

  auto pre_sgd = config.train.sgd;
  pre_sgd.lr = config.pretrain_lr;
  auto pre = pretrain_source(params, data.source, pre_sgd, config.pretrain_epochs);
  out.initial = Evaluator::evaluate(pre.params, data.target, config.train.kl_direction);
  const auto pre_source = Evaluator::evaluate(pre.params, data.source, config.train.kl_direction);

  auto state = TrainState::initial(pre.params, config.train, seed);
  try {
    for (int r = 0; r < config.rounds; ++r) {
      auto res = run_round(state, data.source, data.target);
      state = std::move(res.state);
      out.rounds.push_back(std::move(res.report));
    }
  } catch (const NumericalError& e) {
    out.status = "diverged";
    out.message = e.what();
  }
  out.final_eval = Evaluator::evaluate(state.params, data.target, config.train.kl_direction);

  json rounds = json::array();
  int renormalized = 0;
  for (const auto& r : out.rounds) {
    rounds.push_back(to_json(r));
    renormalized += r.renormalized_labels;
  }
  // Embedded config reproduces exactly this run.
  auto own = config;
  own.seeds = {seed};
  out.report = {
      {"schema", kReportSchema},
      {"run_id", out.run_id},
      {"seed", seed},
      {"status", out.status},
      {"config", config_to_map(own)},
      {"dataset",
       {{"generator", config.data.generator},
        {"n_source", data.source.size()},
        {"n_target", data.target.size()},
        {"dim", data.source.dim()},
        {"classes", data.source.num_classes()},
        {"source_fingerprint", fingerprint(data.source)},
        {"target_fingerprint", fingerprint(data.target)}}},
      {"pretrain",
       {{"epochs", config.pretrain_epochs},
        {"lr", config.pretrain_lr},
        {"final_source_ce", pre.loss_trace.empty() ? 0.0 : pre.loss_trace.back()},
        {"source_acc", pre_source.mean_acc}}},
      {"initial", to_json(out.initial)},
      {"rounds", rounds},
      {"cem", out.rounds.empty() ? json(nullptr) : to_json(cem_trace(out.rounds))},
      {"final", to_json(out.final_eval)},
      {"open_questions",
       {{"renormalized_soft_labels", renormalized},
        {"step2_energy_term", config.train.step2_energy},
        {"lambdas_recomputed_each_round", !config.train.freeze_lambdas},
        {"kl_direction", kl_name(config.train.kl_direction)}}}};
  if (!out.message.empty()) out.report["message"] = out.message;
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto data = make_datasets(config.data);
  if (data.source.empty()) throw ConfigError("source set is empty");

  ExperimentResult result;
  result.runs.resize(config.seeds.size());
  std::vector<std::string> started(config.seeds.size());
  std::vector<double> wall(config.seeds.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      started[i] = iso_now();
      const auto t0 = std::chrono::steady_clock::now();
      result.runs[i] = run_seed(config, data, config.seeds[i]);
      wall[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const auto n_workers = worker_count(config.seeds.size());
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  // Single writer from here on, in seed order.
  const fs::path out_dir(config.out_dir);
  fs::create_directories(out_dir);
  result.runs_csv = out_dir / "runs.csv";
  const bool fresh = !fs::exists(result.runs_csv);
  std::ofstream csv(result.runs_csv, std::ios::app | std::ios::binary);
  if (!csv) throw ConfigError("cannot write " + result.runs_csv.string());
  if (fresh) {
    for (std::size_t c = 0; c < kRunsCsvColumns.size(); ++c) csv << (c ? "," : "") << kRunsCsvColumns[c];
    csv << '\n';
  }
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const auto& run = result.runs[i];
    const auto path = out_dir / (run.run_id + ".json");
    write_text(path, run.report.dump(2) + "\n");
    write_text(out_dir / (run.run_id + ".meta.json"),
               json{{"run_id", run.run_id}, {"started", started[i]}, {"wall_seconds", wall[i]}}.dump(2) + "\n");
    result.report_files.push_back(path);
    for (const auto& r : run.rounds) {
      csv << run.run_id << ',' << run.seed << ',' << to_string(config.train.mode) << ',' << fmt(config.train.alpha)
          << ',' << r.round << ',' << fmt(r.step1_loss_after) << ',' << fmt(r.step2_final_loss()) << ','
          << fmt(r.mean_target_energy) << ',' << fmt(r.selection_fraction) << ',' << fmt(r.beta) << ','
          << fmt(r.lower_bound) << ',' << fmt(r.source_acc) << ',' << fmt(r.target_acc) << ','
          << fmt(r.marginal_kl) << '\n';
    }
  }
  return result;
}

SweepResult alpha_sweep(const ExperimentConfig& config, const std::vector<double>& alphas) {
  if (alphas.empty()) throw ConfigError("alpha sweep needs at least one alpha");
  SweepResult out;
  for (double a : alphas) {
    if (std::find(out.alphas.begin(), out.alphas.end(), a) != out.alphas.end()) {
      std::cerr << "warning: duplicate alpha " << fmt(a) << " ignored\n";
      continue;
    }
    out.alphas.push_back(a);
  }

  for (double a : out.alphas) {
    auto cfg = config;
    cfg.train.alpha = a;
    const auto res = run_experiment(cfg);
    for (const auto& run : res.runs) {
      out.rows.push_back({a, run.seed, std::string(to_string(cfg.train.mode)), run.final_eval.mean_acc,
                          run.rounds.empty() ? std::nan("") : run.rounds.back().source_acc,
                          run.final_eval.marginal_kl, run.status});
    }
  }

  out.sweep_csv = fs::path(config.out_dir) / "sweep.csv";
  std::ofstream csv(out.sweep_csv, std::ios::binary);
  if (!csv) throw ConfigError("cannot write " + out.sweep_csv.string());
  for (std::size_t c = 0; c < kSweepCsvColumns.size(); ++c) csv << (c ? "," : "") << kSweepCsvColumns[c];
  csv << '\n';
  for (const auto& r : out.rows)
    csv << fmt(r.alpha) << ',' << r.seed << ',' << r.mode << ',' << fmt(r.final_target_acc) << ','
        << fmt(r.final_source_acc) << ',' << fmt(r.final_marginal_kl) << ',' << r.status << '\n';
  return out;
}

std::size_t emit_plot_data(const std::vector<fs::path>& reports, const fs::path& out) {
  std::vector<std::string> rows;
  std::size_t loaded = 0;
  for (const auto& path : reports) {
    json report;
    try {
      std::ifstream in(path);
      if (!in) throw std::runtime_error("cannot open");
      report = json::parse(in);
      if (!report.contains("run_id") || !report.contains("rounds")) throw std::runtime_error("not a run report");
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << path.string() << ": " << e.what() << '\n';
      continue;
    }
    ++loaded;
    const auto run_id = report["run_id"].get<std::string>();
    for (const auto& r : report["rounds"]) {
      const auto round = r["round"].get<int>();
      for (const auto& m : kPlotMetrics) {
        const auto& v = r[m];
        rows.push_back(run_id + ',' + std::to_string(round) + ',' + m + ',' +
                       (v.is_number() ? fmt(v.get<double>()) : std::string("nan")));
      }
    }
  }
  if (loaded == 0) throw ConfigError("no readable run reports");
  std::ofstream csv(out, std::ios::binary);
  if (!csv) throw ConfigError("cannot write " + out.string());
  csv << "run_id,round,metric_name,value\n";
  for (const auto& r : rows) csv << r << '\n';
  return rows.size();
}

}  // namespace ebst
