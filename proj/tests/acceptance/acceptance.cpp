// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks 1-11. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Usage: ebst_acceptance [output_dir] [--only N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ebst/energy.hpp"
#include "ebst/experiment.hpp"
#include "ebst/pseudolabel.hpp"
#include "ebst/selftrain.hpp"

using namespace ebst;
namespace fs = std::filesystem;

namespace {

int failures = 0;
int only = 0;  // 0 runs every criterion

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  if (only != 0 && only != id) return;
  std::printf("criterion %2d: %s  %s | %s\n", id, pass ? "PASS" : "FAIL", what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string num(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

std::vector<double> random_prob(Rng& rng, std::size_t k) {
  std::vector<double> v(k);
  double s = 0.0;
  for (auto& x : v) s += (x = -std::log(1.0 - rng.uniform()) + 1e-12);
  for (auto& x : v) x /= s;
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<std::uint64_t> kSeeds{0, 1, 2, 3, 4};

void annealing() {
  const double expected[] = {10.0, 5.0, 2.0, 10.0 / 10.0, 10.0 / 17.0, 10.0 / 26.0, 0.0};
  double worst = 0.0;
  for (int n = 0; n <= 6; ++n) worst = std::max(worst, std::abs(anneal_beta(n) - expected[n]));
  report(1, worst <= 1e-12, "annealing schedule N=0..6", "max abs error " + num(worst));
}

void smoothing() {
  const auto s = smooth_label(PseudoLabel::one_hot(3, 1), 0.1, 3);
  const bool pass = s.vector == std::vector<double>{0.05, 0.9, 0.05};
  report(2, pass, "smooth_label([0,1,0], 0.1, 3) == [0.05, 0.9, 0.05]",
         "got [" + num(s.vector[0], 17) + ", " + num(s.vector[1], 17) + ", " + num(s.vector[2], 17) + "]");
}

void solver_optimality() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(stream_seed(2026, "acceptance/solver"));
  int agree = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    const std::size_t k = 2 + static_cast<std::size_t>(i % 5);
    const auto prob = random_prob(rng, k);
    LambdaVector lam;
    for (std::size_t j = 0; j < k; ++j) lam.values.push_back(rng.uniform(1e-3, 1.0));
    const auto label = hard_pseudo_label(prob, lam);
    double best = 0.0;  // zero vector
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> v(k, 0.0);
      v[j] = 1.0;
      best = std::min(best, pseudo_label_objective(v, prob, lam));
    }
    if (pseudo_label_objective(label.vector, prob, lam) == best) ++agree;
  }
  const double secs = seconds_since(t0);
  report(3, agree == trials && secs < 5.0, "solver attains brute-force minimum, K in 2..6",
         std::to_string(agree) + "/" + std::to_string(trials) + " agree, " + num(secs, 3) + " s");
}

void energy_identities() {
  Rng rng(stream_seed(2026, "acceptance/energy"));
  double shift = 0.0, grad = 0.0, soft = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + static_cast<std::size_t>(i % 6);
    std::vector<double> z(k);
    for (auto& v : z) v = rng.uniform(-20, 20);
    const double c = rng.uniform(-20, 20);
    auto zc = z;
    for (auto& v : zc) v += c;
    shift = std::max(shift, std::abs(energy(zc) - (energy(z) - c)));
    const auto g = energy_grad_logits(z);
    const auto p = softmax(z);
    const auto pc = softmax(zc);
    for (std::size_t j = 0; j < k; ++j) {
      grad = std::max(grad, std::abs(g[j] + p[j]));
      soft = std::max(soft, std::abs(p[j] - pc[j]));
    }
  }
  report(4, shift <= 1e-10 && grad <= 1e-10 && soft <= 1e-12, "energy shift law, gradient, softmax invariance",
         "max errors " + num(shift) + ", " + num(grad) + ", " + num(soft));
}

void gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.data.n_source = 10;
  cfg.data.n_target = 10;
  const auto data = make_datasets(cfg.data);
  std::vector<int> dims{2};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(2);
  const auto params = ModelParams::glorot(dims, stream_seed(0, "init"));

  double worst = 0.0;
  std::string worst_mode;
  for (Mode m : {Mode::cbst, Mode::crst_ls, Mode::rebm, Mode::lebm, Mode::anneal}) {
    auto tc = cfg.train;
    tc.mode = m;
    auto state = TrainState::initial(params, tc, 0);
    state.portion = 1.0;
    const auto step1 = step1_generate(state, data.target);
    const double beta = m == Mode::anneal ? anneal_beta(1) : 0.0;
    const auto obj = [&](const ModelParams& w) {
      return total_objective(w, data.source, data.target, step1.labels, step1.lambdas, tc.alpha, m, beta).total;
    };
    const auto analytic =
        objective_gradient(params, data.source, data.target, step1.labels, step1.lambdas, tc.alpha, m, beta);
    auto p = params;
    const double h = 1e-5;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double v = params.get(i);
      p.set(i, v + h);
      const double up = obj(p);
      p.set(i, v - h);
      const double down = obj(p);
      p.set(i, v);
      const double numeric = (up - down) / (2 * h);
      const double a = analytic.grads.get(i);
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      if (rel > worst) {
        worst = rel;
        worst_mode = std::string(to_string(m));
      }
    }
  }
  const double secs = seconds_since(t0);
  report(5, worst < 1e-4 && secs < 30.0, "analytic vs central-difference gradients, all modes",
         "worst relative error " + num(worst) + " (" + worst_mode + "), " + std::to_string(params.size()) +
             " parameters, " + num(secs, 3) + " s");
}

void convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.train.mode = Mode::rebm;
  cfg.train.portion_step = 0.0;
  cfg.train.freeze_lambdas = true;
  const auto data = make_datasets(cfg.data);
  const auto run = run_seed(cfg, data, 0);

  std::vector<double> seq;
  double min_gap = INFINITY;
  for (const auto& r : run.rounds) {
    seq.push_back(r.step1_loss_before);
    seq.push_back(r.step1_loss_after);
    seq.insert(seq.end(), r.step2_loss_trace.begin(), r.step2_loss_trace.end());
    for (double v : {r.step1_loss_before, r.step1_loss_after}) min_gap = std::min(min_gap, v - r.lower_bound);
    for (double v : r.step2_loss_trace) min_gap = std::min(min_gap, v - r.lower_bound);
  }
  double worst_rise = 0.0;
  for (std::size_t i = 1; i < seq.size(); ++i) worst_rise = std::max(worst_rise, seq[i] - seq[i - 1]);
  const bool monotone = worst_rise <= 1e-6;
  const bool bounded = min_gap >= 0.0;
  const double secs = seconds_since(t0);
  report(6, run.status == "ok" && monotone && bounded && secs < 60.0,
         "objective non-increasing and above the log-threshold bound (rebm, fixed p)",
         "rounds " + std::to_string(run.rounds.size()) + ", largest rise " + num(worst_rise) +
             (monotone ? " (ok)" : " (violated)") + ", min(loss - bound) " + num(min_gap) +
             (bounded ? " (ok)" : " (violated)") + ", J " + num(seq.front()) + " -> " + num(seq.back()) + ", " +
             num(secs, 3) + " s");
}

void mode_equivalence() {
  ExperimentConfig a;
  a.train.mode = Mode::rebm;
  a.train.alpha = 0.0;
  a.train.epsilon = 0.0;
  auto b = a;
  b.train.mode = Mode::cbst;
  const auto data = make_datasets(a.data);
  bool same = true;
  for (std::uint64_t s : {0, 1}) {
    const auto ra = run_seed(a, data, s);
    const auto rb = run_seed(b, data, s);
    same = same && ra.report["rounds"] == rb.report["rounds"] && ra.report["final"] == rb.report["final"] &&
           ra.report["cem"] == rb.report["cem"];
  }
  report(7, same, "rebm with alpha=0 reproduces cbst", same ? "round traces identical for seeds 0,1" : "traces differ");
}

struct ModeRuns {
  std::vector<double> final_acc;
  std::vector<double> initial_acc;
  std::vector<double> kl_first;
  std::vector<double> kl_last;
  std::vector<RunOutcome> runs;
};

ModeRuns run_mode(Mode mode, const Datasets& data) {
  ExperimentConfig cfg;
  cfg.train.mode = mode;
  ModeRuns out;
  for (auto s : kSeeds) {
    auto r = run_seed(cfg, data, s);
    out.final_acc.push_back(r.final_eval.mean_acc);
    out.initial_acc.push_back(r.initial.mean_acc);
    out.kl_first.push_back(r.rounds.empty() ? NAN : r.rounds.front().marginal_kl);
    out.kl_last.push_back(r.rounds.empty() ? NAN : r.rounds.back().marginal_kl);
    out.runs.push_back(std::move(r));
  }
  return out;
}

void adaptation(const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = make_datasets(ExperimentConfig{}.data);
  const auto cbst = run_mode(Mode::cbst, data);
  const auto rebm = run_mode(Mode::rebm, data);
  const auto lebm = run_mode(Mode::lebm, data);

  std::ofstream csv(out_dir / "adaptation_sweep.csv");
  for (std::size_t c = 0; c < kSweepCsvColumns.size(); ++c) csv << (c ? "," : "") << kSweepCsvColumns[c];
  csv << '\n';
  auto rows = [&](const std::string& mode, const ModeRuns& m, bool initial) {
    for (std::size_t i = 0; i < kSeeds.size(); ++i) {
      const auto& r = m.runs[i];
      csv << "1," << kSeeds[i] << ',' << mode << ',' << num(initial ? r.initial.mean_acc : r.final_eval.mean_acc, 17)
          << ',' << num(r.rounds.empty() ? NAN : r.rounds.back().source_acc, 17) << ','
          << num(initial ? r.initial.marginal_kl : r.final_eval.marginal_kl, 17) << ',' << r.status << '\n';
    }
  };
  rows("source-only", cbst, true);
  rows("cbst", cbst, false);
  rows("rebm", rebm, false);
  rows("lebm", lebm, false);

  const double base = mean(cbst.initial_acc);
  const double c = mean(cbst.final_acc), r = mean(rebm.final_acc), l = mean(lebm.final_acc);
  const bool pass = r >= base && l >= base && r >= c - 0.01 && l >= c - 0.01;
  report(8, pass && seconds_since(t0) < 300.0, "rebm and lebm >= source-only and >= cbst - 1pp (5 seeds)",
         "source-only " + num(base, 4) + ", cbst " + num(c, 4) + ", rebm " + num(r, 4) + ", lebm " + num(l, 4) +
             ", " + num(seconds_since(t0), 3) + " s");

  bool kl_ok = true;
  std::string kls;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    kl_ok = kl_ok && rebm.kl_last[i] <= rebm.kl_first[i];
    kls += (i ? "; " : "") + num(rebm.kl_first[i], 3) + "->" + num(rebm.kl_last[i], 3);
  }
  report(9, kl_ok, "rebm marginal KL at the final round <= round 0, each seed", "per seed " + kls);
}

void alpha_sensitivity(const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.train.mode = Mode::rebm;
  cfg.seeds = kSeeds;
  cfg.out_dir = (out_dir / "alpha_sweep").string();
  fs::remove_all(cfg.out_dir);
  const auto sweep = alpha_sweep(cfg, {0.8, 0.9, 1.0, 1.1});
  std::vector<double> per_alpha;
  std::string detail;
  for (double a : sweep.alphas) {
    std::vector<double> acc;
    for (const auto& r : sweep.rows)
      if (r.alpha == a) acc.push_back(r.final_target_acc);
    per_alpha.push_back(mean(acc));
    detail += "a=" + num(a, 2) + ":" + num(per_alpha.back(), 4) + " ";
  }
  const auto [lo, hi] = std::minmax_element(per_alpha.begin(), per_alpha.end());
  const double spread = *hi - *lo;
  report(10, spread <= 0.05, "alpha in {0.8,0.9,1.0,1.1}: max-min mean accuracy <= 5pp",
         detail + "spread " + num(spread, 4) + ", " + num(seconds_since(t0), 3) + " s");
}

void determinism(const fs::path& out_dir) {
  ExperimentConfig cfg;
  cfg.seeds = {3};
  cfg.out_dir = (out_dir / "determinism").string();
  fs::remove_all(cfg.out_dir);
  const auto first = run_experiment(cfg);
  const auto bytes = slurp(first.report_files.at(0));
  fs::remove_all(cfg.out_dir);
  const auto second = run_experiment(cfg);
  const bool same = !bytes.empty() && slurp(second.report_files.at(0)) == bytes;
  report(11, same, "identical config and seed give byte-identical reports",
         std::to_string(bytes.size()) + " bytes compared");
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out_dir = "acceptance_out";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc)
      only = std::stoi(argv[++i]);
    else
      out_dir = a;
  }
  if (only < 0 || only > 11) {
    std::printf("--only expects 1..11\n");
    return 2;
  }
  fs::create_directories(out_dir);
  const auto want = [](int id) { return only == 0 || only == id; };
  try {
    if (want(1)) annealing();
    if (want(2)) smoothing();
    if (want(3)) solver_optimality();
    if (want(4)) energy_identities();
    if (want(5)) gradient_check();
    if (want(6)) convergence();
    if (want(7)) mode_equivalence();
    if (want(8) || want(9)) adaptation(out_dir);
    if (want(10)) alpha_sensitivity(out_dir);
    if (want(11)) determinism(out_dir);
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  if (only == 0) std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
