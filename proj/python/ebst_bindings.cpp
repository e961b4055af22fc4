// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

// Python bindings for the core numerics and the experiment runner.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ebst/energy.hpp"
#include "ebst/error.hpp"
#include "ebst/experiment.hpp"
#include "ebst/metrics.hpp"
#include "ebst/pseudolabel.hpp"

namespace py = pybind11;
using Vec = std::vector<double>;

namespace {

ebst::LambdaVector lambdas_of(Vec v) { return ebst::LambdaVector{std::move(v)}; }

py::dict label_dict(const ebst::PseudoLabel& l) {
  py::dict d;
  d["vector"] = l.vector;
  d["selected"] = l.selected;
  return d;
}

py::dict dataset_dict(const ebst::DomainDataset& ds) {
  py::dict d;
  d["features"] = ds.features();
  d["labels"] = ebst::Evaluator::target_truth(ds);
  d["num_classes"] = ds.num_classes();
  return d;
}

}  // namespace

PYBIND11_MODULE(_ebst, m) {
  m.doc() = "Energy-constrained self-training core";

  py::register_exception<ebst::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ebst::ContractViolation>(m, "ContractViolation", PyExc_ValueError);
  py::register_exception<ebst::ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ebst::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("softmax", [](const Vec& z) { return ebst::softmax(z); }, py::arg("z"));
  m.def("log_sum_exp", [](const Vec& z) { return ebst::log_sum_exp(z); }, py::arg("z"));
  m.def("energy", [](const Vec& z) { return ebst::energy(z); }, py::arg("z"), "-LogSumExp(z)");
  m.def("energy_grad_logits", [](const Vec& z) { return ebst::energy_grad_logits(z); }, py::arg("z"));
  m.def(
      "ebm_loss",
      [](const Vec& z, const Vec& label, const Vec& lambdas) {
        const auto r = ebst::ebm_loss(z, label, lambdas);
        return py::make_tuple(r.value, r.grad);
      },
      py::arg("z"), py::arg("soft_label"), py::arg("lambdas"), "Returns (value, d value / dz).");
  m.def("anneal_beta", &ebst::anneal_beta, py::arg("epoch"));
  m.def("annealed_target_loss", &ebst::annealed_target_loss, py::arg("l_ebm"), py::arg("r_ebm"), py::arg("beta"));

  m.def(
      "compute_lambdas",
      [](const std::vector<Vec>& probs, double portion) { return ebst::compute_lambdas(probs, portion).values; },
      py::arg("probs"), py::arg("portion"));
  m.def(
      "hard_pseudo_label",
      [](const Vec& p, Vec lambdas) { return label_dict(ebst::hard_pseudo_label(p, lambdas_of(std::move(lambdas)))); },
      py::arg("prob"), py::arg("lambdas"));
  m.def(
      "soft_pseudo_label",
      [](const Vec& p, Vec lambdas) { return label_dict(ebst::soft_pseudo_label(p, lambdas_of(std::move(lambdas)))); },
      py::arg("prob"), py::arg("lambdas"));
  m.def(
      "smooth_label",
      [](const Vec& onehot, double epsilon) {
        const int k = static_cast<int>(onehot.size());
        ebst::PseudoLabel l{onehot, false};
        for (double v : onehot) l.selected = l.selected || v != 0.0;
        return ebst::smooth_label(l, epsilon, k).vector;
      },
      py::arg("onehot"), py::arg("epsilon"));
  m.def(
      "pseudo_label_objective",
      [](const Vec& label, const Vec& prob, Vec lambdas) {
        return ebst::pseudo_label_objective(label, prob, lambdas_of(std::move(lambdas)));
      },
      py::arg("label"), py::arg("prob"), py::arg("lambdas"));

  m.def(
      "marginal_kl",
      [](const Vec& pred, const Vec& truth, const std::string& direction) {
        if (direction != "true_to_pred" && direction != "pred_to_true")
          throw ebst::ConfigError("direction must be true_to_pred or pred_to_true");
        return ebst::marginal_kl(pred, truth,
                                 direction == "true_to_pred" ? ebst::KlDirection::true_to_pred
                                                             : ebst::KlDirection::pred_to_true);
      },
      py::arg("pred_marginal"), py::arg("true_marginal"), py::arg("direction") = "true_to_pred");

  m.def(
      "gen_two_moons",
      [](int n, double noise, std::uint64_t seed, double rotation) {
        auto ds = ebst::gen_two_moons(n, noise, seed);
        if (rotation != 0.0) ds = ebst::rotate_domain(ds, rotation);
        return dataset_dict(ds);
      },
      py::arg("n"), py::arg("noise") = 0.1, py::arg("seed") = 0, py::arg("rotation") = 0.0,
      "Returns {'features', 'labels', 'num_classes'}; rotation in degrees.");

  m.def(
      "run_experiment",
      [](const std::map<std::string, std::string>& config) {
        const auto cfg = ebst::config_from_map(config);
        cfg.validate();
        ebst::ExperimentResult result;
        {
          py::gil_scoped_release release;
          result = ebst::run_experiment(cfg);
        }
        py::list reports;
        for (const auto& run : result.runs) reports.append(py::module_::import("json").attr("loads")(run.report.dump()));
        return reports;
      },
      py::arg("config"),
      "Runs every seed of a config given as dotted key -> string value and returns the parsed reports.");
}
