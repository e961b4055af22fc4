// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

#include "ebst/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ebst/error.hpp"
#include "ebst/rng.hpp"

namespace ebst {

DomainDataset::DomainDataset(std::vector<std::vector<double>> features, std::vector<int> labels,
                             int num_classes, DomainTag tag)
    : features_(std::move(features)), labels_(std::move(labels)), num_classes_(num_classes), tag_(tag) {
  if (features_.size() != labels_.size()) throw ConfigError("dataset: features and labels differ in length");
  if (num_classes_ < 1) throw ConfigError("dataset: need at least one class");
  dim_ = features_.empty() ? 0 : static_cast<int>(features_.front().size());
  for (const auto& f : features_)
    if (static_cast<int>(f.size()) != dim_) throw ConfigError("dataset: ragged feature vectors");
  for (int y : labels_)
    if (y < -1 || y >= num_classes_) throw ConfigError("dataset: label out of range");
  if (tag_ == DomainTag::target) {
    hidden_ = std::move(labels_);
    labels_.assign(hidden_.size(), -1);
  }
}

DomainDataset DomainDataset::as_target() const {
  if (tag_ == DomainTag::target) return *this;
  DomainDataset t = *this;
  t.tag_ = DomainTag::target;
  t.hidden_ = labels_;
  t.labels_.assign(labels_.size(), -1);
  return t;
}

DomainDataset DomainDataset::with_features(std::vector<std::vector<double>> features) const {
  if (features.size() != features_.size()) throw ConfigError("dataset: feature count changed");
  DomainDataset out = *this;
  out.features_ = std::move(features);
  out.dim_ = out.features_.empty() ? 0 : static_cast<int>(out.features_.front().size());
  return out;
}

DomainDataset gen_two_moons(int n, double noise_sd, std::uint64_t seed) {
  if (n < 2 || n % 2 != 0) throw ConfigError("two moons: n must be even and >= 2");
  if (noise_sd < 0.0) throw ConfigError("two moons: noise_sd must be >= 0");
  const int half = n / 2;
  Rng rng(stream_seed(seed, "data/moons"));
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  x.reserve(static_cast<std::size_t>(n));
  y.reserve(static_cast<std::size_t>(n));
  for (int cls = 0; cls < 2; ++cls) {
    for (int i = 0; i < half; ++i) {
      const double t = half == 1 ? 0.0 : std::numbers::pi * i / (half - 1);
      double a = cls == 0 ? std::cos(t) : 1.0 - std::cos(t);
      double b = cls == 0 ? std::sin(t) : 0.5 - std::sin(t);
      if (noise_sd > 0.0) {
        a += noise_sd * rng.normal();
        b += noise_sd * rng.normal();
      }
      x.push_back({a, b});
      y.push_back(cls);
    }
  }
  return DomainDataset(std::move(x), std::move(y), 2);
}

DomainDataset rotate_domain(const DomainDataset& ds, double theta_degrees) {
  if (ds.dim() != 2 && !ds.empty()) throw ConfigError("rotate_domain: data must be 2-D");
  const double th = theta_degrees * std::numbers::pi / 180.0;
  const double c = std::cos(th);
  const double s = std::sin(th);
  auto x = ds.features();
  for (auto& f : x) f = {c * f[0] - s * f[1], s * f[0] + c * f[1]};
  return ds.with_features(std::move(x)).as_target();
}

std::pair<DomainDataset, DomainDataset> gen_gaussian_shift(int n, int num_classes,
                                                            std::span<const double> mean_shift,
                                                            std::uint64_t seed) {
  if (num_classes < 1 || n < num_classes) throw ConfigError("gaussian shift: need n >= K >= 1");
  if (mean_shift.empty()) throw ConfigError("gaussian shift: mean_shift sets D and cannot be empty");
  const auto dim = mean_shift.size();

  auto draw = [&](std::string_view stream, bool shifted) {
    Rng rng(stream_seed(seed, stream));
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int k = 0; k < num_classes; ++k) {
      const int count = n / num_classes + (k < n % num_classes ? 1 : 0);
      for (int i = 0; i < count; ++i) {
        std::vector<double> f(dim);
        for (std::size_t d = 0; d < dim; ++d) {
          const double mean =
              3.0 * std::cos(2.0 * std::numbers::pi * k / num_classes - static_cast<double>(d) * std::numbers::pi / 2.0);
          f[d] = mean + rng.normal() + (shifted ? mean_shift[d] : 0.0);
        }
        x.push_back(std::move(f));
        y.push_back(k);
      }
    }
    return DomainDataset(std::move(x), std::move(y), num_classes);
  };
  return {draw("data/source", false), draw("data/target", true).as_target()};
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace

DomainDataset load_csv(const std::filesystem::path& path, std::optional<int> num_classes) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);

  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  const auto header = split_csv(trim(line));
  if (header.size() < 2 || trim(header.back()) != "label")
    throw ParseError("header must be f1,...,fD,label", 1);
  const std::size_t dim = header.size() - 1;

  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != dim + 1)
      throw ParseError("expected " + std::to_string(dim + 1) + " cells, got " + std::to_string(cells.size()), lineno);
    std::vector<double> f(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      const auto cell = trim(cells[d]);
      const auto* end = cell.data() + cell.size();
      auto [ptr, ec] = std::from_chars(cell.data(), end, f[d]);
      if (ec != std::errc() || ptr != end || !std::isfinite(f[d]))
        throw ParseError("non-numeric feature '" + cell + "'", lineno);
    }
    const auto lab = trim(cells[dim]);
    int label = 0;
    const auto* lend = lab.data() + lab.size();
    auto [lptr, lec] = std::from_chars(lab.data(), lend, label);
    if (lec != std::errc() || lptr != lend || label < -1) throw ParseError("bad label '" + lab + "'", lineno);
    if (num_classes && label >= *num_classes)
      throw ParseError("label " + lab + " >= K = " + std::to_string(*num_classes), lineno);
    x.push_back(std::move(f));
    y.push_back(label);
  }

  const int max_label = y.empty() ? 0 : *std::max_element(y.begin(), y.end());
  const int k = num_classes.value_or(std::max(1, max_label + 1));
  const bool unlabeled = std::find(y.begin(), y.end(), -1) != y.end();
  return DomainDataset(std::move(x), std::move(y), k, unlabeled ? DomainTag::target : DomainTag::source);
}

void write_csv(const DomainDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (int d = 0; d < ds.dim(); ++d) out << 'f' << d + 1 << ',';
  out << "label\n";
  out.precision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.features()[i]) out << v << ',';
    out << ds.labels()[i] << '\n';
  }
}

}  // namespace ebst
