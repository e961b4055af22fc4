// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic domain-shift datasets and CSV ingestion.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ebst {

enum class DomainTag { source, target };

class EvalAccess;

/// Features plus labels. Target datasets expose only -1 labels to training
/// code; their true labels, when known, are reachable through EvalAccess.
class DomainDataset {
 public:
  DomainDataset() = default;
  DomainDataset(std::vector<std::vector<double>> features, std::vector<int> labels, int num_classes,
                DomainTag tag = DomainTag::source);

  const std::vector<std::vector<double>>& features() const { return features_; }
  /// Visible labels; all -1 for a target set.
  const std::vector<int>& labels() const { return labels_; }
  DomainTag tag() const { return tag_; }
  int dim() const { return dim_; }
  int num_classes() const { return num_classes_; }
  std::size_t size() const { return features_.size(); }
  bool empty() const { return features_.empty(); }

  /// Copy tagged as target, labels moved behind EvalAccess.
  DomainDataset as_target() const;

  /// Copy with new features of the same count; labels and tag are kept.
  DomainDataset with_features(std::vector<std::vector<double>> features) const;

  const std::vector<int>& hidden_labels(const EvalAccess&) const { return hidden_; }

  bool operator==(const DomainDataset&) const = default;

 private:
  std::vector<std::vector<double>> features_;
  std::vector<int> labels_;
  std::vector<int> hidden_;
  int dim_ = 0;
  int num_classes_ = 0;
  DomainTag tag_ = DomainTag::source;
};

/// Key type for hidden labels; only the metrics evaluation entry point can
/// construct one.
class EvalAccess {
  EvalAccess() = default;
  friend struct Evaluator;
};

/// n/2 points per class on two interleaved half circles plus N(0, noise_sd^2)
/// noise. Class 0: (cos t, sin t); class 1: (1 - cos t, 0.5 - sin t), with t
/// evenly spaced over [0, pi]. Throws ConfigError unless n >= 2 and even.
DomainDataset gen_two_moons(int n, double noise_sd, std::uint64_t seed);

/// Rotates every feature about the origin and returns a target-tagged copy.
/// Throws ConfigError unless the data is 2-D.
DomainDataset rotate_domain(const DomainDataset& ds, double theta_degrees);

/// K unit-variance Gaussian clusters; class k has mean
/// 3 * cos(2 pi k / K - d pi / 2) in coordinate d. Counts are n / K with the
/// remainder spread over the first classes. The source draws from stream
/// "data/source", the target from "data/target" and is translated by
/// `mean_shift`, whose length sets D.
std::pair<DomainDataset, DomainDataset> gen_gaussian_shift(int n, int num_classes,
                                                            std::span<const double> mean_shift,
                                                            std::uint64_t seed);

/// Header "f1,...,fD,label"; label -1 marks an unlabeled row. If any row is
/// unlabeled the dataset is tagged target. `num_classes` defaults to
/// max label + 1. Throws ParseError with the offending line number.
DomainDataset load_csv(const std::filesystem::path& path, std::optional<int> num_classes = {});

/// Writes the visible labels.
void write_csv(const DomainDataset& ds, const std::filesystem::path& path);

}  // namespace ebst
