// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace soseleto {

/// Feature matrix (row-major, n x dim) with integer class labels.
///
/// `corruption_mask[i]` is true iff label i was altered by noise injection.
/// It is ground truth for evaluation only; training never reads it.
struct LabeledDataset {
  std::size_t dim = 0;
  std::size_t n_classes = 0;
  std::vector<double> features;
  std::vector<std::size_t> labels;
  std::optional<std::vector<bool>> corruption_mask;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * dim, dim);
  }

  /// Throws ShapeError / LabelRangeError when the invariants do not hold.
  void validate() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

/// Two-class problem in R^2 split by the y-axis.
///
/// Points come from unit-variance isotropic Gaussians centred at (-2, 0) and
/// (+2, 0), one cluster per class with equal probability; a point that lands
/// exactly on x = 0 is redrawn. The true label is 1 for x > 0 and 0 for
/// x < 0. Exactly round(noise_frac * n_source) source labels are flipped.
/// The target set comes from the same distribution and is never corrupted.
std::pair<LabeledDataset, LabeledDataset> make_synthetic_2d(
    std::size_t n_source, std::size_t n_target, double noise_frac,
    std::uint64_t seed);

/// `n_classes` isotropic Gaussian blobs in R^dim with random centres on a
/// sphere of radius `separation`; unit variance. Balanced class counts.
LabeledDataset make_gaussian_blobs(std::size_t n, std::size_t n_classes,
                                   std::size_t dim, double separation,
                                   std::uint64_t seed);

/// Replaces exactly round(noise_frac * n) labels, chosen uniformly without
/// replacement, with a uniformly drawn different class. The result carries a
/// fresh corruption mask (any mask on the input is discarded).
LabeledDataset inject_label_noise(const LabeledDataset& dataset,
                                  double noise_frac, std::uint64_t seed);

struct CsvSchema {
  std::string label_column = "label";
  /// Empty = every non-label column, in file order.
  std::vector<std::string> feature_columns;
  std::size_t n_classes = 0;
  /// Optional 0/1 column restored into corruption_mask.
  std::optional<std::string> mask_column;
};

/// Comma-separated, header row required. Row order is preserved.
///
/// Errors: IoError (cannot open), ParseError (malformed header or row, with
/// line number), LabelRangeError (label >= n_classes, with line number).
LabeledDataset load_csv(const std::filesystem::path& path,
                        const CsvSchema& schema);

/// Writes `x0..x{d-1},label[,corrupted]` with round-trip precision.
void save_csv(const std::filesystem::path& path, const LabeledDataset& dataset);

}  // namespace soseleto
