// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "soseleto/error.hpp"

namespace soseleto {

/// Dense column-major matrix whose columns are per-example gradients of the
/// source loss, each already scaled by 1/n_s. Used for both Q (theta
/// gradients) and R (source-head gradients).
class GradientMatrix {
 public:
  GradientMatrix() = default;
  GradientMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  std::span<const double> column(std::size_t j) const {
    return std::span<const double>(data_).subspan(j * rows_, rows_);
  }
  std::span<double> column(std::size_t j) {
    return std::span<double>(data_).subspan(j * rows_, rows_);
  }

  /// M * w, accumulated column by column in index order.
  std::vector<double> times(std::span<const double> w) const {
    if (w.size() != cols_) {
      throw ShapeError("matrix has " + std::to_string(cols_) +
                       " columns, vector has length " + std::to_string(w.size()));
    }
    std::vector<double> out(rows_, 0.0);
    for (std::size_t j = 0; j < cols_; ++j) {
      const double* c = data_.data() + j * rows_;
      for (std::size_t i = 0; i < rows_; ++i) out[i] += c[i] * w[j];
    }
    return out;
  }

  /// M^T * g; entry j is the dot product of column j with g.
  std::vector<double> transpose_times(std::span<const double> g) const {
    if (g.size() != rows_) {
      throw ShapeError("matrix has " + std::to_string(rows_) +
                       " rows, vector has length " + std::to_string(g.size()));
    }
    std::vector<double> out(cols_, 0.0);
    for (std::size_t j = 0; j < cols_; ++j) {
      const double* c = data_.data() + j * rows_;
      double acc = 0.0;
      for (std::size_t i = 0; i < rows_; ++i) acc += c[i] * g[i];
      out[j] = acc;
    }
    return out;
  }

  friend bool operator==(const GradientMatrix&, const GradientMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace soseleto
