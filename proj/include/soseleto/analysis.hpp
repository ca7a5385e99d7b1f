// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0
//
// Diagnostics for a weighted source/target training run: the first-order
// change of the target loss per iteration, the weight learning rate that
// guarantees first-order descent, and threshold analyses of the learned
// source weights against a known corruption mask.

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "soseleto/gradient_matrix.hpp"

namespace soseleto {

/// First-order change of the target loss over one coupled iteration:
///
///   total = -lp * g^T Q alpha_prev           (term_align)
///           - la * lp^2 * ||Q^T g||^2         (term_outer)
///           - lp * ||d L_t / d phi_t||^2      (term_head)
///
/// with g = dL_t/dtheta, lp = lambda_p, la = lambda_alpha.
struct FirstOrderDelta {
  double term_align = 0.0;
  double term_outer = 0.0;
  double term_head = 0.0;
  double total = 0.0;
};

FirstOrderDelta first_order_delta(const GradientMatrix& q,
                                  std::span<const double> alpha_prev,
                                  std::span<const double> target_grad_theta,
                                  std::span<const double> target_grad_phi_t,
                                  double lambda_p, double lambda_alpha);

/// sqrt(n_s) / (lambda_p * v_norm); +infinity when v_norm == 0.
/// Throws DomainError unless lambda_p > 0 and v_norm >= 0.
double sufficient_lambda_alpha(std::size_t n_s, double lambda_p, double v_norm);

/// The upper bound lambda_p * |v| * (sqrt(n_s) - lambda_alpha * lambda_p * |v|)
/// on the first-order change (ignoring the head term).
double descent_bound(std::size_t n_s, double lambda_p, double lambda_alpha,
                     double v_norm);

struct ThresholdRow {
  double threshold = 0.0;
  std::size_t kept_count = 0;
  std::size_t clean_kept = 0;
  std::size_t noisy_kept = 0;
  double kept_fraction = 0.0;
  double clean_kept_fraction = 0.0;  // of all clean samples
  double noisy_kept_fraction = 0.0;  // of all noisy samples
  /// noisy_kept / kept_count; 0 when nothing is kept (see `empty`).
  double effective_noise_level = 0.0;
  bool empty = false;
};

struct ThresholdSweep {
  std::vector<ThresholdRow> rows;
};

/// Keeps samples with alpha > t (ties are dropped). Thresholds must be
/// non-decreasing, else DomainError. A cohort fraction with an empty cohort
/// is reported as 0.
ThresholdSweep threshold_sweep(std::span<const double> alpha,
                               const std::vector<bool>& corruption_mask,
                               std::span<const double> thresholds);

/// 0, 1/steps, ..., 1.
std::vector<double> uniform_threshold_grid(std::size_t steps);

struct SeparationMetrics {
  double mean_alpha_clean = 0.0;
  double mean_alpha_noisy = 0.0;
  /// Probability that a random clean sample outranks a random noisy one,
  /// ties counting one half.
  double auc = 0.5;
};

/// Throws DomainError if either cohort is empty.
SeparationMetrics separation_metrics(std::span<const double> alpha,
                                     const std::vector<bool>& corruption_mask);

/// Fraction of corrupted samples among the top `keep_fraction` of samples
/// ranked by alpha (descending; ties keep the lower index).
double effective_noise_top_fraction(std::span<const double> alpha,
                                    const std::vector<bool>& corruption_mask,
                                    double keep_fraction);

void write_sweep_csv(const std::filesystem::path& path,
                     const ThresholdSweep& sweep);

}  // namespace soseleto
