// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0

#include "soseleto/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "soseleto/error.hpp"

namespace soseleto {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_mask(std::span<const double> alpha, const std::vector<bool>& mask) {
  if (mask.size() != alpha.size()) {
    throw ShapeError("corruption mask has length " + std::to_string(mask.size()) +
                     ", alpha has " + std::to_string(alpha.size()));
  }
}

}  // namespace

FirstOrderDelta first_order_delta(const GradientMatrix& q,
                                  std::span<const double> alpha_prev,
                                  std::span<const double> target_grad_theta,
                                  std::span<const double> target_grad_phi_t,
                                  double lambda_p, double lambda_alpha) {
  const std::vector<double> q_alpha = q.times(alpha_prev);
  const std::vector<double> v = q.transpose_times(target_grad_theta);

  FirstOrderDelta d;
  d.term_align = -lambda_p * dot(target_grad_theta, q_alpha);
  d.term_outer = -lambda_alpha * lambda_p * lambda_p * dot(v, v);
  d.term_head = -lambda_p * dot(target_grad_phi_t, target_grad_phi_t);
  d.total = d.term_align + d.term_outer + d.term_head;
  return d;
}

double sufficient_lambda_alpha(std::size_t n_s, double lambda_p, double v_norm) {
  if (!(lambda_p > 0.0)) throw DomainError("lambda_p must be positive");
  if (!(v_norm >= 0.0)) throw DomainError("v_norm must be nonnegative");
  if (v_norm == 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(static_cast<double>(n_s)) / (lambda_p * v_norm);
}

double descent_bound(std::size_t n_s, double lambda_p, double lambda_alpha,
                     double v_norm) {
  return lambda_p * v_norm *
         (std::sqrt(static_cast<double>(n_s)) - lambda_alpha * lambda_p * v_norm);
}

ThresholdSweep threshold_sweep(std::span<const double> alpha,
                               const std::vector<bool>& corruption_mask,
                               std::span<const double> thresholds) {
  check_mask(alpha, corruption_mask);
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    if (!(thresholds[k] >= 0.0 && thresholds[k] <= 1.0)) {
      throw DomainError("threshold " + std::to_string(thresholds[k]) +
                        " outside [0, 1]");
    }
    if (k > 0 && thresholds[k] < thresholds[k - 1]) {
      throw DomainError("thresholds must be sorted ascending");
    }
  }
  const std::size_t n_noisy = static_cast<std::size_t>(
      std::count(corruption_mask.begin(), corruption_mask.end(), true));
  const std::size_t n_clean = alpha.size() - n_noisy;

  const auto frac = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };

  ThresholdSweep sweep;
  sweep.rows.reserve(thresholds.size());
  for (double t : thresholds) {
    ThresholdRow row;
    row.threshold = t;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      if (alpha[j] > t) {
        ++row.kept_count;
        if (corruption_mask[j]) {
          ++row.noisy_kept;
        } else {
          ++row.clean_kept;
        }
      }
    }
    row.kept_fraction = frac(row.kept_count, alpha.size());
    row.clean_kept_fraction = frac(row.clean_kept, n_clean);
    row.noisy_kept_fraction = frac(row.noisy_kept, n_noisy);
    row.empty = row.kept_count == 0;
    row.effective_noise_level = frac(row.noisy_kept, row.kept_count);
    sweep.rows.push_back(row);
  }
  return sweep;
}

std::vector<double> uniform_threshold_grid(std::size_t steps) {
  if (steps == 0) return {0.0};
  std::vector<double> grid(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) {
    grid[i] = static_cast<double>(i) / static_cast<double>(steps);
  }
  return grid;
}

SeparationMetrics separation_metrics(std::span<const double> alpha,
                                     const std::vector<bool>& corruption_mask) {
  check_mask(alpha, corruption_mask);
  std::vector<double> clean;
  std::vector<double> noisy;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    (corruption_mask[j] ? noisy : clean).push_back(alpha[j]);
  }
  if (clean.empty() || noisy.empty()) {
    throw DomainError("separation metrics need both clean and noisy samples");
  }
  SeparationMetrics m;
  m.mean_alpha_clean = std::accumulate(clean.begin(), clean.end(), 0.0) /
                       static_cast<double>(clean.size());
  m.mean_alpha_noisy = std::accumulate(noisy.begin(), noisy.end(), 0.0) /
                       static_cast<double>(noisy.size());

  // Mann-Whitney U via a merge over sorted cohorts: for each clean value,
  // count noisy values strictly below plus half of the ties.
  std::sort(clean.begin(), clean.end());
  std::sort(noisy.begin(), noisy.end());
  double u = 0.0;
  std::size_t below = 0;
  std::size_t upto = 0;
  for (double c : clean) {
    while (below < noisy.size() && noisy[below] < c) ++below;
    upto = std::max(upto, below);
    while (upto < noisy.size() && noisy[upto] <= c) ++upto;
    u += static_cast<double>(below) + 0.5 * static_cast<double>(upto - below);
  }
  m.auc = u / (static_cast<double>(clean.size()) * static_cast<double>(noisy.size()));
  return m;
}

double effective_noise_top_fraction(std::span<const double> alpha,
                                    const std::vector<bool>& corruption_mask,
                                    double keep_fraction) {
  check_mask(alpha, corruption_mask);
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw DomainError("keep_fraction must lie in (0, 1]");
  }
  std::vector<std::size_t> order(alpha.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return alpha[a] > alpha[b]; });
  const auto keep = static_cast<std::size_t>(
      std::llround(keep_fraction * static_cast<double>(alpha.size())));
  if (keep == 0) return 0.0;
  std::size_t noisy = 0;
  for (std::size_t k = 0; k < keep; ++k) noisy += corruption_mask[order[k]] ? 1 : 0;
  return static_cast<double>(noisy) / static_cast<double>(keep);
}

void write_sweep_csv(const std::filesystem::path& path,
                     const ThresholdSweep& sweep) {
  std::string out =
      "threshold,kept_count,kept_fraction,clean_kept_fraction,"
      "noisy_kept_fraction,effective_noise_level,empty\n";
  char buf[64];
  const auto num = [&](double v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
  };
  for (const ThresholdRow& r : sweep.rows) {
    num(r.threshold);
    out += ',' + std::to_string(r.kept_count) + ',';
    num(r.kept_fraction);
    out += ',';
    num(r.clean_kept_fraction);
    out += ',';
    num(r.noisy_kept_fraction);
    out += ',';
    num(r.effective_noise_level);
    out += r.empty ? ",1\n" : ",0\n";
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << out;
}

}  // namespace soseleto
