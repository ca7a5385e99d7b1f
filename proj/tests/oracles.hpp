// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0
//
// Test-only reference computations. The forward pass is rebuilt from nested
// matrices, the loss is evaluated naively in long double and gradients come
// from central finite differences. coupled_change is the exception: it reuses
// the library's gradients, since what it checks is the first-order expansion
// and not the gradients themselves.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "soseleto/model.hpp"
#include "soseleto/trainer.hpp"

namespace soseleto::oracle {

using Matrix = std::vector<std::vector<double>>;

struct NaiveLayer {
  Matrix w;  // out x in
  std::vector<double> b;
};

// Unpacks consecutive dense layers dims[l] -> dims[l+1] from a flat vector:
// each is W (row-major) then b.
inline std::vector<NaiveLayer> unpack(std::span<const double> flat,
                                      const std::vector<std::size_t>& dims) {
  std::vector<NaiveLayer> layers;
  std::size_t k = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    NaiveLayer layer;
    layer.w.assign(dims[l + 1], std::vector<double>(dims[l]));
    for (auto& row : layer.w)
      for (auto& v : row) v = flat[k++];
    layer.b.resize(dims[l + 1]);
    for (auto& v : layer.b) v = flat[k++];
    layers.push_back(std::move(layer));
  }
  return layers;
}

inline std::vector<double> naive_forward(const ModelParams& p, Head head,
                                         const std::vector<double>& x) {
  const ArchDescriptor& a = p.arch();
  std::vector<std::size_t> dims{a.input_dim};
  for (auto h : a.hidden_sizes) dims.push_back(h);
  const auto hidden = unpack(p.theta(), dims);

  std::vector<double> h = x;
  for (const auto& layer : hidden) {
    std::vector<double> next(layer.b.size());
    for (std::size_t r = 0; r < next.size(); ++r) {
      double z = layer.b[r];
      for (std::size_t c = 0; c < h.size(); ++c) z += layer.w[r][c] * h[c];
      next[r] = a.activation == Activation::tanh ? std::tanh(z) : std::max(0.0, z);
    }
    h = next;
  }
  const auto out = unpack(p.head(head), {h.size(), a.n_classes(head)});
  std::vector<double> logits(out[0].b.size());
  for (std::size_t r = 0; r < logits.size(); ++r) {
    double z = out[0].b[r];
    for (std::size_t c = 0; c < h.size(); ++c) z += out[0].w[r][c] * h[c];
    logits[r] = z;
  }
  return logits;
}

// -log(exp(z_y) / sum_k exp(z_k)), no stabilization.
inline long double naive_cross_entropy(const std::vector<double>& z, std::size_t y) {
  long double sum = 0.0L;
  for (double v : z) sum += std::exp(static_cast<long double>(v));
  return -std::log(std::exp(static_cast<long double>(z[y])) / sum);
}

inline double naive_loss(const ModelParams& p, Head head,
                         const std::vector<double>& x, std::size_t y) {
  return static_cast<double>(naive_cross_entropy(naive_forward(p, head, x), y));
}

// Central differences of the naive loss w.r.t. theta and the selected head.
inline PerExampleGradient finite_difference_grad(const ModelParams& p, Head head,
                                                 const std::vector<double>& x,
                                                 std::size_t y, double step) {
  PerExampleGradient g;
  ModelParams work = p;
  auto diff = [&](std::span<double> v, std::vector<double>& out) {
    out.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double orig = v[i];
      v[i] = orig + step;
      const double up = naive_loss(work, head, x, y);
      v[i] = orig - step;
      const double down = naive_loss(work, head, x, y);
      v[i] = orig;
      out[i] = (up - down) / (2.0 * step);
    }
  };
  diff(work.theta(), g.d_theta);
  diff(work.head(head), g.d_phi);
  return g;
}

inline ArchDescriptor random_arch(std::mt19937_64& rng, bool equal_classes = false) {
  std::uniform_int_distribution<std::size_t> dim(1, 4);
  std::uniform_int_distribution<std::size_t> depth(0, 2);
  std::uniform_int_distribution<std::size_t> width(1, 5);
  std::uniform_int_distribution<std::size_t> classes(2, 4);
  ArchDescriptor a;
  a.input_dim = dim(rng);
  const std::size_t d = depth(rng);
  for (std::size_t i = 0; i < d; ++i) a.hidden_sizes.push_back(width(rng));
  a.activation = std::bernoulli_distribution(0.5)(rng) ? Activation::tanh : Activation::relu;
  a.n_classes_source = classes(rng);
  a.n_classes_target = equal_classes ? a.n_classes_source : classes(rng);
  return a;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n,
                                         double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Smallest |pre-activation| over all hidden units; central differences are
// only meaningful for relu when this is well above the step size.
inline double min_abs_preactivation(const ModelParams& p, const std::vector<double>& x) {
  const ArchDescriptor& a = p.arch();
  std::vector<std::size_t> dims{a.input_dim};
  for (auto h : a.hidden_sizes) dims.push_back(h);
  double best = INFINITY;
  std::vector<double> h = x;
  for (const auto& layer : unpack(p.theta(), dims)) {
    std::vector<double> next(layer.b.size());
    for (std::size_t r = 0; r < next.size(); ++r) {
      double z = layer.b[r];
      for (std::size_t c = 0; c < h.size(); ++c) z += layer.w[r][c] * h[c];
      best = std::min(best, std::abs(z));
      next[r] = a.activation == Activation::tanh ? std::tanh(z) : std::max(0.0, z);
    }
    h = next;
  }
  return best;
}

inline double max_relative_error(std::span<const double> got,
                                 std::span<const double> want, double floor = 1e-3) {
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double denom = std::max({std::abs(got[i]), std::abs(want[i]), floor});
    worst = std::max(worst, std::abs(got[i] - want[i]) / denom);
  }
  return worst;
}

// Exact change of the mean target-batch loss over one coupled iteration in
// which theta moves with the already-updated (unclipped) weights:
//   alpha_m = alpha + la * lp * Q^T g,  theta -= lp * Q alpha_m,
//   phi_t -= lp * dL_t/dphi_t.
inline double coupled_change(const ModelParams& p, const LabeledDataset& source,
                                    const LabeledDataset& target,
                                    std::span<const std::size_t> sbatch,
                                    std::span<const std::size_t> tbatch,
                                    std::span<const double> alpha, double lp, double la) {
  const GradientMatrix q = build_Q(p, source, sbatch);
  const TargetGradient tg = target_gradient(p, target, tbatch);
  const std::vector<double> v = q.transpose_times(tg.d_theta);
  std::vector<double> alpha_m(alpha.begin(), alpha.end());
  for (std::size_t j = 0; j < alpha_m.size(); ++j) alpha_m[j] += la * lp * v[j];
  const std::vector<double> step = q.times(alpha_m);

  ModelParams moved = p;
  auto theta = moved.theta();
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lp * step[i];
  auto phi = moved.head(Head::target);
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] -= lp * tg.d_phi[i];

  return target_gradient(moved, target, tbatch).loss - tg.loss;
}

}  // namespace soseleto::oracle
