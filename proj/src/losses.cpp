// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0

#include "soseleto/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "soseleto/data.hpp"
#include "soseleto/error.hpp"
#include "soseleto/model.hpp"
#include "soseleto/trainer.hpp"

namespace soseleto {

namespace {

void check_logits(std::span<const double> logits, std::size_t y) {
  if (y >= logits.size()) {
    throw ShapeError("class index " + std::to_string(y) + " out of range for " +
                     std::to_string(logits.size()) + " logits");
  }
  for (double z : logits) {
    if (!std::isfinite(z)) throw NumericalError("non-finite logit");
  }
}

}  // namespace

LossValue cross_entropy(std::span<const double> logits, std::size_t y) {
  check_logits(logits, y);
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  // -log softmax_y = log(sum exp(z - m)) - (z_y - m); never negative.
  return {std::max(0.0, std::log(sum) - (logits[y] - m))};
}

std::vector<double> cross_entropy_logit_grad(std::span<const double> logits,
                                             std::size_t y) {
  check_logits(logits, y);
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> g(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    g[k] = std::exp(logits[k] - m);
    sum += g[k];
  }
  for (double& v : g) v /= sum;
  g[y] -= 1.0;
  return g;
}

const ExampleLoss& cross_entropy_loss() {
  static const ExampleLoss loss{&cross_entropy, &cross_entropy_logit_grad};
  return loss;
}

LossValue weighted_source_loss(const ModelParams& params,
                               std::span<const double> alpha,
                               const LabeledDataset& source,
                               const ExampleLoss& loss) {
  if (alpha.size() != source.size()) {
    throw ShapeError("alpha has length " + std::to_string(alpha.size()) +
                     ", source has " + std::to_string(source.size()) + " rows");
  }
  if (source.empty()) return {0.0};
  double acc = 0.0;
  for (std::size_t j = 0; j < source.size(); ++j) {
    if (alpha[j] == 0.0) continue;
    const auto logits = forward(params, Head::source, source.row(j));
    acc += alpha[j] * loss.value(logits, source.labels[j]).value;
  }
  return {acc / static_cast<double>(source.size())};
}

LossValue weighted_source_loss(const ModelParams& params,
                               const SourceWeights& alpha,
                               const LabeledDataset& source,
                               const ExampleLoss& loss) {
  return weighted_source_loss(params, alpha.alpha, source, loss);
}

LossValue target_loss(const ModelParams& params, const LabeledDataset& target,
                      const ExampleLoss& loss) {
  if (target.empty()) throw DomainError("target loss of an empty dataset");
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto logits = forward(params, Head::target, target.row(i));
    acc += loss.value(logits, target.labels[i]).value;
  }
  return {acc / static_cast<double>(target.size())};
}

}  // namespace soseleto
