// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace soseleto {

class ModelParams;
struct LabeledDataset;
struct SourceWeights;

/// Per-example classification loss, in nats.
struct LossValue {
  double value = 0.0;
};

/// Cross-entropy of softmax(logits) against class `y`, computed with the
/// max-subtraction trick so large logits do not overflow.
LossValue cross_entropy(std::span<const double> logits, std::size_t y);

/// d/dlogits of cross_entropy: softmax(logits) - onehot(y).
std::vector<double> cross_entropy_logit_grad(std::span<const double> logits,
                                             std::size_t y);

/// A per-example loss as a pair of function objects. The model backpropagates
/// whatever `logit_grad` returns, so other losses can be plugged in without
/// touching the model or trainer.
struct ExampleLoss {
  std::function<LossValue(std::span<const double>, std::size_t)> value;
  std::function<std::vector<double>(std::span<const double>, std::size_t)>
      logit_grad;
};

const ExampleLoss& cross_entropy_loss();

/// L_s = (1/n_s) * sum_j alpha_j * loss(y_j, F(x_j; theta, phi_s)).
///
/// The normalizer is always the full dataset size. Examples with
/// alpha_j == 0 are skipped entirely.
LossValue weighted_source_loss(const ModelParams& params,
                               std::span<const double> alpha,
                               const LabeledDataset& source,
                               const ExampleLoss& loss = cross_entropy_loss());

LossValue weighted_source_loss(const ModelParams& params,
                               const SourceWeights& alpha,
                               const LabeledDataset& source,
                               const ExampleLoss& loss = cross_entropy_loss());

/// L_t = mean per-example loss through the target head. Throws DomainError
/// on an empty dataset.
LossValue target_loss(const ModelParams& params, const LabeledDataset& target,
                      const ExampleLoss& loss = cross_entropy_loss());

}  // namespace soseleto
