// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0
//
// A small feedforward classifier F(x; theta, phi) with an explicit backward
// pass. theta holds every hidden layer; phi is a single linear head mapping
// the last representation to class logits. There is one head per branch
// (source, target), or a single shared head in noisy-label mode.
//
// Parameter layout inside the flat vectors (all matrices row-major, shape
// out x in):
//
//   theta = [W_1, b_1, W_2, b_2, ..., W_H, b_H]
//   phi   = [W_head, b_head]

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "soseleto/losses.hpp"

namespace soseleto {

enum class Activation { tanh, relu };
enum class Head { source, target };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);
std::string_view to_string(Head h);

struct ArchDescriptor {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_sizes;  // empty = linear model
  Activation activation = Activation::tanh;
  std::size_t n_classes_source = 2;
  std::size_t n_classes_target = 2;

  /// Throws ConfigError on zero dimensions.
  void validate() const;

  std::size_t representation_dim() const;
  std::size_t theta_size() const;
  std::size_t head_size(Head head) const;
  std::size_t n_classes(Head head) const;

  friend bool operator==(const ArchDescriptor&, const ArchDescriptor&) = default;
};

/// Offsets of one dense layer inside a flat parameter vector.
struct DenseSlot {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

/// Layout table for theta, derived from the architecture.
std::vector<DenseSlot> theta_layout(const ArchDescriptor& arch);
/// Layout of a head (offsets relative to the head vector).
DenseSlot head_layout(const ArchDescriptor& arch, Head head);

class ModelParams {
 public:
  /// All-zero parameters. With `shared_head` the target head aliases the
  /// source head, which requires equal class counts.
  explicit ModelParams(ArchDescriptor arch, bool shared_head = false);

  /// Adopts existing vectors; lengths are checked against `arch`.
  /// `phi_t` must be empty when `shared_head` is set.
  ModelParams(ArchDescriptor arch, std::vector<double> theta,
              std::vector<double> phi_s, std::vector<double> phi_t,
              bool shared_head = false);

  /// Uniform in [-s, s], s = 1/sqrt(fan_in), per layer.
  static ModelParams random_init(const ArchDescriptor& arch, bool shared_head,
                                 std::uint64_t seed);

  const ArchDescriptor& arch() const noexcept { return arch_; }
  bool shared_head() const noexcept { return shared_; }

  std::span<const double> theta() const noexcept { return theta_; }
  std::span<double> theta() noexcept { return theta_; }

  /// Head vector for a branch. In shared mode both branches resolve to the
  /// same storage.
  std::span<const double> head(Head h) const noexcept;
  std::span<double> head(Head h) noexcept;

  std::span<const double> phi_s() const noexcept { return phi_s_; }
  /// Stored target head; empty in shared mode.
  std::span<const double> phi_t_storage() const noexcept { return phi_t_; }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  ArchDescriptor arch_;
  bool shared_ = false;
  std::vector<double> theta_;
  std::vector<double> phi_s_;
  std::vector<double> phi_t_;
};

/// Gradient of one example's loss. `d_phi` matches the head that was used.
struct PerExampleGradient {
  std::vector<double> d_theta;
  std::vector<double> d_phi;

  friend bool operator==(const PerExampleGradient&,
                         const PerExampleGradient&) = default;
};

/// Logits of the selected head. Throws ShapeError when x has the wrong
/// length.
std::vector<double> forward(const ModelParams& params, Head head,
                            std::span<const double> x);

/// Backpropagates one example. Throws NumericalError if any activation,
/// logit or gradient entry is non-finite.
PerExampleGradient per_example_grad(
    const ModelParams& params, Head head, std::span<const double> x,
    std::size_t y, const ExampleLoss& loss = cross_entropy_loss());

/// Row-major batch view: xs has ys.size() rows of arch.input_dim values.
std::vector<PerExampleGradient> batch_grads(
    const ModelParams& params, Head head, std::span<const double> xs,
    std::span<const std::size_t> ys,
    const ExampleLoss& loss = cross_entropy_loss());

}  // namespace soseleto
