// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0

#include "soseleto/model.hpp"

#include <cmath>
#include <random>
#include <string>
#include <utility>

#include "soseleto/error.hpp"

namespace soseleto {

std::string_view to_string(Activation a) {
  return a == Activation::tanh ? "tanh" : "relu";
}

Activation activation_from_string(std::string_view s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

std::string_view to_string(Head h) {
  return h == Head::source ? "source" : "target";
}

void ArchDescriptor::validate() const {
  if (input_dim == 0) throw ConfigError("arch: input_dim must be >= 1");
  for (std::size_t h : hidden_sizes) {
    if (h == 0) throw ConfigError("arch: hidden layer sizes must be >= 1");
  }
  if (n_classes_source == 0 || n_classes_target == 0) {
    throw ConfigError("arch: class counts must be >= 1");
  }
}

std::size_t ArchDescriptor::representation_dim() const {
  return hidden_sizes.empty() ? input_dim : hidden_sizes.back();
}

std::size_t ArchDescriptor::theta_size() const {
  std::size_t total = 0;
  std::size_t in = input_dim;
  for (std::size_t out : hidden_sizes) {
    total += out * in + out;
    in = out;
  }
  return total;
}

std::size_t ArchDescriptor::n_classes(Head head) const {
  return head == Head::source ? n_classes_source : n_classes_target;
}

std::size_t ArchDescriptor::head_size(Head head) const {
  const std::size_t c = n_classes(head);
  return c * representation_dim() + c;
}

std::vector<DenseSlot> theta_layout(const ArchDescriptor& arch) {
  std::vector<DenseSlot> slots;
  slots.reserve(arch.hidden_sizes.size());
  std::size_t offset = 0;
  std::size_t in = arch.input_dim;
  for (std::size_t out : arch.hidden_sizes) {
    DenseSlot s{in, out, offset, offset + out * in};
    slots.push_back(s);
    offset = s.bias_offset + out;
    in = out;
  }
  return slots;
}

DenseSlot head_layout(const ArchDescriptor& arch, Head head) {
  const std::size_t in = arch.representation_dim();
  const std::size_t out = arch.n_classes(head);
  return DenseSlot{in, out, 0, out * in};
}

ModelParams::ModelParams(ArchDescriptor arch, bool shared_head)
    : arch_(std::move(arch)), shared_(shared_head) {
  arch_.validate();
  if (shared_ && arch_.n_classes_source != arch_.n_classes_target) {
    throw ConfigError("shared head requires equal source/target class counts");
  }
  theta_.assign(arch_.theta_size(), 0.0);
  phi_s_.assign(arch_.head_size(Head::source), 0.0);
  if (!shared_) phi_t_.assign(arch_.head_size(Head::target), 0.0);
}

ModelParams::ModelParams(ArchDescriptor arch, std::vector<double> theta,
                         std::vector<double> phi_s, std::vector<double> phi_t,
                         bool shared_head)
    : ModelParams(std::move(arch), shared_head) {
  const auto check = [](const char* name, std::size_t got, std::size_t want) {
    if (got != want) {
      throw ShapeError(std::string(name) + " has length " +
                       std::to_string(got) + ", architecture requires " +
                       std::to_string(want));
    }
  };
  check("theta", theta.size(), theta_.size());
  check("phi_s", phi_s.size(), phi_s_.size());
  check("phi_t", phi_t.size(), phi_t_.size());
  theta_ = std::move(theta);
  phi_s_ = std::move(phi_s);
  phi_t_ = std::move(phi_t);
}

namespace {

void fill_dense(std::span<double> v, const DenseSlot& slot,
                std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(slot.in));
  std::uniform_real_distribution<double> dist(-s, s);
  for (std::size_t i = 0; i < slot.out * slot.in; ++i) {
    v[slot.weight_offset + i] = dist(rng);
  }
  for (std::size_t i = 0; i < slot.out; ++i) v[slot.bias_offset + i] = dist(rng);
}

}  // namespace

ModelParams ModelParams::random_init(const ArchDescriptor& arch,
                                     bool shared_head, std::uint64_t seed) {
  ModelParams p(arch, shared_head);
  std::mt19937_64 rng(seed);
  for (const DenseSlot& slot : theta_layout(p.arch_)) fill_dense(p.theta_, slot, rng);
  fill_dense(p.phi_s_, head_layout(p.arch_, Head::source), rng);
  if (!shared_head) fill_dense(p.phi_t_, head_layout(p.arch_, Head::target), rng);
  return p;
}

std::span<const double> ModelParams::head(Head h) const noexcept {
  if (h == Head::source || shared_) return phi_s_;
  return phi_t_;
}

std::span<double> ModelParams::head(Head h) noexcept {
  if (h == Head::source || shared_) return phi_s_;
  return phi_t_;
}

namespace {

double activate(Activation a, double z) {
  return a == Activation::tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// Derivative expressed through the pre-activation z and output h. relu'(0) = 0.
double activate_deriv(Activation a, double z, double h) {
  return a == Activation::tanh ? 1.0 - h * h : (z > 0.0 ? 1.0 : 0.0);
}

// out = W in + b for a dense slot stored in `params`.
void dense_forward(std::span<const double> params, const DenseSlot& slot,
                   std::span<const double> in, std::span<double> out) {
  for (std::size_t r = 0; r < slot.out; ++r) {
    double acc = params[slot.bias_offset + r];
    const double* row = params.data() + slot.weight_offset + r * slot.in;
    for (std::size_t c = 0; c < slot.in; ++c) acc += row[c] * in[c];
    out[r] = acc;
  }
}

// Accumulates dW = delta (x) in, db = delta into `grad` and, if `d_in` is
// non-empty, writes W^T delta into it.
void dense_backward(std::span<const double> params, const DenseSlot& slot,
                    std::span<const double> in, std::span<const double> delta,
                    std::span<double> grad, std::span<double> d_in) {
  for (std::size_t r = 0; r < slot.out; ++r) {
    double* g_row = grad.data() + slot.weight_offset + r * slot.in;
    for (std::size_t c = 0; c < slot.in; ++c) g_row[c] = delta[r] * in[c];
    grad[slot.bias_offset + r] = delta[r];
  }
  if (d_in.empty()) return;
  for (std::size_t c = 0; c < slot.in; ++c) d_in[c] = 0.0;
  for (std::size_t r = 0; r < slot.out; ++r) {
    const double* row = params.data() + slot.weight_offset + r * slot.in;
    for (std::size_t c = 0; c < slot.in; ++c) d_in[c] += row[c] * delta[r];
  }
}

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericalError(std::string("non-finite value in ") + what);
    }
  }
}

// Cached activations of one forward pass. pre[l] / post[l] belong to hidden
// layer l; post[-1] is the input itself and is kept in `input`.
struct Trace {
  std::span<const double> input;
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
  std::vector<double> logits;

  std::span<const double> representation() const {
    return post.empty() ? input : std::span<const double>(post.back());
  }
};

Trace run_forward(const ModelParams& params, Head head,
                  std::span<const double> x) {
  const ArchDescriptor& arch = params.arch();
  if (x.size() != arch.input_dim) {
    throw ShapeError("input has length " + std::to_string(x.size()) +
                     ", model expects " + std::to_string(arch.input_dim));
  }
  Trace t;
  t.input = x;
  const auto layout = theta_layout(arch);
  t.pre.reserve(layout.size());
  t.post.reserve(layout.size());
  std::span<const double> in = x;
  for (const DenseSlot& slot : layout) {
    std::vector<double> z(slot.out);
    dense_forward(params.theta(), slot, in, z);
    std::vector<double> h(slot.out);
    for (std::size_t i = 0; i < slot.out; ++i) h[i] = activate(arch.activation, z[i]);
    t.pre.push_back(std::move(z));
    t.post.push_back(std::move(h));
    in = t.post.back();
  }
  const DenseSlot hs = head_layout(arch, head);
  t.logits.resize(hs.out);
  dense_forward(params.head(head), hs, t.representation(), t.logits);
  return t;
}

}  // namespace

std::vector<double> forward(const ModelParams& params, Head head,
                            std::span<const double> x) {
  return run_forward(params, head, x).logits;
}

PerExampleGradient per_example_grad(const ModelParams& params, Head head,
                                    std::span<const double> x, std::size_t y,
                                    const ExampleLoss& loss) {
  const ArchDescriptor& arch = params.arch();
  if (y >= arch.n_classes(head)) {
    throw ShapeError("label " + std::to_string(y) + " out of range for " +
                     std::string(to_string(head)) + " head with " +
                     std::to_string(arch.n_classes(head)) + " classes");
  }
  Trace t = run_forward(params, head, x);
  require_finite(t.logits, "logits");

  PerExampleGradient g;
  g.d_theta.assign(arch.theta_size(), 0.0);
  g.d_phi.assign(arch.head_size(head), 0.0);

  const std::vector<double> d_logits = loss.logit_grad(t.logits, y);
  const auto layout = theta_layout(arch);
  std::vector<double> delta(layout.empty() ? 0 : layout.back().out);
  dense_backward(params.head(head), head_layout(arch, head), t.representation(),
                 d_logits, g.d_phi, delta);

  for (std::size_t l = layout.size(); l-- > 0;) {
    const DenseSlot& slot = layout[l];
    for (std::size_t i = 0; i < slot.out; ++i) {
      delta[i] *= activate_deriv(arch.activation, t.pre[l][i], t.post[l][i]);
    }
    std::span<const double> in =
        l == 0 ? t.input : std::span<const double>(t.post[l - 1]);
    std::vector<double> d_in(l == 0 ? 0 : slot.in);
    dense_backward(params.theta(), slot, in, delta, g.d_theta, d_in);
    delta = std::move(d_in);
  }

  require_finite(g.d_theta, "theta gradient");
  require_finite(g.d_phi, "head gradient");
  return g;
}

std::vector<PerExampleGradient> batch_grads(const ModelParams& params,
                                            Head head,
                                            std::span<const double> xs,
                                            std::span<const std::size_t> ys,
                                            const ExampleLoss& loss) {
  const std::size_t d = params.arch().input_dim;
  if (ys.empty()) throw ShapeError("batch_grads: empty batch");
  if (xs.size() != ys.size() * d) {
    throw ShapeError("batch_grads: " + std::to_string(xs.size()) +
                     " feature values for " + std::to_string(ys.size()) +
                     " labels of dimension " + std::to_string(d));
  }
  std::vector<PerExampleGradient> out;
  out.reserve(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    try {
      out.push_back(per_example_grad(params, head, xs.subspan(i * d, d), ys[i], loss));
    } catch (const NumericalError& e) {
      throw NumericalError("batch element " + std::to_string(i) + ": " + e.what());
    } catch (const ShapeError& e) {
      throw ShapeError("batch element " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace soseleto
