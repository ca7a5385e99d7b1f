// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "soseleto/error.hpp"
#include "soseleto/model.hpp"

using namespace soseleto;
using Catch::Approx;

namespace {

ArchDescriptor linear_arch(std::size_t in, std::size_t classes) {
  ArchDescriptor a;
  a.input_dim = in;
  a.n_classes_source = classes;
  a.n_classes_target = classes;
  return a;
}

}  // namespace

TEST_CASE("arch sizes follow the layer table", "[model]") {
  ArchDescriptor a;
  a.input_dim = 3;
  a.hidden_sizes = {4, 2};
  a.n_classes_source = 5;
  a.n_classes_target = 3;
  CHECK(a.theta_size() == (4 * 3 + 4) + (2 * 4 + 2));
  CHECK(a.head_size(Head::source) == 5 * 2 + 5);
  CHECK(a.head_size(Head::target) == 3 * 2 + 3);

  const auto slots = theta_layout(a);
  REQUIRE(slots.size() == 2);
  CHECK(slots[1].weight_offset == 16);
  CHECK(slots[1].bias_offset == 24);

  a.hidden_sizes = {0};
  CHECK_THROWS_AS(a.validate(), ConfigError);
}

TEST_CASE("ModelParams checks vector lengths and head sharing", "[model]") {
  ArchDescriptor a = linear_arch(2, 2);
  CHECK_THROWS_AS(ModelParams(a, {}, std::vector<double>(5), std::vector<double>(6)), ShapeError);
  CHECK_NOTHROW(ModelParams(a, {}, std::vector<double>(6), std::vector<double>(6)));

  a.n_classes_target = 3;
  CHECK_THROWS_AS(ModelParams(a, true), ConfigError);

  ModelParams shared(linear_arch(2, 2), true);
  shared.head(Head::target)[0] = 7.0;
  CHECK(shared.head(Head::source)[0] == 7.0);
  CHECK(shared.phi_t_storage().empty());
}

TEST_CASE("forward of a linear model", "[model]") {
  ModelParams p(linear_arch(2, 2));
  CHECK(forward(p, Head::source, std::vector<double>{1.0, 0.0}) == std::vector<double>{0.0, 0.0});

  // W = [[1, 2], [3, 4]], b = 0: x = [1, 0] picks the first column.
  auto phi = p.head(Head::source);
  phi[0] = 1.0;
  phi[1] = 2.0;
  phi[2] = 3.0;
  phi[3] = 4.0;
  CHECK(forward(p, Head::source, std::vector<double>{1.0, 0.0}) == std::vector<double>{1.0, 3.0});
  // Target head is separate storage and still zero.
  CHECK(forward(p, Head::target, std::vector<double>{1.0, 0.0}) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("forward with all-zero parameters gives zero logits", "[model]") {
  ArchDescriptor a = linear_arch(2, 2);
  a.hidden_sizes = {3};
  ModelParams p(a);
  CHECK(forward(p, Head::source, std::vector<double>{0.3, -7.0}) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("forward rejects inputs of the wrong length", "[model]") {
  ModelParams p(linear_arch(2, 2));
  CHECK_THROWS_AS(forward(p, Head::source, std::vector<double>{1.0}), ShapeError);
  CHECK_THROWS_AS(per_example_grad(p, Head::source, std::vector<double>{1.0, 2.0}, 2), ShapeError);
}

TEST_CASE("forward matches an independent naive implementation", "[model]") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const ArchDescriptor a = oracle::random_arch(rng);
    const ModelParams p = ModelParams::random_init(a, false, rng());
    const auto x = oracle::random_vector(rng, a.input_dim);
    for (Head h : {Head::source, Head::target}) {
      const auto got = forward(p, h, x);
      const auto want = oracle::naive_forward(p, h, x);
      REQUIRE(got.size() == want.size());
      for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k] == Approx(want[k]).margin(1e-12));
    }
  }
}

TEST_CASE("forward is deterministic", "[model]") {
  std::mt19937_64 rng(5);
  ArchDescriptor a = linear_arch(3, 4);
  a.hidden_sizes = {6, 5};
  const ModelParams p = ModelParams::random_init(a, false, 9);
  const auto x = oracle::random_vector(rng, 3);
  const auto first = forward(p, Head::source, x);
  for (int i = 0; i < 5; ++i) CHECK(forward(p, Head::source, x) == first);
}

TEST_CASE("random_init is seeded and bounded by 1/sqrt(fan_in)", "[model]") {
  ArchDescriptor a = linear_arch(4, 3);
  a.hidden_sizes = {9};
  const ModelParams p = ModelParams::random_init(a, false, 42);
  CHECK(p == ModelParams::random_init(a, false, 42));
  CHECK_FALSE(p == ModelParams::random_init(a, false, 43));
  for (double v : p.theta()) CHECK(std::abs(v) <= 0.5);  // fan_in 4
  for (double v : p.phi_s()) CHECK(std::abs(v) <= 1.0 / 3.0);  // fan_in 9
}

TEST_CASE("gradient at zero parameters is softmax minus onehot", "[model]") {
  ModelParams p(linear_arch(2, 2));
  const std::vector<double> x{0.25, -2.0};
  const PerExampleGradient g = per_example_grad(p, Head::source, x, 0);
  CHECK(g.d_theta.empty());
  // d_phi = [dW (2x2 row-major), db]; dlogits = [-0.5, 0.5].
  CHECK(g.d_phi == std::vector<double>{-0.125, 1.0, 0.125, -1.0, -0.5, 0.5});
}

TEST_CASE("linear model gradient equals the logistic-regression closed form", "[model]") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + trial % 4;
    const std::size_t c = 2 + trial % 3;
    const ModelParams p = ModelParams::random_init(linear_arch(d, c), false, rng());
    const auto x = oracle::random_vector(rng, d);
    const std::size_t y = static_cast<std::size_t>(trial) % c;

    // (softmax(z) - e_y) outer x, then the bias part.
    const auto z = oracle::naive_forward(p, Head::target, x);
    double denom = 0.0;
    for (double v : z) denom += std::exp(v);
    std::vector<double> expected;
    for (std::size_t k = 0; k < c; ++k) {
      const double r = std::exp(z[k]) / denom - (k == y ? 1.0 : 0.0);
      for (std::size_t j = 0; j < d; ++j) expected.push_back(r * x[j]);
    }
    for (std::size_t k = 0; k < c; ++k) expected.push_back(std::exp(z[k]) / denom - (k == y ? 1.0 : 0.0));

    const auto g = per_example_grad(p, Head::target, x, y);
    REQUIRE(g.d_phi.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(g.d_phi[i] == Approx(expected[i]).margin(1e-14));
  }
}

TEST_CASE("per-example gradient matches central finite differences", "[model][gradcheck]") {
  std::mt19937_64 rng(2024);
  int checked = 0;
  while (checked < 100) {
    const ArchDescriptor a = oracle::random_arch(rng);
    const ModelParams p = ModelParams::random_init(a, false, rng());
    const auto x = oracle::random_vector(rng, a.input_dim);
    if (a.activation == Activation::relu && oracle::min_abs_preactivation(p, x) < 1e-3) continue;
    const Head head = checked % 2 == 0 ? Head::source : Head::target;
    const std::size_t y = rng() % a.n_classes(head);

    const auto g = per_example_grad(p, head, x, y);
    const auto fd = oracle::finite_difference_grad(p, head, x, y, 1e-5);
    CHECK(oracle::max_relative_error(g.d_theta, fd.d_theta) < 1e-5);
    CHECK(oracle::max_relative_error(g.d_phi, fd.d_phi) < 1e-5);
    ++checked;
  }
}

TEST_CASE("relu derivative at exactly zero is zero", "[model]") {
  ArchDescriptor a = linear_arch(2, 2);
  a.hidden_sizes = {2};
  a.activation = Activation::relu;
  ModelParams p(a);  // hidden pre-activations are exactly 0
  for (double& v : p.head(Head::source)) v = 1.0;
  p.head(Head::source)[0] = -1.0;
  const auto g = per_example_grad(p, Head::source, std::vector<double>{1.0, 1.0}, 0);
  for (double v : g.d_theta) CHECK(v == 0.0);
}

TEST_CASE("non-finite parameters raise a numerical error", "[model]") {
  ModelParams p(linear_arch(2, 2));
  p.head(Head::source)[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(per_example_grad(p, Head::source, std::vector<double>{1.0, 0.0}, 0), NumericalError);
}

TEST_CASE("batch_grads is the elementwise per-example gradient", "[model]") {
  std::mt19937_64 rng(8);
  ArchDescriptor a = linear_arch(3, 3);
  a.hidden_sizes = {4};
  const ModelParams p = ModelParams::random_init(a, false, 1);

  SECTION("singleton") {
    const auto x = oracle::random_vector(rng, 3);
    const std::vector<std::size_t> y{2};
    const auto gs = batch_grads(p, Head::source, x, y);
    REQUIRE(gs.size() == 1);
    CHECK(gs[0] == per_example_grad(p, Head::source, x, 2));
  }
  SECTION("duplicates give identical gradients") {
    const auto x = oracle::random_vector(rng, 3);
    std::vector<double> xs;
    for (int i = 0; i < 4; ++i) xs.insert(xs.end(), x.begin(), x.end());
    const std::vector<std::size_t> ys(4, 1);
    const auto gs = batch_grads(p, Head::target, xs, ys);
    for (const auto& g : gs) CHECK(g == gs[0]);
  }
  SECTION("random batch equals the sequential loop") {
    const auto xs = oracle::random_vector(rng, 3 * 7);
    std::vector<std::size_t> ys;
    for (int i = 0; i < 7; ++i) ys.push_back(rng() % 3);
    const auto gs = batch_grads(p, Head::source, xs, ys);
    for (std::size_t i = 0; i < ys.size(); ++i) {
      CHECK(gs[i] == per_example_grad(p, Head::source, std::span<const double>(xs).subspan(3 * i, 3), ys[i]));
    }
  }
  SECTION("errors carry the element index") {
    std::vector<double> xs(6, 0.0);
    const std::vector<std::size_t> ys{0, 5};
    CHECK_THROWS_WITH(batch_grads(p, Head::source, xs, ys), Catch::Matchers::ContainsSubstring("batch element 1"));
    CHECK_THROWS_AS(batch_grads(p, Head::source, std::vector<double>{}, std::vector<std::size_t>{}), ShapeError);
  }
}

TEST_CASE("a loss with zero logit gradient yields all-zero batch gradients", "[model]") {
  const ExampleLoss flat{
      [](std::span<const double>, std::size_t) { return LossValue{1.0}; },
      [](std::span<const double> z, std::size_t) { return std::vector<double>(z.size(), 0.0); }};
  ArchDescriptor a = linear_arch(2, 3);
  a.hidden_sizes = {3};
  const ModelParams p = ModelParams::random_init(a, false, 4);
  std::mt19937_64 rng(1);
  const auto xs = oracle::random_vector(rng, 2 * 5);
  const std::vector<std::size_t> ys{0, 1, 2, 0, 1};
  for (const auto& g : batch_grads(p, Head::source, xs, ys, flat)) {
    for (double v : g.d_theta) CHECK(v == 0.0);
    for (double v : g.d_phi) CHECK(v == 0.0);
  }
}
