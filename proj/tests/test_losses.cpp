// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "soseleto/data.hpp"
#include "soseleto/error.hpp"
#include "soseleto/losses.hpp"
#include "soseleto/model.hpp"
#include "soseleto/trainer.hpp"

using namespace soseleto;
using Catch::Approx;

namespace {

LabeledDataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t dim,
                              std::size_t classes) {
  LabeledDataset d;
  d.dim = dim;
  d.n_classes = classes;
  d.features = oracle::random_vector(rng, n * dim);
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(rng() % classes);
  return d;
}

ModelParams small_model(std::uint64_t seed) {
  ArchDescriptor a;
  a.input_dim = 3;
  a.hidden_sizes = {4};
  a.n_classes_source = 3;
  a.n_classes_target = 3;
  return ModelParams::random_init(a, false, seed);
}

// sum_j alpha_j * loss_j / n, by an explicit loop over the naive oracle.
double loop_weighted_loss(const ModelParams& p, std::span<const double> alpha,
                          const LabeledDataset& d) {
  double acc = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    const std::vector<double> x(d.row(j).begin(), d.row(j).end());
    acc += alpha[j] * oracle::naive_loss(p, Head::source, x, d.labels[j]);
  }
  return acc / static_cast<double>(d.size());
}

}  // namespace

TEST_CASE("cross-entropy of uniform logits is log of the class count", "[losses]") {
  CHECK(cross_entropy(std::vector<double>{0.0, 0.0}, 0).value == Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(cross_entropy(std::vector<double>{0.0, 0.0}, 0).value == Approx(0.693147).margin(1e-6));
}

TEST_CASE("cross-entropy is stable for large logits", "[losses]") {
  const double v = cross_entropy(std::vector<double>{1000.0, 0.0}, 0).value;
  CHECK(std::isfinite(v));
  CHECK(v == Approx(0.0).margin(1e-300));
  CHECK(cross_entropy(std::vector<double>{1000.0, 0.0}, 1).value == Approx(1000.0));
  const auto g = cross_entropy_logit_grad(std::vector<double>{1000.0, 0.0}, 1);
  CHECK(g[0] == Approx(1.0));
  CHECK(g[1] == Approx(-1.0));
}

TEST_CASE("cross-entropy matches the naive formula", "[losses]") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = 2 + i % 5;
    const auto z = oracle::random_vector(rng, k, 3.0);
    const std::size_t y = rng() % k;
    CHECK(cross_entropy(z, y).value ==
          Approx(static_cast<double>(oracle::naive_cross_entropy(z, y))).epsilon(1e-13).margin(1e-15));
  }
}

TEST_CASE("cross-entropy rejects bad inputs", "[losses]") {
  CHECK_THROWS_AS(cross_entropy(std::vector<double>{0.0, 0.0}, 2), ShapeError);
  CHECK_THROWS_AS(cross_entropy(std::vector<double>{std::nan(""), 0.0}, 0), NumericalError);
  CHECK_THROWS_AS(cross_entropy(std::vector<double>{INFINITY, 0.0}, 0), NumericalError);
}

TEST_CASE("weighted source loss", "[losses]") {
  std::mt19937_64 rng(99);
  const LabeledDataset d = random_dataset(rng, 20, 3, 3);
  const ModelParams p = small_model(5);

  SECTION("all-zero weights annihilate the loss") {
    CHECK(weighted_source_loss(p, std::vector<double>(20, 0.0), d).value == 0.0);
  }
  SECTION("all-one weights give the unweighted mean") {
    double mean = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
      mean += cross_entropy(forward(p, Head::source, d.row(j)), d.labels[j]).value;
    }
    mean /= 20.0;
    CHECK(weighted_source_loss(p, SourceWeights(20, 1.0), d).value == Approx(mean).epsilon(1e-14));
  }
  SECTION("random weights match the loop oracle") {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> alpha(20);
    for (auto& a : alpha) a = u(rng);
    CHECK(weighted_source_loss(p, alpha, d).value == Approx(loop_weighted_loss(p, alpha, d)).epsilon(1e-12));
  }
  SECTION("length mismatch") {
    CHECK_THROWS_AS(weighted_source_loss(p, std::vector<double>(19, 1.0), d), ShapeError);
  }
}

TEST_CASE("weighted source loss is linear in alpha", "[losses][property]") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    const LabeledDataset d = random_dataset(rng, 15, 3, 3);
    const ModelParams p = small_model(rng());
    // Unclipped, possibly negative weights: this is a property of the formula.
    const auto a1 = oracle::random_vector(rng, 15);
    const auto a2 = oracle::random_vector(rng, 15);
    std::vector<double> sum(15);
    for (std::size_t i = 0; i < 15; ++i) sum[i] = a1[i] + a2[i];
    const double c = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
    std::vector<double> scaled(15);
    for (std::size_t i = 0; i < 15; ++i) scaled[i] = c * a1[i];

    const double l1 = weighted_source_loss(p, a1, d).value;
    const double l2 = weighted_source_loss(p, a2, d).value;
    CHECK(weighted_source_loss(p, sum, d).value == Approx(l1 + l2).margin(1e-12));
    CHECK(weighted_source_loss(p, scaled, d).value == Approx(c * l1).margin(1e-12));
  }
}

TEST_CASE("target loss", "[losses]") {
  ArchDescriptor a;
  a.input_dim = 2;
  a.n_classes_source = 2;
  a.n_classes_target = 2;
  const ModelParams zero(a);

  LabeledDataset one;
  one.dim = 2;
  one.n_classes = 2;
  one.features = {0.4, -1.2};
  one.labels = {1};
  CHECK(target_loss(zero, one).value == Approx(std::log(2.0)).epsilon(1e-15));

  std::mt19937_64 rng(4);
  const ModelParams p = ModelParams::random_init(a, false, 3);
  LabeledDataset many = one;
  for (int i = 0; i < 6; ++i) {
    many.features.insert(many.features.end(), one.features.begin(), one.features.end());
    many.labels.push_back(1);
  }
  CHECK(target_loss(p, many).value == Approx(target_loss(p, one).value).epsilon(1e-15));

  LabeledDataset rnd = random_dataset(rng, 30, 2, 2);
  double acc = 0.0;
  for (std::size_t i = 0; i < rnd.size(); ++i) {
    const std::vector<double> x(rnd.row(i).begin(), rnd.row(i).end());
    acc += oracle::naive_loss(p, Head::target, x, rnd.labels[i]);
  }
  CHECK(target_loss(p, rnd).value == Approx(acc / 30.0).epsilon(1e-12));

  LabeledDataset empty;
  empty.dim = 2;
  empty.n_classes = 2;
  CHECK_THROWS_AS(target_loss(p, empty), DomainError);
}

TEST_CASE("aggregate losses are nonnegative for nonnegative weights", "[losses][property]") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const LabeledDataset d = random_dataset(rng, 12, 3, 3);
    const ModelParams p = small_model(rng());
    std::vector<double> alpha(12);
    for (auto& a : alpha) a = u(rng);
    CHECK(weighted_source_loss(p, alpha, d).value >= 0.0);
    CHECK(target_loss(p, d).value >= 0.0);
  }
}
