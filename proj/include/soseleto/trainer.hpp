// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0
//
// Bilevel training with learned per-source-example weights.
//
// One iteration, for a source batch b and a target batch:
//
//   Q, R   <- per-example theta / phi_s gradients of the batch, scaled 1/n_s
//   theta  <- theta - lambda_p * Q alpha_b
//   phi_s  <- phi_s - lambda_p * R alpha_b
//   alpha_b <- clip_[0,1](alpha_b + lambda_alpha * lambda_p * Q^T dL_t/dtheta)
//   phi_t  <- phi_t - lambda_p * dL_t/dphi_t
//
// The target never updates theta directly; it only steers it through alpha.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "soseleto/analysis.hpp"
#include "soseleto/data.hpp"
#include "soseleto/gradient_matrix.hpp"
#include "soseleto/losses.hpp"
#include "soseleto/model.hpp"

namespace soseleto {

enum class TrainingMode { transfer, shared_classifier };
enum class WeightPath { clip, beta };

std::string_view to_string(TrainingMode m);
TrainingMode training_mode_from_string(std::string_view s);
std::string_view to_string(WeightPath w);
WeightPath weight_path_from_string(std::string_view s);

/// Per-source-example weights, each in [0, 1].
struct SourceWeights {
  std::vector<double> alpha;

  SourceWeights() = default;
  SourceWeights(std::size_t n, double init) : alpha(n, init) {}
  explicit SourceWeights(std::vector<double> a) : alpha(std::move(a)) {}

  std::size_t size() const noexcept { return alpha.size(); }
  /// Throws NumericalError naming the first entry outside [0, 1].
  void check_bounds() const;

  friend bool operator==(const SourceWeights&, const SourceWeights&) = default;
};

struct TrainerConfig {
  double lambda_p = 1.0;
  double lambda_alpha = 1.0;
  /// Replace lambda_alpha each iteration by the first-order descent bound
  /// sqrt(n_s) / (lambda_p * |Q^T dL_t/dtheta|), capped at lambda_alpha_max.
  bool lambda_alpha_auto = false;
  double lambda_alpha_max = 1e4;
  std::size_t source_batch = 32;
  std::size_t target_batch = 10;
  std::size_t epochs = 100;
  TrainingMode mode = TrainingMode::transfer;
  double alpha_init = 1.0;
  std::uint64_t rng_seed = 0;
  WeightPath weight_path = WeightPath::clip;
  /// Evaluate dL_t/dtheta before the interior step instead of after it.
  bool alpha_uses_prestep_theta = false;
  /// Record full-dataset L_s and L_t every iteration.
  bool record_losses = true;
  /// Keep a copy of alpha at the end of every epoch (and at epoch 0).
  bool alpha_snapshots = false;

  /// Throws ConfigError; called before any state is touched.
  void validate(std::size_t n_source, std::size_t n_target) const;
};

// --- single-iteration building blocks -------------------------------------

/// Column l = (1/n_s) * d loss(batch[l]) / d theta, n_s = source.size().
GradientMatrix build_Q(const ModelParams& params, const LabeledDataset& source,
                       std::span<const std::size_t> batch,
                       const ExampleLoss& loss = cross_entropy_loss());

/// Column l = (1/n_s) * d loss(batch[l]) / d phi_s.
GradientMatrix build_R(const ModelParams& params, const LabeledDataset& source,
                       std::span<const std::size_t> batch,
                       const ExampleLoss& loss = cross_entropy_loss());

struct SourceBatchGradients {
  GradientMatrix q;
  GradientMatrix r;
};

/// Q and R from one backward pass per example.
SourceBatchGradients build_QR(const ModelParams& params,
                              const LabeledDataset& source,
                              std::span<const std::size_t> batch,
                              const ExampleLoss& loss = cross_entropy_loss());

/// theta -= lambda_p * Q alpha_b;  phi_s -= lambda_p * R alpha_b.
void interior_step(ModelParams& params, const GradientMatrix& q,
                   const GradientMatrix& r, std::span<const double> alpha_b,
                   double lambda_p);

/// Piecewise-linear sigmoid: 0 below 0, identity on [0, 1], 1 above 1.
double piecewise_sigmoid(double beta);
/// Its derivative, 1 on the closed interval [0, 1] and 0 elsewhere.
double piecewise_sigmoid_deriv(double beta);

/// One unconstrained step in beta space:
///   beta + step * diag(sigma'(beta)) * v
/// Repeated application without re-projection can park beta outside [0, 1]
/// where sigma' = 0, after which it never moves again.
std::vector<double> beta_step(std::span<const double> beta,
                              std::span<const double> v, double step);

/// alpha_b + lambda_alpha * lambda_p * Q^T g, constrained to [0, 1].
///
/// WeightPath::clip clips directly. WeightPath::beta steps beta = alpha
/// through the sigmoid Jacobian, maps back with sigma and keeps beta equal to
/// alpha; both paths give bitwise-identical results.
std::vector<double> exterior_step(std::span<const double> alpha_b,
                                  const GradientMatrix& q,
                                  std::span<const double> target_grad_theta,
                                  double lambda_alpha, double lambda_p,
                                  WeightPath path);

/// Mean target-batch loss and its gradients w.r.t. theta and the target head.
struct TargetGradient {
  double loss = 0.0;
  std::vector<double> d_theta;
  std::vector<double> d_phi;
};

TargetGradient target_gradient(const ModelParams& params,
                               const LabeledDataset& target,
                               std::span<const std::size_t> batch,
                               const ExampleLoss& loss = cross_entropy_loss());

/// phi_t -= lambda_p * d_phi. Only the target head moves (the shared head in
/// shared-classifier mode); theta is never touched.
void target_step(ModelParams& params, std::span<const double> d_phi,
                 double lambda_p);

/// Computes the target-batch gradient and applies target_step.
void target_step(ModelParams& params, const LabeledDataset& target,
                 std::span<const std::size_t> batch, double lambda_p,
                 const ExampleLoss& loss = cross_entropy_loss());

// --- batch schedule --------------------------------------------------------

/// Deterministic batch order as a pure function of (seed, iteration), so a
/// run can be resumed at any iteration.
///
/// Source: each epoch is a fresh shuffle of [0, n_s) cut into consecutive
/// batches; the last batch of an epoch may be short.
/// Target: an endless stream of shuffled passes over [0, n_t); iteration t
/// takes positions [t * target_batch, (t + 1) * target_batch).
class BatchSchedule {
 public:
  BatchSchedule(std::size_t n_source, std::size_t n_target,
                std::size_t source_batch, std::size_t target_batch,
                std::uint64_t seed);

  std::size_t batches_per_epoch() const noexcept { return batches_per_epoch_; }
  std::vector<std::size_t> epoch_permutation(std::uint64_t epoch) const;
  std::vector<std::size_t> source_batch(std::uint64_t iteration) const;
  std::vector<std::size_t> target_batch(std::uint64_t iteration) const;

 private:
  std::vector<std::size_t> target_pass(std::uint64_t pass) const;

  std::size_t n_source_;
  std::size_t n_target_;
  std::size_t source_batch_;
  std::size_t target_batch_;
  std::uint64_t seed_;
  std::size_t batches_per_epoch_;

  mutable std::optional<std::uint64_t> cached_epoch_;
  mutable std::vector<std::size_t> cached_permutation_;
};

// --- run record -------------------------------------------------------------

struct IterationRecord {
  std::uint64_t iteration = 0;  // 0 = initial state, k = after k updates
  std::uint64_t epoch = 0;
  double source_loss = 0.0;     // NaN when losses are not recorded
  double target_loss = 0.0;
  double mean_alpha_clean = 0.0;  // NaN without a corruption mask
  double mean_alpha_noisy = 0.0;
  FirstOrderDelta delta;          // all NaN on the initial row
  double lambda_alpha = 0.0;      // value used this iteration
  double lambda_alpha_bound = 0.0;

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

struct AlphaSnapshot {
  std::uint64_t epoch = 0;
  std::vector<double> alpha;
};

/// Append-only log of a run plus its final state.
class RunRecord {
 public:
  RunRecord(ModelParams params, SourceWeights weights)
      : final_params(std::move(params)), final_weights(std::move(weights)) {}

  /// Throws std::logic_error unless iteration indices strictly increase.
  void append(const IterationRecord& r);
  const std::vector<IterationRecord>& iterations() const noexcept { return rows_; }

  std::vector<AlphaSnapshot> snapshots;
  ModelParams final_params;
  SourceWeights final_weights;

 private:
  std::vector<IterationRecord> rows_;
};

/// Columns: iter,epoch,L_s,L_t,mean_alpha_clean,mean_alpha_noisy,dLt_fo,
/// dLt_term1,dLt_term2,dLt_term3,lambda_alpha,lambda_alpha_bound.
/// With `header == false` only data rows are written (for appending).
void write_run_csv(const std::filesystem::path& path, const RunRecord& record,
                   bool header = true);

/// Long format: epoch,index,alpha.
void write_alpha_snapshots_csv(const std::filesystem::path& path,
                               const std::vector<AlphaSnapshot>& snapshots);

// --- trainer ---------------------------------------------------------------

/// Everything needed to continue a run, given the same datasets and config.
struct TrainerState {
  ModelParams params;
  SourceWeights weights;
  std::uint64_t iteration = 0;
};

class Trainer {
 public:
  /// Validates the config against the datasets before anything else.
  Trainer(const LabeledDataset& source, const LabeledDataset& target,
          TrainerConfig config, TrainerState initial);

  /// Runs one iteration and returns its record. Throws NumericalError (with
  /// the iteration number) on non-finite gradients or out-of-range weights.
  IterationRecord step();

  /// Record for the current state without updating (the iteration-0 row).
  IterationRecord snapshot_record() const;

  std::uint64_t iteration() const noexcept { return state_.iteration; }
  std::uint64_t total_iterations() const noexcept;
  bool finished() const noexcept { return iteration() >= total_iterations(); }

  const TrainerState& state() const noexcept { return state_; }
  const ModelParams& params() const noexcept { return state_.params; }
  const SourceWeights& weights() const noexcept { return state_.weights; }
  const TrainerConfig& config() const noexcept { return config_; }
  const BatchSchedule& schedule() const noexcept { return schedule_; }

 private:
  void fill_metrics(IterationRecord& r) const;

  const LabeledDataset& source_;
  const LabeledDataset& target_;
  TrainerConfig config_;
  BatchSchedule schedule_;
  TrainerState state_;
};

/// Initial state: seeded parameter init and alpha = alpha_init everywhere.
TrainerState initial_state(const ArchDescriptor& arch,
                           const LabeledDataset& source,
                           const TrainerConfig& config);

/// Runs from `start` until the configured number of epochs, or until
/// `max_iterations` further iterations. A fresh start (iteration 0) records
/// the initial-state row first.
RunRecord run_training(const LabeledDataset& source,
                       const LabeledDataset& target,
                       const TrainerConfig& config, TrainerState start,
                       std::optional<std::uint64_t> max_iterations = {});

RunRecord run_training(const LabeledDataset& source,
                       const LabeledDataset& target,
                       const TrainerConfig& config, const ArchDescriptor& arch);

}  // namespace soseleto
