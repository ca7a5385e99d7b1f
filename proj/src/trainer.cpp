// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0

#include "soseleto/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "soseleto/error.hpp"

namespace soseleto {

std::string_view to_string(TrainingMode m) {
  return m == TrainingMode::transfer ? "transfer" : "shared_classifier";
}

TrainingMode training_mode_from_string(std::string_view s) {
  if (s == "transfer") return TrainingMode::transfer;
  if (s == "shared_classifier" || s == "shared") return TrainingMode::shared_classifier;
  throw ConfigError("unknown training mode '" + std::string(s) + "'");
}

std::string_view to_string(WeightPath w) {
  return w == WeightPath::clip ? "clip" : "beta";
}

WeightPath weight_path_from_string(std::string_view s) {
  if (s == "clip") return WeightPath::clip;
  if (s == "beta") return WeightPath::beta;
  throw ConfigError("unknown weight path '" + std::string(s) + "'");
}

void SourceWeights::check_bounds() const {
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    if (!(alpha[j] >= 0.0 && alpha[j] <= 1.0)) {
      throw NumericalError("alpha[" + std::to_string(j) + "] = " +
                           std::to_string(alpha[j]) + " outside [0, 1]");
    }
  }
}

void TrainerConfig::validate(std::size_t n_source, std::size_t n_target) const {
  if (!(lambda_p > 0.0) || !std::isfinite(lambda_p)) {
    throw ConfigError("lambda_p must be a positive finite number");
  }
  if (!(lambda_alpha >= 0.0) || !std::isfinite(lambda_alpha)) {
    throw ConfigError("lambda_alpha must be a nonnegative finite number");
  }
  if (lambda_alpha_auto && !(lambda_alpha_max >= 0.0)) {
    throw ConfigError("lambda_alpha_max must be nonnegative");
  }
  if (!(alpha_init >= 0.0 && alpha_init <= 1.0)) {
    throw ConfigError("alpha_init must lie in [0, 1]");
  }
  if (n_source == 0) throw ConfigError("source dataset is empty");
  if (n_target == 0) throw ConfigError("target dataset is empty");
  if (source_batch == 0 || source_batch > n_source) {
    throw ConfigError("source_batch must lie in [1, n_source = " +
                      std::to_string(n_source) + "]");
  }
  if (target_batch == 0 || target_batch > n_target) {
    throw ConfigError("target_batch must lie in [1, n_target = " +
                      std::to_string(n_target) + "]");
  }
}

// --- building blocks --------------------------------------------------------

SourceBatchGradients build_QR(const ModelParams& params,
                              const LabeledDataset& source,
                              std::span<const std::size_t> batch,
                              const ExampleLoss& loss) {
  if (batch.empty()) throw ShapeError("empty source batch");
  const double n_s = static_cast<double>(source.size());
  SourceBatchGradients out{
      GradientMatrix(params.arch().theta_size(), batch.size()),
      GradientMatrix(params.arch().head_size(Head::source), batch.size())};
  for (std::size_t l = 0; l < batch.size(); ++l) {
    const std::size_t j = batch[l];
    if (j >= source.size()) {
      throw ShapeError("source index " + std::to_string(j) + " out of range");
    }
    const PerExampleGradient g =
        per_example_grad(params, Head::source, source.row(j), source.labels[j], loss);
    auto qc = out.q.column(l);
    for (std::size_t i = 0; i < qc.size(); ++i) qc[i] = g.d_theta[i] / n_s;
    auto rc = out.r.column(l);
    for (std::size_t i = 0; i < rc.size(); ++i) rc[i] = g.d_phi[i] / n_s;
  }
  return out;
}

GradientMatrix build_Q(const ModelParams& params, const LabeledDataset& source,
                       std::span<const std::size_t> batch,
                       const ExampleLoss& loss) {
  return build_QR(params, source, batch, loss).q;
}

GradientMatrix build_R(const ModelParams& params, const LabeledDataset& source,
                       std::span<const std::size_t> batch,
                       const ExampleLoss& loss) {
  return build_QR(params, source, batch, loss).r;
}

void interior_step(ModelParams& params, const GradientMatrix& q,
                   const GradientMatrix& r, std::span<const double> alpha_b,
                   double lambda_p) {
  if (q.rows() != params.theta().size() ||
      r.rows() != params.head(Head::source).size()) {
    throw ShapeError("interior_step: gradient matrices do not match the model");
  }
  const std::vector<double> dtheta = q.times(alpha_b);
  const std::vector<double> dphi = r.times(alpha_b);
  auto theta = params.theta();
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lambda_p * dtheta[i];
  auto phi = params.head(Head::source);
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] -= lambda_p * dphi[i];
}

double piecewise_sigmoid(double beta) {
  if (beta < 0.0) return 0.0;
  if (beta > 1.0) return 1.0;
  return beta;
}

double piecewise_sigmoid_deriv(double beta) {
  return (beta >= 0.0 && beta <= 1.0) ? 1.0 : 0.0;
}

std::vector<double> beta_step(std::span<const double> beta,
                              std::span<const double> v, double step) {
  if (beta.size() != v.size()) throw ShapeError("beta_step: length mismatch");
  std::vector<double> out(beta.size());
  for (std::size_t j = 0; j < beta.size(); ++j) {
    out[j] = beta[j] + step * (piecewise_sigmoid_deriv(beta[j]) * v[j]);
  }
  return out;
}

std::vector<double> exterior_step(std::span<const double> alpha_b,
                                  const GradientMatrix& q,
                                  std::span<const double> target_grad_theta,
                                  double lambda_alpha, double lambda_p,
                                  WeightPath path) {
  if (alpha_b.size() != q.cols()) {
    throw ShapeError("exterior_step: alpha_b has length " +
                     std::to_string(alpha_b.size()) + ", batch has " +
                     std::to_string(q.cols()) + " columns");
  }
  for (double g : target_grad_theta) {
    if (!std::isfinite(g)) throw NumericalError("non-finite target gradient");
  }
  const std::vector<double> v = q.transpose_times(target_grad_theta);
  const double step = lambda_alpha * lambda_p;

  std::vector<double> out(alpha_b.size());
  if (path == WeightPath::clip) {
    for (std::size_t j = 0; j < out.size(); ++j) {
      out[j] = std::clamp(alpha_b[j] + step * v[j], 0.0, 1.0);
    }
    return out;
  }
  // beta path: beta_m = alpha_m lies in [0, 1], so sigma'(beta_m) = 1 and
  // the step equals the clip path's; sigma then maps back into [0, 1].
  const std::vector<double> beta = beta_step(alpha_b, v, step);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = piecewise_sigmoid(beta[j]);
  return out;
}

TargetGradient target_gradient(const ModelParams& params,
                               const LabeledDataset& target,
                               std::span<const std::size_t> batch,
                               const ExampleLoss& loss) {
  if (batch.empty()) throw ShapeError("empty target batch");
  TargetGradient out;
  out.d_theta.assign(params.arch().theta_size(), 0.0);
  out.d_phi.assign(params.arch().head_size(Head::target), 0.0);
  for (std::size_t i : batch) {
    if (i >= target.size()) {
      throw ShapeError("target index " + std::to_string(i) + " out of range");
    }
    const auto x = target.row(i);
    const auto logits = forward(params, Head::target, x);
    out.loss += loss.value(logits, target.labels[i]).value;
    const PerExampleGradient g =
        per_example_grad(params, Head::target, x, target.labels[i], loss);
    for (std::size_t k = 0; k < g.d_theta.size(); ++k) out.d_theta[k] += g.d_theta[k];
    for (std::size_t k = 0; k < g.d_phi.size(); ++k) out.d_phi[k] += g.d_phi[k];
  }
  const double n = static_cast<double>(batch.size());
  out.loss /= n;
  for (double& v : out.d_theta) v /= n;
  for (double& v : out.d_phi) v /= n;
  return out;
}

void target_step(ModelParams& params, std::span<const double> d_phi,
                 double lambda_p) {
  auto phi = params.head(Head::target);
  if (d_phi.size() != phi.size()) {
    throw ShapeError("target_step: head gradient has length " +
                     std::to_string(d_phi.size()) + ", head has " +
                     std::to_string(phi.size()));
  }
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] -= lambda_p * d_phi[i];
}

void target_step(ModelParams& params, const LabeledDataset& target,
                 std::span<const std::size_t> batch, double lambda_p,
                 const ExampleLoss& loss) {
  const TargetGradient g = target_gradient(params, target, batch, loss);
  target_step(params, g.d_phi, lambda_p);
}

// --- schedule ---------------------------------------------------------------

namespace {

// Independent generator per (seed, stream, index).
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint32_t stream,
                           std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), stream,
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

constexpr std::uint32_t kSourceStream = 1;
constexpr std::uint32_t kTargetStream = 2;

std::vector<std::size_t> shuffled_range(std::size_t n, std::mt19937_64 rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

}  // namespace

BatchSchedule::BatchSchedule(std::size_t n_source, std::size_t n_target,
                             std::size_t source_batch, std::size_t target_batch,
                             std::uint64_t seed)
    : n_source_(n_source),
      n_target_(n_target),
      source_batch_(source_batch),
      target_batch_(target_batch),
      seed_(seed),
      batches_per_epoch_(source_batch == 0
                             ? 0
                             : (n_source + source_batch - 1) / source_batch) {
  if (n_source == 0 || n_target == 0 || source_batch == 0 || target_batch == 0) {
    throw ConfigError("batch schedule needs nonempty datasets and batches");
  }
}

std::vector<std::size_t> BatchSchedule::epoch_permutation(std::uint64_t epoch) const {
  if (cached_epoch_ != epoch) {
    cached_permutation_ = shuffled_range(n_source_, stream_rng(seed_, kSourceStream, epoch));
    cached_epoch_ = epoch;
  }
  return cached_permutation_;
}

std::vector<std::size_t> BatchSchedule::source_batch(std::uint64_t iteration) const {
  const std::uint64_t epoch = iteration / batches_per_epoch_;
  const std::size_t k = static_cast<std::size_t>(iteration % batches_per_epoch_);
  if (cached_epoch_ != epoch) epoch_permutation(epoch);
  const std::size_t begin = k * source_batch_;
  const std::size_t end = std::min(n_source_, begin + source_batch_);
  return {cached_permutation_.begin() + static_cast<std::ptrdiff_t>(begin),
          cached_permutation_.begin() + static_cast<std::ptrdiff_t>(end)};
}

std::vector<std::size_t> BatchSchedule::target_pass(std::uint64_t pass) const {
  return shuffled_range(n_target_, stream_rng(seed_, kTargetStream, pass));
}

std::vector<std::size_t> BatchSchedule::target_batch(std::uint64_t iteration) const {
  std::vector<std::size_t> out;
  out.reserve(target_batch_);
  std::uint64_t pos = iteration * target_batch_;
  std::uint64_t pass = pos / n_target_;
  std::vector<std::size_t> perm = target_pass(pass);
  for (std::size_t k = 0; k < target_batch_; ++k, ++pos) {
    if (pos / n_target_ != pass) {
      pass = pos / n_target_;
      perm = target_pass(pass);
    }
    out.push_back(perm[pos % n_target_]);
  }
  return out;
}

// --- run record -------------------------------------------------------------

void RunRecord::append(const IterationRecord& r) {
  if (!rows_.empty() && r.iteration <= rows_.back().iteration) {
    throw std::logic_error("run record: iteration " + std::to_string(r.iteration) +
                           " does not follow " +
                           std::to_string(rows_.back().iteration));
  }
  rows_.push_back(r);
}

namespace {

void append_number(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

void write_file(const std::filesystem::path& path, const std::string& text,
                bool append) {
  std::ofstream f(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

void write_run_csv(const std::filesystem::path& path, const RunRecord& record,
                   bool header) {
  std::string out;
  if (header) {
    out +=
        "iter,epoch,L_s,L_t,mean_alpha_clean,mean_alpha_noisy,dLt_fo,"
        "dLt_term1,dLt_term2,dLt_term3,lambda_alpha,lambda_alpha_bound\n";
  }
  for (const IterationRecord& r : record.iterations()) {
    out += std::to_string(r.iteration);
    out += ',';
    out += std::to_string(r.epoch);
    for (double v : {r.source_loss, r.target_loss, r.mean_alpha_clean,
                     r.mean_alpha_noisy, r.delta.total, r.delta.term_align,
                     r.delta.term_outer, r.delta.term_head, r.lambda_alpha,
                     r.lambda_alpha_bound}) {
      out += ',';
      append_number(out, v);
    }
    out += '\n';
  }
  write_file(path, out, !header);
}

void write_alpha_snapshots_csv(const std::filesystem::path& path,
                               const std::vector<AlphaSnapshot>& snapshots) {
  std::string out = "epoch,index,alpha\n";
  for (const AlphaSnapshot& s : snapshots) {
    for (std::size_t j = 0; j < s.alpha.size(); ++j) {
      out += std::to_string(s.epoch);
      out += ',';
      out += std::to_string(j);
      out += ',';
      append_number(out, s.alpha[j]);
      out += '\n';
    }
  }
  write_file(path, out, false);
}

// --- trainer ----------------------------------------------------------------

namespace {

void check_compatible(const LabeledDataset& source, const LabeledDataset& target,
                      const TrainerConfig& config, const TrainerState& state) {
  source.validate();
  target.validate();
  config.validate(source.size(), target.size());
  const ArchDescriptor& arch = state.params.arch();
  const bool shared = config.mode == TrainingMode::shared_classifier;
  if (shared && arch.n_classes_source != arch.n_classes_target) {
    throw ConfigError("shared_classifier mode requires equal source and target class counts");
  }
  if (shared && source.n_classes != target.n_classes) {
    throw ConfigError("shared_classifier mode requires source and target datasets with equal class counts (" +
                      std::to_string(source.n_classes) + " vs " +
                      std::to_string(target.n_classes) + ")");
  }
  if (state.params.shared_head() != shared) {
    throw ConfigError("model head sharing does not match the training mode");
  }
  if (source.dim != arch.input_dim || target.dim != arch.input_dim) {
    throw ConfigError("dataset feature dimension does not match arch.input_dim");
  }
  if (source.n_classes > arch.n_classes_source) {
    throw ConfigError("source dataset has more classes than the source head");
  }
  if (target.n_classes > arch.n_classes_target) {
    throw ConfigError("target dataset has more classes than the target head");
  }
  if (state.weights.size() != source.size()) {
    throw ConfigError("weight vector length does not match the source dataset");
  }
  state.weights.check_bounds();
}

double mean_over(std::span<const double> alpha, const std::vector<bool>& mask,
                 bool cohort) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    if (mask[j] == cohort) {
      sum += alpha[j];
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

Trainer::Trainer(const LabeledDataset& source, const LabeledDataset& target,
                 TrainerConfig config, TrainerState initial)
    : source_(source),
      target_(target),
      config_((check_compatible(source, target, config, initial), config)),
      schedule_(source.size(), target.size(), config.source_batch,
                config.target_batch, config.rng_seed),
      state_(std::move(initial)) {}

std::uint64_t Trainer::total_iterations() const noexcept {
  return static_cast<std::uint64_t>(config_.epochs) * schedule_.batches_per_epoch();
}

void Trainer::fill_metrics(IterationRecord& r) const {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  r.epoch = state_.iteration / schedule_.batches_per_epoch();
  if (config_.record_losses) {
    r.source_loss = weighted_source_loss(state_.params, state_.weights, source_).value;
    r.target_loss = target_loss(state_.params, target_).value;
  } else {
    r.source_loss = nan;
    r.target_loss = nan;
  }
  if (source_.corruption_mask) {
    r.mean_alpha_clean = mean_over(state_.weights.alpha, *source_.corruption_mask, false);
    r.mean_alpha_noisy = mean_over(state_.weights.alpha, *source_.corruption_mask, true);
  } else {
    r.mean_alpha_clean = nan;
    r.mean_alpha_noisy = nan;
  }
}

IterationRecord Trainer::snapshot_record() const {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  IterationRecord r;
  r.iteration = state_.iteration;
  r.delta = {nan, nan, nan, nan};
  r.lambda_alpha = nan;
  r.lambda_alpha_bound = nan;
  fill_metrics(r);
  return r;
}

IterationRecord Trainer::step() {
  const std::uint64_t t = state_.iteration;
  try {
    const std::vector<std::size_t> batch = schedule_.source_batch(t);
    const std::vector<std::size_t> tbatch = schedule_.target_batch(t);
    ModelParams& params = state_.params;

    const SourceBatchGradients qr = build_QR(params, source_, batch);
    std::vector<double> alpha_b(batch.size());
    for (std::size_t l = 0; l < batch.size(); ++l) alpha_b[l] = state_.weights.alpha[batch[l]];

    std::optional<TargetGradient> tg;
    if (config_.alpha_uses_prestep_theta) tg = target_gradient(params, target_, tbatch);

    interior_step(params, qr.q, qr.r, alpha_b, config_.lambda_p);

    if (!tg) tg = target_gradient(params, target_, tbatch);

    const double v_norm = norm2(qr.q.transpose_times(tg->d_theta));
    const double bound =
        sufficient_lambda_alpha(source_.size(), config_.lambda_p, v_norm);
    const double lambda_alpha = config_.lambda_alpha_auto
                                    ? std::min(bound, config_.lambda_alpha_max)
                                    : config_.lambda_alpha;

    const std::vector<double> alpha_new =
        exterior_step(alpha_b, qr.q, tg->d_theta, lambda_alpha,
                      config_.lambda_p, config_.weight_path);
    for (std::size_t l = 0; l < batch.size(); ++l) {
      state_.weights.alpha[batch[l]] = alpha_new[l];
    }

    target_step(params, tg->d_phi, config_.lambda_p);

    for (double v : params.theta()) {
      if (!std::isfinite(v)) throw NumericalError("non-finite theta after update");
    }
    for (std::size_t l = 0; l < batch.size(); ++l) {
      const double a = state_.weights.alpha[batch[l]];
      if (!(a >= 0.0 && a <= 1.0)) {
        throw NumericalError("alpha[" + std::to_string(batch[l]) + "] = " +
                             std::to_string(a) + " left [0, 1]");
      }
    }

    IterationRecord r;
    r.delta = first_order_delta(qr.q, alpha_b, tg->d_theta, tg->d_phi,
                                config_.lambda_p, lambda_alpha);
    r.lambda_alpha = lambda_alpha;
    r.lambda_alpha_bound = bound;
    ++state_.iteration;
    r.iteration = state_.iteration;
    fill_metrics(r);
    // Epoch of the batch just processed, not of the next one.
    r.epoch = t / schedule_.batches_per_epoch();
    return r;
  } catch (const NumericalError& e) {
    throw NumericalError("iteration " + std::to_string(t + 1) + ": " + e.what());
  }
}

TrainerState initial_state(const ArchDescriptor& arch,
                           const LabeledDataset& source,
                           const TrainerConfig& config) {
  const bool shared = config.mode == TrainingMode::shared_classifier;
  if (shared && arch.n_classes_source != arch.n_classes_target) {
    throw ConfigError("shared_classifier mode requires equal source and target class counts");
  }
  return TrainerState{ModelParams::random_init(arch, shared, config.rng_seed),
                      SourceWeights(source.size(), config.alpha_init), 0};
}

RunRecord run_training(const LabeledDataset& source,
                       const LabeledDataset& target,
                       const TrainerConfig& config, TrainerState start,
                       std::optional<std::uint64_t> max_iterations) {
  Trainer trainer(source, target, config, std::move(start));
  RunRecord record(trainer.params(), trainer.weights());
  const std::uint64_t bpe = trainer.schedule().batches_per_epoch();

  if (trainer.iteration() == 0) {
    record.append(trainer.snapshot_record());
    if (config.alpha_snapshots) record.snapshots.push_back({0, trainer.weights().alpha});
  }
  std::uint64_t budget = max_iterations.value_or(std::numeric_limits<std::uint64_t>::max());
  while (!trainer.finished() && budget-- > 0) {
    record.append(trainer.step());
    if (config.alpha_snapshots && trainer.iteration() % bpe == 0) {
      record.snapshots.push_back({trainer.iteration() / bpe, trainer.weights().alpha});
    }
  }
  record.final_params = trainer.params();
  record.final_weights = trainer.weights();
  return record;
}

RunRecord run_training(const LabeledDataset& source,
                       const LabeledDataset& target,
                       const TrainerConfig& config, const ArchDescriptor& arch) {
  source.validate();
  target.validate();
  config.validate(source.size(), target.size());
  return run_training(source, target, config, initial_state(arch, source, config));
}

}  // namespace soseleto
