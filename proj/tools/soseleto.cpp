// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0
//
// soseleto synth  [--config FILE] [overrides...]
// soseleto train  --config FILE   [overrides...]
// soseleto report RUN_DIR [--thresholds 0,0.1,...]

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "soseleto/error.hpp"
#include "soseleto/experiment.hpp"

namespace {

using soseleto::ExperimentConfig;

// Flag overrides applied on top of the config file; unset flags leave the
// file's value alone.
struct Overrides {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> data_seed;
  std::optional<std::size_t> epochs;
  std::optional<double> lambda_p;
  std::optional<double> lambda_alpha;
  bool lambda_alpha_auto = false;
  std::optional<double> lambda_alpha_max;
  std::optional<std::size_t> source_batch;
  std::optional<std::size_t> target_batch;
  std::optional<double> alpha_init;
  std::optional<std::string> mode;
  std::optional<std::string> weight_path;
  bool prestep_theta = false;
  bool snapshots = false;
  bool no_losses = false;
  std::optional<std::string> resume;
  std::optional<std::uint64_t> max_iters;
  std::optional<std::size_t> n_source;
  std::optional<std::size_t> n_target;
  std::optional<double> noise;
  std::vector<double> thresholds;
  std::vector<std::size_t> hidden;
  std::optional<std::string> activation;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON experiment manifest");
  cmd->add_option("-o,--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "trainer RNG seed (init, batch order)");
  cmd->add_option("--epochs", o.epochs, "number of source epochs");
  cmd->add_option("--lambda-p", o.lambda_p, "interior learning rate");
  cmd->add_option("--lambda-alpha", o.lambda_alpha, "weight learning rate");
  cmd->add_flag("--lambda-alpha-auto", o.lambda_alpha_auto,
                 "set lambda_alpha to the first-order descent bound each iteration");
  cmd->add_option("--lambda-alpha-max", o.lambda_alpha_max, "cap for --lambda-alpha-auto");
  cmd->add_option("--source-batch", o.source_batch, "source mini-batch size");
  cmd->add_option("--target-batch", o.target_batch, "target mini-batch size");
  cmd->add_option("--alpha-init", o.alpha_init, "initial source weight");
  cmd->add_option("--mode", o.mode, "transfer | shared_classifier");
  cmd->add_option("--weight-path", o.weight_path, "clip | beta");
  cmd->add_flag("--alpha-prestep-theta", o.prestep_theta,
                "evaluate dL_t/dtheta before the interior step");
  cmd->add_flag("--snapshots", o.snapshots, "write alpha_epochs.csv");
  cmd->add_flag("--no-losses", o.no_losses, "skip full-dataset loss evaluation");
  cmd->add_option("--resume", o.resume, "continue from a checkpoint.json");
  cmd->add_option("--max-iters", o.max_iters, "stop after this many iterations");
  cmd->add_option("--thresholds", o.thresholds, "alpha threshold grid")->delimiter(',');
  cmd->add_option("--hidden", o.hidden, "hidden layer sizes")->delimiter(',');
  cmd->add_option("--activation", o.activation, "tanh | relu");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig::synthetic_defaults()
                                             : soseleto::load_config(o.config_path);
  auto& t = c.trainer;
  if (o.out) c.output_dir = *o.out;
  if (o.seed) t.rng_seed = *o.seed;
  if (o.epochs) t.epochs = *o.epochs;
  if (o.lambda_p) t.lambda_p = *o.lambda_p;
  if (o.lambda_alpha) t.lambda_alpha = *o.lambda_alpha;
  if (o.lambda_alpha_auto) t.lambda_alpha_auto = true;
  if (o.lambda_alpha_max) t.lambda_alpha_max = *o.lambda_alpha_max;
  if (o.source_batch) t.source_batch = *o.source_batch;
  if (o.target_batch) t.target_batch = *o.target_batch;
  if (o.alpha_init) t.alpha_init = *o.alpha_init;
  if (o.mode) t.mode = soseleto::training_mode_from_string(*o.mode);
  if (o.weight_path) t.weight_path = soseleto::weight_path_from_string(*o.weight_path);
  if (o.prestep_theta) t.alpha_uses_prestep_theta = true;
  if (o.snapshots) t.alpha_snapshots = true;
  if (o.no_losses) t.record_losses = false;
  if (o.resume) c.resume_from = *o.resume;
  if (o.max_iters) c.max_iterations = *o.max_iters;
  if (!o.thresholds.empty()) c.thresholds = o.thresholds;
  if (!o.hidden.empty()) c.arch.hidden_sizes = o.hidden;
  if (o.activation) c.arch.activation = soseleto::activation_from_string(*o.activation);
  if (c.synthetic) {
    if (o.n_source) c.synthetic->n_source = *o.n_source;
    if (o.n_target) c.synthetic->n_target = *o.n_target;
    if (o.noise) c.synthetic->noise_frac = *o.noise;
    if (o.data_seed) c.synthetic->seed = *o.data_seed;
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilevel source-weighted training with learned per-example weights"};
  app.require_subcommand(1);

  Overrides synth_opts;
  auto* synth = app.add_subcommand("synth", "2-D noisy-label experiment");
  add_common(synth, synth_opts);
  synth->add_option("--n-source", synth_opts.n_source, "source points");
  synth->add_option("--n-target", synth_opts.n_target, "clean target points");
  synth->add_option("--noise", synth_opts.noise, "fraction of flipped source labels");
  synth->add_option("--data-seed", synth_opts.data_seed, "dataset generator seed");

  Overrides train_opts;
  auto* train = app.add_subcommand("train", "train on CSV datasets");
  add_common(train, train_opts);
  train->get_option("--config")->required();

  std::string run_dir;
  std::vector<double> report_thresholds;
  auto* report = app.add_subcommand("report", "threshold and separation analysis of a run");
  report->add_option("run_dir", run_dir, "directory holding weights.csv")->required();
  report->add_option("--thresholds", report_thresholds, "alpha threshold grid")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return soseleto::cmd_synth(resolve(synth_opts), std::cerr);
    if (*train) return soseleto::cmd_train(resolve(train_opts), std::cerr);
    return soseleto::cmd_report(run_dir, report_thresholds, std::cerr);
  } catch (const soseleto::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
