// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration behind the `soseleto` command-line tool: config
// files, dataset construction, training runs and the CSV artifacts they
// leave in an output directory.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "soseleto/data.hpp"
#include "soseleto/model.hpp"
#include "soseleto/trainer.hpp"

namespace soseleto {

struct SyntheticSpec {
  std::size_t n_source = 500;
  std::size_t n_target = 50;
  double noise_frac = 0.2;
  std::uint64_t seed = 0;
};

struct CsvSpec {
  std::filesystem::path source_path;
  std::filesystem::path target_path;
  CsvSchema source_schema;
  CsvSchema target_schema;
  /// Label noise injected into the source after loading (0 = none).
  double source_noise_frac = 0.0;
  std::uint64_t noise_seed = 0;
};

struct ExperimentConfig {
  std::optional<SyntheticSpec> synthetic;
  std::optional<CsvSpec> csv;
  TrainerConfig trainer;
  /// input_dim and class counts are filled in from the data when zero.
  ArchDescriptor arch;
  std::filesystem::path output_dir = "out";
  std::vector<double> thresholds;  // empty = 0, 0.05, ..., 1
  std::optional<std::filesystem::path> resume_from;
  std::optional<std::uint64_t> max_iterations;

  /// Hyperparameters for the 2-D noisy-label demo.
  static ExperimentConfig synthetic_defaults();
};

/// Parses a JSON experiment manifest on top of synthetic_defaults(). Unknown
/// keys are rejected. Throws ConfigError or ParseError.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

struct Datasets {
  LabeledDataset source;
  LabeledDataset target;
};

Datasets build_datasets(const ExperimentConfig& config);

/// Fills unset arch fields (zero input_dim / class counts) from the data.
ArchDescriptor resolve_arch(const ArchDescriptor& arch, const Datasets& data);

/// weights.csv: index,alpha,corrupted (corrupted empty without a mask).
void write_weights_csv(const std::filesystem::path& path,
                       std::span<const double> alpha,
                       const std::optional<std::vector<bool>>& mask);

struct WeightsFile {
  std::vector<double> alpha;
  std::optional<std::vector<bool>> mask;
};
WeightsFile read_weights_csv(const std::filesystem::path& path);

/// Trains on the configured data and writes run.csv, weights.csv,
/// checkpoint.json, config.json, sweep.csv (when a mask exists) and
/// alpha_epochs.csv (when snapshots are enabled). Throws on failure; nothing
/// is written if the config is rejected.
void run_experiment(const ExperimentConfig& config);

/// Reads <run_dir>/weights.csv (and alpha_epochs.csv if present) and writes
/// effective_noise.csv and separation.csv.
void run_report(const std::filesystem::path& run_dir,
                const std::vector<double>& thresholds);

/// Exit-status wrappers: 0 on success, 2 on ConfigError, 1 on any other
/// failure. The error message goes to `err`.
int cmd_synth(const ExperimentConfig& config, std::ostream& err);
int cmd_train(const ExperimentConfig& config, std::ostream& err);
int cmd_report(const std::filesystem::path& run_dir,
               const std::vector<double>& thresholds, std::ostream& err);

}  // namespace soseleto
