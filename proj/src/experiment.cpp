// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0

#include "soseleto/experiment.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "soseleto/analysis.hpp"
#include "soseleto/checkpoint.hpp"
#include "soseleto/error.hpp"

namespace soseleto {

using nlohmann::json;
namespace fs = std::filesystem;

ExperimentConfig ExperimentConfig::synthetic_defaults() {
  ExperimentConfig c;
  c.synthetic = SyntheticSpec{};
  c.arch.input_dim = 0;
  c.arch.hidden_sizes = {16};
  c.arch.activation = Activation::tanh;
  c.arch.n_classes_source = 0;
  c.arch.n_classes_target = 0;
  c.trainer.mode = TrainingMode::shared_classifier;
  c.trainer.lambda_p = 1.0;
  c.trainer.lambda_alpha = 10.0;
  c.trainer.source_batch = 32;
  c.trainer.target_batch = 10;
  c.trainer.epochs = 100;
  c.trainer.alpha_init = 1.0;
  return c;
}

// --- config parsing ----------------------------------------------------------

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

CsvSchema schema_from_json(const json& j, const std::string& where) {
  reject_unknown(j, {"path", "label_column", "feature_columns", "n_classes", "mask_column"}, where);
  CsvSchema s;
  read_opt(j, "label_column", s.label_column);
  read_opt(j, "feature_columns", s.feature_columns);
  s.n_classes = j.at("n_classes").get<std::size_t>();
  if (j.contains("mask_column") && !j.at("mask_column").is_null()) {
    s.mask_column = j.at("mask_column").get<std::string>();
  }
  return s;
}

json schema_to_json(const CsvSchema& s, const fs::path& path) {
  json j{{"path", path.string()},
         {"label_column", s.label_column},
         {"feature_columns", s.feature_columns},
         {"n_classes", s.n_classes}};
  j["mask_column"] = s.mask_column ? json(*s.mask_column) : json(nullptr);
  return j;
}

void trainer_from_json(const json& j, TrainerConfig& t) {
  reject_unknown(j,
                 {"lambda_p", "lambda_alpha", "lambda_alpha_auto", "lambda_alpha_max",
                  "source_batch", "target_batch", "epochs", "mode", "alpha_init",
                  "rng_seed", "weight_path", "alpha_uses_prestep_theta",
                  "record_losses", "alpha_snapshots"},
                 "trainer");
  read_opt(j, "lambda_p", t.lambda_p);
  read_opt(j, "lambda_alpha", t.lambda_alpha);
  read_opt(j, "lambda_alpha_auto", t.lambda_alpha_auto);
  read_opt(j, "lambda_alpha_max", t.lambda_alpha_max);
  read_opt(j, "source_batch", t.source_batch);
  read_opt(j, "target_batch", t.target_batch);
  read_opt(j, "epochs", t.epochs);
  if (j.contains("mode")) t.mode = training_mode_from_string(j.at("mode").get<std::string>());
  read_opt(j, "alpha_init", t.alpha_init);
  read_opt(j, "rng_seed", t.rng_seed);
  if (j.contains("weight_path")) {
    t.weight_path = weight_path_from_string(j.at("weight_path").get<std::string>());
  }
  read_opt(j, "alpha_uses_prestep_theta", t.alpha_uses_prestep_theta);
  read_opt(j, "record_losses", t.record_losses);
  read_opt(j, "alpha_snapshots", t.alpha_snapshots);
}

json trainer_to_json(const TrainerConfig& t) {
  return json{{"lambda_p", t.lambda_p},
              {"lambda_alpha", t.lambda_alpha},
              {"lambda_alpha_auto", t.lambda_alpha_auto},
              {"lambda_alpha_max", t.lambda_alpha_max},
              {"source_batch", t.source_batch},
              {"target_batch", t.target_batch},
              {"epochs", t.epochs},
              {"mode", std::string(to_string(t.mode))},
              {"alpha_init", t.alpha_init},
              {"rng_seed", t.rng_seed},
              {"weight_path", std::string(to_string(t.weight_path))},
              {"alpha_uses_prestep_theta", t.alpha_uses_prestep_theta},
              {"record_losses", t.record_losses},
              {"alpha_snapshots", t.alpha_snapshots}};
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  ExperimentConfig c = ExperimentConfig::synthetic_defaults();
  try {
    const json j = json::parse(text);
    reject_unknown(j, {"dataset", "arch", "trainer", "output_dir", "thresholds",
                       "resume_from", "max_iterations"},
                   "config");
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      reject_unknown(d, {"synthetic", "csv"}, "dataset");
      if (d.contains("synthetic") == d.contains("csv")) {
        throw ConfigError("dataset: exactly one of 'synthetic' or 'csv' is required");
      }
      if (d.contains("synthetic")) {
        const json& s = d.at("synthetic");
        reject_unknown(s, {"n_source", "n_target", "noise_frac", "seed"}, "dataset.synthetic");
        SyntheticSpec spec;
        read_opt(s, "n_source", spec.n_source);
        read_opt(s, "n_target", spec.n_target);
        read_opt(s, "noise_frac", spec.noise_frac);
        read_opt(s, "seed", spec.seed);
        c.synthetic = spec;
        c.csv.reset();
      } else {
        const json& s = d.at("csv");
        reject_unknown(s, {"source", "target", "source_noise_frac", "noise_seed"}, "dataset.csv");
        CsvSpec spec;
        spec.source_path = s.at("source").at("path").get<std::string>();
        spec.target_path = s.at("target").at("path").get<std::string>();
        spec.source_schema = schema_from_json(s.at("source"), "dataset.csv.source");
        spec.target_schema = schema_from_json(s.at("target"), "dataset.csv.target");
        read_opt(s, "source_noise_frac", spec.source_noise_frac);
        read_opt(s, "noise_seed", spec.noise_seed);
        c.csv = spec;
        c.synthetic.reset();
      }
    }
    if (j.contains("arch")) {
      const json& a = j.at("arch");
      reject_unknown(a, {"input_dim", "hidden_sizes", "activation", "n_classes_source",
                         "n_classes_target"},
                     "arch");
      read_opt(a, "input_dim", c.arch.input_dim);
      read_opt(a, "hidden_sizes", c.arch.hidden_sizes);
      if (a.contains("activation")) {
        c.arch.activation = activation_from_string(a.at("activation").get<std::string>());
      }
      read_opt(a, "n_classes_source", c.arch.n_classes_source);
      read_opt(a, "n_classes_target", c.arch.n_classes_target);
    }
    if (j.contains("trainer")) trainer_from_json(j.at("trainer"), c.trainer);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    read_opt(j, "thresholds", c.thresholds);
    if (j.contains("resume_from") && !j.at("resume_from").is_null()) {
      c.resume_from = j.at("resume_from").get<std::string>();
    }
    if (j.contains("max_iterations") && !j.at("max_iterations").is_null()) {
      c.max_iterations = j.at("max_iterations").get<std::uint64_t>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what(), 0);
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  if (c.synthetic) {
    j["dataset"]["synthetic"] = json{{"n_source", c.synthetic->n_source},
                                     {"n_target", c.synthetic->n_target},
                                     {"noise_frac", c.synthetic->noise_frac},
                                     {"seed", c.synthetic->seed}};
  } else if (c.csv) {
    j["dataset"]["csv"] = json{{"source", schema_to_json(c.csv->source_schema, c.csv->source_path)},
                               {"target", schema_to_json(c.csv->target_schema, c.csv->target_path)},
                               {"source_noise_frac", c.csv->source_noise_frac},
                               {"noise_seed", c.csv->noise_seed}};
  }
  j["arch"] = json{{"input_dim", c.arch.input_dim},
                   {"hidden_sizes", c.arch.hidden_sizes},
                   {"activation", std::string(to_string(c.arch.activation))},
                   {"n_classes_source", c.arch.n_classes_source},
                   {"n_classes_target", c.arch.n_classes_target}};
  j["trainer"] = trainer_to_json(c.trainer);
  j["output_dir"] = c.output_dir.string();
  j["thresholds"] = c.thresholds;
  j["resume_from"] = c.resume_from ? json(c.resume_from->string()) : json(nullptr);
  j["max_iterations"] = c.max_iterations ? json(*c.max_iterations) : json(nullptr);
  return j.dump(2) + "\n";
}

// --- datasets ----------------------------------------------------------------

Datasets build_datasets(const ExperimentConfig& config) {
  if (config.synthetic) {
    const SyntheticSpec& s = *config.synthetic;
    auto [src, tgt] = make_synthetic_2d(s.n_source, s.n_target, s.noise_frac, s.seed);
    return {std::move(src), std::move(tgt)};
  }
  if (config.csv) {
    const CsvSpec& s = *config.csv;
    Datasets d{load_csv(s.source_path, s.source_schema),
               load_csv(s.target_path, s.target_schema)};
    if (s.source_noise_frac > 0.0) {
      d.source = inject_label_noise(d.source, s.source_noise_frac, s.noise_seed);
    }
    return d;
  }
  throw ConfigError("no dataset configured");
}

ArchDescriptor resolve_arch(const ArchDescriptor& arch, const Datasets& data) {
  ArchDescriptor a = arch;
  if (a.input_dim == 0) a.input_dim = data.source.dim;
  if (a.n_classes_source == 0) a.n_classes_source = data.source.n_classes;
  if (a.n_classes_target == 0) a.n_classes_target = data.target.n_classes;
  a.validate();
  return a;
}

// --- weights file --------------------------------------------------------------

namespace {

void append_number(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("bad number '" + s + "'", line);
  }
  return v;
}

std::uint64_t to_uint(const std::string& s, std::size_t line) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("bad integer '" + s + "'", line);
  }
  return v;
}

}  // namespace

void write_weights_csv(const fs::path& path, std::span<const double> alpha,
                       const std::optional<std::vector<bool>>& mask) {
  if (mask && mask->size() != alpha.size()) {
    throw ShapeError("weights: mask length does not match alpha");
  }
  std::string out = "index,alpha,corrupted\n";
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    out += std::to_string(j);
    out += ',';
    append_number(out, alpha[j]);
    out += ',';
    if (mask) out += (*mask)[j] ? '1' : '0';
    out += '\n';
  }
  write_text(path, out);
}

WeightsFile read_weights_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || split(line) != std::vector<std::string>{"index", "alpha", "corrupted"}) {
    throw ParseError("expected header 'index,alpha,corrupted'", 1);
  }
  WeightsFile w;
  std::vector<bool> mask;
  bool any_mask = false;
  bool any_missing = false;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 3) throw ParseError("expected 3 fields", line_no);
    if (to_uint(f[0], line_no) != w.alpha.size()) {
      throw ParseError("indices must be consecutive from 0", line_no);
    }
    w.alpha.push_back(to_double(f[1], line_no));
    if (f[2].empty()) {
      any_missing = true;
    } else if (f[2] == "0" || f[2] == "1") {
      any_mask = true;
      mask.push_back(f[2] == "1");
    } else {
      throw ParseError("corrupted must be 0, 1 or empty", line_no);
    }
  }
  if (any_mask && any_missing) throw ParseError("corrupted column partially filled", 0);
  if (any_mask) w.mask = std::move(mask);
  return w;
}

// --- runs ------------------------------------------------------------------------

void run_experiment(const ExperimentConfig& config) {
  // Everything that can reject the config happens before the first write.
  const Datasets data = build_datasets(config);
  const ArchDescriptor arch = resolve_arch(config.arch, data);
  config.trainer.validate(data.source.size(), data.target.size());

  TrainerState start = config.resume_from
                           ? load_checkpoint(*config.resume_from)
                           : initial_state(arch, data.source, config.trainer);
  if (config.resume_from) {
    if (!(start.params.arch() == arch)) {
      throw ConfigError("checkpoint architecture does not match the config");
    }
    if (start.weights.size() != data.source.size()) {
      throw ConfigError("checkpoint weight count does not match the source dataset");
    }
  }
  std::vector<double> thresholds =
      config.thresholds.empty() ? uniform_threshold_grid(20) : config.thresholds;
  // Validate the grid now rather than after training.
  if (data.source.corruption_mask) {
    threshold_sweep(std::span<const double>(), std::vector<bool>(), thresholds);
  }
  // Constructing a Trainer performs the remaining compatibility checks.
  { Trainer probe(data.source, data.target, config.trainer, start); }

  const RunRecord record = run_training(data.source, data.target, config.trainer,
                                        std::move(start), config.max_iterations);

  const fs::path& out = config.output_dir;
  fs::create_directories(out);
  write_run_csv(out / "run.csv", record);
  write_weights_csv(out / "weights.csv", record.final_weights.alpha,
                    data.source.corruption_mask);
  const std::uint64_t done =
      record.iterations().empty() ? 0 : record.iterations().back().iteration;
  save_checkpoint(out / "checkpoint.json",
                  TrainerState{record.final_params, record.final_weights, done});
  write_text(out / "config.json", config_to_json(config));
  if (data.source.corruption_mask) {
    write_sweep_csv(out / "sweep.csv",
                    threshold_sweep(record.final_weights.alpha,
                                    *data.source.corruption_mask, thresholds));
  }
  if (config.trainer.alpha_snapshots) {
    write_alpha_snapshots_csv(out / "alpha_epochs.csv", record.snapshots);
  }
}

namespace {

std::map<std::uint64_t, std::vector<double>> read_snapshots(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || split(line) != std::vector<std::string>{"epoch", "index", "alpha"}) {
    throw ParseError("expected header 'epoch,index,alpha'", 1);
  }
  std::map<std::uint64_t, std::vector<double>> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 3) throw ParseError("expected 3 fields", line_no);
    auto& v = out[to_uint(f[0], line_no)];
    if (to_uint(f[1], line_no) != v.size()) {
      throw ParseError("indices must be consecutive from 0", line_no);
    }
    v.push_back(to_double(f[2], line_no));
  }
  return out;
}

}  // namespace

void run_report(const fs::path& run_dir, const std::vector<double>& thresholds) {
  const WeightsFile w = read_weights_csv(run_dir / "weights.csv");
  if (!w.mask) {
    throw DomainError("weights.csv has no corruption mask; nothing to report");
  }
  const std::vector<double> grid = thresholds.empty() ? uniform_threshold_grid(20) : thresholds;
  const ThresholdSweep sweep = threshold_sweep(w.alpha, *w.mask, grid);

  std::map<std::uint64_t, std::vector<double>> snapshots;
  if (fs::exists(run_dir / "alpha_epochs.csv")) {
    snapshots = read_snapshots(run_dir / "alpha_epochs.csv");
  }

  std::string noise = "threshold,kept_count,kept_fraction,effective_noise_level,empty\n";
  for (const ThresholdRow& r : sweep.rows) {
    append_number(noise, r.threshold);
    noise += ',' + std::to_string(r.kept_count) + ',';
    append_number(noise, r.kept_fraction);
    noise += ',';
    append_number(noise, r.effective_noise_level);
    noise += r.empty ? ",1\n" : ",0\n";
  }

  std::string sep = "epoch,mean_alpha_clean,mean_alpha_noisy,auc\n";
  const auto sep_row = [&](const std::string& label, std::span<const double> alpha) {
    if (alpha.size() != w.mask->size()) {
      throw ShapeError("snapshot " + label + " has the wrong number of weights");
    }
    const SeparationMetrics m = separation_metrics(alpha, *w.mask);
    sep += label + ',';
    append_number(sep, m.mean_alpha_clean);
    sep += ',';
    append_number(sep, m.mean_alpha_noisy);
    sep += ',';
    append_number(sep, m.auc);
    sep += '\n';
  };
  if (snapshots.empty()) {
    sep_row("final", w.alpha);
  } else {
    for (const auto& [epoch, alpha] : snapshots) sep_row(std::to_string(epoch), alpha);
  }

  write_text(run_dir / "effective_noise.csv", noise);
  write_text(run_dir / "separation.csv", sep);
}

namespace {

template <typename F>
int guarded(std::ostream& err, F&& f) {
  try {
    f();
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int cmd_synth(const ExperimentConfig& config, std::ostream& err) {
  return guarded(err, [&] {
    if (!config.synthetic) throw ConfigError("synth needs a synthetic dataset spec");
    run_experiment(config);
  });
}

int cmd_train(const ExperimentConfig& config, std::ostream& err) {
  return guarded(err, [&] {
    if (!config.csv) throw ConfigError("train needs a csv dataset spec");
    run_experiment(config);
  });
}

int cmd_report(const fs::path& run_dir, const std::vector<double>& thresholds,
               std::ostream& err) {
  return guarded(err, [&] { run_report(run_dir, thresholds); });
}

}  // namespace soseleto
