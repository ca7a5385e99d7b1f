// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0

#include "soseleto/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "soseleto/error.hpp"

namespace soseleto {

using nlohmann::json;

namespace {

constexpr const char* kParamsFormat = "soseleto.params/1";
constexpr const char* kCheckpointFormat = "soseleto.checkpoint/1";

json finite_array(std::span<const double> v, const char* name) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericalError(std::string("cannot serialize non-finite value in ") + name);
    }
  }
  return json(std::vector<double>(v.begin(), v.end()));
}

json arch_to_json(const ArchDescriptor& a) {
  return json{{"input_dim", a.input_dim},
              {"hidden_sizes", a.hidden_sizes},
              {"activation", std::string(to_string(a.activation))},
              {"n_classes_source", a.n_classes_source},
              {"n_classes_target", a.n_classes_target}};
}

ArchDescriptor arch_from_json(const json& j) {
  ArchDescriptor a;
  a.input_dim = j.at("input_dim").get<std::size_t>();
  a.hidden_sizes = j.at("hidden_sizes").get<std::vector<std::size_t>>();
  a.activation = activation_from_string(j.at("activation").get<std::string>());
  a.n_classes_source = j.at("n_classes_source").get<std::size_t>();
  a.n_classes_target = j.at("n_classes_target").get<std::size_t>();
  a.validate();
  return a;
}

json params_to_json(const ModelParams& p) {
  return json{{"format", kParamsFormat},
              {"arch", arch_to_json(p.arch())},
              {"shared_head", p.shared_head()},
              {"theta", finite_array(p.theta(), "theta")},
              {"phi_s", finite_array(p.phi_s(), "phi_s")},
              {"phi_t", finite_array(p.phi_t_storage(), "phi_t")}};
}

ModelParams params_from_json(const json& j) {
  if (j.at("format").get<std::string>() != kParamsFormat) {
    throw ParseError("unsupported params format '" + j.at("format").get<std::string>() + "'", 0);
  }
  return ModelParams(arch_from_json(j.at("arch")),
                     j.at("theta").get<std::vector<double>>(),
                     j.at("phi_s").get<std::vector<double>>(),
                     j.at("phi_t").get<std::vector<double>>(),
                     j.at("shared_head").get<bool>());
}

template <typename F>
auto parse_with(const std::string& text, F&& f) {
  try {
    return f(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(e.what(), 0);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

std::string params_to_string(const ModelParams& params) {
  return params_to_json(params).dump(1) + "\n";
}

ModelParams params_from_string(const std::string& text) {
  return parse_with(text, [](const json& j) { return params_from_json(j); });
}

void save_params(const std::filesystem::path& path, const ModelParams& params) {
  write_file(path, params_to_string(params));
}

ModelParams load_params(const std::filesystem::path& path) {
  return params_from_string(read_file(path));
}

std::string checkpoint_to_string(const TrainerState& state) {
  const json j{{"format", kCheckpointFormat},
               {"iteration", state.iteration},
               {"alpha", finite_array(state.weights.alpha, "alpha")},
               {"params", params_to_json(state.params)}};
  return j.dump(1) + "\n";
}

TrainerState checkpoint_from_string(const std::string& text) {
  return parse_with(text, [](const json& j) {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw ParseError("unsupported checkpoint format '" + j.at("format").get<std::string>() + "'", 0);
    }
    TrainerState s{params_from_json(j.at("params")),
                   SourceWeights(j.at("alpha").get<std::vector<double>>()),
                   j.at("iteration").get<std::uint64_t>()};
    s.weights.check_bounds();
    return s;
  });
}

void save_checkpoint(const std::filesystem::path& path, const TrainerState& state) {
  write_file(path, checkpoint_to_string(state));
}

TrainerState load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_string(read_file(path));
}

}  // namespace soseleto
