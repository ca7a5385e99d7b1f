// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0

#include "soseleto/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "soseleto/error.hpp"

namespace soseleto {

void LabeledDataset::validate() const {
  if (dim == 0 && !labels.empty()) throw ShapeError("dataset: dim must be >= 1");
  if (features.size() != labels.size() * dim) {
    throw ShapeError("dataset: " + std::to_string(features.size()) +
                     " feature values for " + std::to_string(labels.size()) +
                     " rows of dimension " + std::to_string(dim));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes) {
      throw LabelRangeError("label " + std::to_string(labels[i]) +
                                " out of range [0, " +
                                std::to_string(n_classes) + ") at row " +
                                std::to_string(i),
                            0);
    }
  }
  if (corruption_mask && corruption_mask->size() != labels.size()) {
    throw ShapeError("dataset: corruption mask length does not match row count");
  }
}

namespace {

std::size_t flip_count(double noise_frac, std::size_t n) {
  return static_cast<std::size_t>(std::llround(noise_frac * static_cast<double>(n)));
}

// Draws n points of the two-blob distribution; labels are the clean ones.
LabeledDataset draw_two_blobs(std::size_t n, std::mt19937_64& rng) {
  LabeledDataset ds;
  ds.dim = 2;
  ds.n_classes = 2;
  ds.features.reserve(2 * n);
  ds.labels.reserve(n);
  std::bernoulli_distribution side(0.5);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const bool right = side(rng);
    const double cx = right ? 2.0 : -2.0;
    double x = 0.0;
    double y = 0.0;
    do {
      x = cx + noise(rng);
      y = noise(rng);
    } while (x == 0.0);
    ds.features.push_back(x);
    ds.features.push_back(y);
    ds.labels.push_back(x > 0.0 ? 1 : 0);
  }
  return ds;
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> make_synthetic_2d(
    std::size_t n_source, std::size_t n_target, double noise_frac,
    std::uint64_t seed) {
  if (!(noise_frac >= 0.0 && noise_frac < 1.0)) {
    throw ConfigError("noise_frac must lie in [0, 1)");
  }
  if (n_source == 0 || n_target == 0) {
    throw ConfigError("synthetic datasets must be nonempty");
  }
  std::mt19937_64 rng(seed);
  LabeledDataset source = draw_two_blobs(n_source, rng);
  LabeledDataset target = draw_two_blobs(n_target, rng);
  // Two classes, so "a different class" is the flip.
  source = inject_label_noise(source, noise_frac, rng());
  target.corruption_mask = std::vector<bool>(n_target, false);
  return {std::move(source), std::move(target)};
}

LabeledDataset make_gaussian_blobs(std::size_t n, std::size_t n_classes,
                                   std::size_t dim, double separation,
                                   std::uint64_t seed) {
  if (n == 0 || n_classes == 0 || dim == 0) {
    throw ConfigError("gaussian blobs: n, n_classes and dim must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> centres(n_classes * dim);
  for (std::size_t k = 0; k < n_classes; ++k) {
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double v = normal(rng);
        centres[k * dim + j] = v;
        norm2 += v * v;
      }
    } while (norm2 == 0.0);
    const double scale = separation / std::sqrt(norm2);
    for (std::size_t j = 0; j < dim; ++j) centres[k * dim + j] *= scale;
  }

  LabeledDataset ds;
  ds.dim = dim;
  ds.n_classes = n_classes;
  ds.features.reserve(n * dim);
  ds.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % n_classes;
    for (std::size_t j = 0; j < dim; ++j) {
      ds.features.push_back(centres[k * dim + j] + normal(rng));
    }
    ds.labels.push_back(k);
  }
  return ds;
}

LabeledDataset inject_label_noise(const LabeledDataset& dataset,
                                  double noise_frac, std::uint64_t seed) {
  if (!(noise_frac >= 0.0 && noise_frac < 1.0)) {
    throw ConfigError("noise_frac must lie in [0, 1)");
  }
  if (dataset.n_classes < 2) {
    throw ConfigError("label noise needs at least two classes");
  }
  dataset.validate();

  LabeledDataset out = dataset;
  const std::size_t n = dataset.size();
  out.corruption_mask = std::vector<bool>(n, false);
  const std::size_t flips = flip_count(noise_frac, n);
  if (flips == 0) return out;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::uniform_int_distribution<std::size_t> offset(1, dataset.n_classes - 1);
  for (std::size_t k = 0; k < flips; ++k) {
    const std::size_t i = order[k];
    out.labels[i] = (dataset.labels[i] + offset(rng)) % dataset.n_classes;
    (*out.corruption_mask)[i] = true;
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool parse_index(const std::string& s, std::size_t& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::size_t column_index(const std::vector<std::string>& header,
                         const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ParseError("missing column '" + name + "'", 1);
  return static_cast<std::size_t>(it - header.begin());
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

LabeledDataset load_csv(const std::filesystem::path& path,
                        const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  if (schema.n_classes == 0) throw ConfigError("csv schema: n_classes must be >= 1");

  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header row", 1);
  const std::vector<std::string> header = split_csv_line(line);

  const std::size_t label_col = column_index(header, schema.label_column);
  std::optional<std::size_t> mask_col;
  if (schema.mask_column) mask_col = column_index(header, *schema.mask_column);

  std::vector<std::size_t> feature_cols;
  if (schema.feature_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != label_col && (!mask_col || c != *mask_col)) feature_cols.push_back(c);
    }
  } else {
    for (const auto& name : schema.feature_columns) {
      feature_cols.push_back(column_index(header, name));
    }
  }
  if (feature_cols.empty()) throw ParseError("no feature columns", 1);

  LabeledDataset ds;
  ds.dim = feature_cols.size();
  ds.n_classes = schema.n_classes;
  std::vector<bool> mask;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) +
                           " fields, found " + std::to_string(fields.size()),
                       line_no);
    }
    for (std::size_t c : feature_cols) {
      double v = 0.0;
      if (!parse_double(fields[c], v)) {
        throw ParseError("bad number '" + fields[c] + "' in column '" +
                             header[c] + "'",
                         line_no);
      }
      ds.features.push_back(v);
    }
    std::size_t label = 0;
    if (!parse_index(fields[label_col], label)) {
      throw ParseError("bad label '" + fields[label_col] + "'", line_no);
    }
    if (label >= schema.n_classes) {
      throw LabelRangeError("label " + std::to_string(label) +
                                " out of range [0, " +
                                std::to_string(schema.n_classes) + ")",
                            line_no);
    }
    ds.labels.push_back(label);
    if (mask_col) {
      const std::string& f = fields[*mask_col];
      if (f != "0" && f != "1") {
        throw ParseError("mask value must be 0 or 1, got '" + f + "'", line_no);
      }
      mask.push_back(f == "1");
    }
  }
  if (mask_col) ds.corruption_mask = std::move(mask);
  return ds;
}

void save_csv(const std::filesystem::path& path, const LabeledDataset& dataset) {
  dataset.validate();
  std::string out;
  for (std::size_t j = 0; j < dataset.dim; ++j) out += "x" + std::to_string(j) + ",";
  out += "label";
  if (dataset.corruption_mask) out += ",corrupted";
  out += '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (double v : dataset.row(i)) {
      append_double(out, v);
      out += ',';
    }
    out += std::to_string(dataset.labels[i]);
    if (dataset.corruption_mask) out += (*dataset.corruption_mask)[i] ? ",1" : ",0";
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write dataset '" + path.string() + "'");
  f << out;
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace soseleto
