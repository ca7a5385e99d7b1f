// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0
//
// Text persistence for model parameters and trainer state. Both formats are
// JSON documents; numbers are written in shortest round-trip form, so a
// save/load cycle reproduces every double bit for bit. See docs/formats.md.

#pragma once

#include <filesystem>
#include <string>

#include "soseleto/model.hpp"
#include "soseleto/trainer.hpp"

namespace soseleto {

std::string params_to_string(const ModelParams& params);
/// Throws ParseError on malformed text and ShapeError when vector lengths
/// disagree with the stored architecture.
ModelParams params_from_string(const std::string& text);

void save_params(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_params(const std::filesystem::path& path);

std::string checkpoint_to_string(const TrainerState& state);
TrainerState checkpoint_from_string(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const TrainerState& state);
TrainerState load_checkpoint(const std::filesystem::path& path);

}  // namespace soseleto
