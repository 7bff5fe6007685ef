// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: JSON file + dotted-key command-line overrides merged
// over a named profile. Every run writes its fully-resolved config next to
// its outputs.

#pragma once

#include <string>
#include <vector>

#include "splm/model.hpp"
#include "splm/train.hpp"

namespace splm {

struct RunConfig {
    std::string profile = "toy";  // "toy" (desk scale) or "base" (full scale)
    std::uint64_t seed = 0;
    std::string freeze = "R+Att";  // ablation-table best row is the default
    std::string manifest;
    ModelConfig model;
    TrainConfig train;
    MaskingPolicy mask;
};

// Resolution order: profile defaults <- JSON file (optional) <- overrides
// ("train.lr_finetune=1e-3" style; values parsed as JSON scalars).
RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::string>& overrides);

RunConfig profile_defaults(const std::string& name);

std::string run_config_json(const RunConfig& rc);  // pretty, for resolved_config.json

// ModelConfig <-> JSON text (embedded in checkpoints).
std::string model_config_json(const ModelConfig& mc);
ModelConfig model_config_from_json(const std::string& text);

// Architecture equality for checkpoint compatibility (training-time knobs
// like dropout are allowed to differ).
void require_compatible(const ModelConfig& ckpt, const ModelConfig& run);

}  // namespace splm
