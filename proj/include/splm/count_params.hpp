// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0
//
// Closed-form parameter accounting per partition, plus a fixed-size
// two-tower comparator (separate text and speech encoders joined by a
// cross-modal fusion block) used to quantify the footprint saving of the
// prefix approach.

#pragma once

#include <cstddef>
#include <string>

#include "splm/model.hpp"

namespace splm {

struct PartitionCounts {
    std::size_t frontend = 0;  // frozen conv feature extractor
    std::size_t laa = 0;       // aggregator: norm + projection + BiGRU + attentive pooling
    std::size_t lm = 0;        // embeddings + encoder stack + masked-LM head
    std::size_t head = 0;      // regression head

    std::size_t total() const { return frontend + laa + lm + head; }
};

// Closed-form counts matching init_params() exactly (verified by test).
PartitionCounts count_params(const ModelConfig& cfg);

// Enumeration over an actual parameter store (sums Tensor::numel by prefix).
PartitionCounts count_params(const ParameterStore& ps);

struct TwoTowerCounts {
    std::size_t text_tower = 0;    // 12-layer text encoder with embeddings
    std::size_t speech_tower = 0;  // conv frontend + 24-layer speech encoder
    std::size_t fusion = 0;        // cross-modal projection + 6 layers + head

    std::size_t total() const { return text_tower + speech_tower + fusion; }
};

// Published-scale comparator: text encoder (d=768, 12 layers), speech
// encoder (d=1024, 24 layers, conv stack + convolutional position
// embedding), fusion (1024->768 projection, 6 layers, regression head).
TwoTowerCounts two_tower_comparator();

// Human-readable per-partition table; with compare=true also prints the
// two-tower breakdown and the relative saving.
std::string param_report(const ModelConfig& cfg, bool compare);

}  // namespace splm
