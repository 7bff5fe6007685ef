// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0
//
// Raw-audio ingestion and the frozen convolutional frontend that turns a
// waveform into a sequence of latent frames. The frontend's weights are never
// touched by training, so it runs outside the autodiff graph.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "splm/tensor.hpp"

namespace splm {

inline constexpr std::size_t kSampleRate = 16000;

struct Waveform {
    std::vector<float> samples;  // amplitude in [-1, 1]
    std::size_t sample_rate = kSampleRate;
};

// PCM16 mono 16 kHz RIFF reader. Unknown chunks are skipped; anything that
// would require resampling or channel mixing is rejected.
Waveform load_wav(const std::string& path);

// PCM16 mono writer for generated corpora; samples are clipped to [-1, 1].
void write_wav(const std::string& path, const std::vector<float>& samples,
               std::size_t sample_rate = kSampleRate);

struct ConvLayerSpec {
    std::size_t channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 0;
};

struct ConvStackConfig {
    std::vector<ConvLayerSpec> layers;
    std::uint64_t seed = 0;

    std::size_t d_A() const { return layers.empty() ? 0 : layers.back().channels; }

    // Shortest input that still yields one output frame.
    std::size_t receptive_field() const;

    // Output frame count for a given sample count; throws if too short.
    std::size_t out_len(std::size_t n_samples) const;

    // Seven strided layers with a 320x total downsample (the released
    // speech-encoder frontend shape); `channels` applies to every layer.
    static ConvStackConfig seven_layer(std::size_t channels, std::uint64_t seed);

    // Five-layer alternative (160x downsample) matching the stack described
    // in prose; selectable via config.
    static ConvStackConfig five_layer(std::size_t channels, std::uint64_t seed);

    static ConvStackConfig by_name(const std::string& profile, std::size_t channels,
                                   std::uint64_t seed);
};

// Frozen frontend weights, keyed "frontend.conv<i>.w" / "frontend.conv<i>.b".
// w has shape [out_channels, in_channels, kernel]; b has shape [out_channels].
using FrontendWeights = std::map<std::string, TensorF>;

// Deterministic seeded initialization: zero biases, uniform weights scaled
// so activation variance survives the GELU stack (the random frontend must
// stay input-driven to be a usable stand-in for learned speech features).
FrontendWeights init_frontend(const ConvStackConfig& cfg);

// Optional import: directory holding arrays.bin (little-endian float32) and
// manifest.json (name -> offset, shape). Shapes are validated against cfg.
FrontendWeights import_frontend(const std::string& dir, const ConvStackConfig& cfg);

// Applies the strided conv stack with GELU after every layer. Output is one
// row per frame: [T_A x d_A]. Deterministic; never differentiated.
TensorF conv_frontend(const Waveform& w, const ConvStackConfig& cfg,
                      const FrontendWeights& weights);

}  // namespace splm
