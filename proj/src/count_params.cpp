// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0

#include "splm/count_params.hpp"

#include <cstdio>

#include "splm/audio.hpp"

namespace splm {

namespace {

// One post-norm encoder layer: qkv+output projections with biases, two
// layer norms, and the two-matrix feed-forward.
std::size_t encoder_layer_params(std::size_t d, std::size_t d_ff) {
    std::size_t attn = 4 * (d * d + d);
    std::size_t norms = 2 * (2 * d);
    std::size_t ff = d * d_ff + d_ff + d_ff * d + d;
    return attn + norms + ff;
}

std::size_t conv_stack_params(const ConvStackConfig& cfg) {
    std::size_t n = 0;
    std::size_t in_ch = 1;
    for (const ConvLayerSpec& layer : cfg.layers) {
        n += layer.channels * in_ch * layer.kernel + layer.channels;
        in_ch = layer.channels;
    }
    return n;
}

}  // namespace

PartitionCounts count_params(const ModelConfig& cfg) {
    cfg.validate();
    PartitionCounts c;
    std::size_t d = cfg.d, d_A = cfg.d_A, V = cfg.vocab_size;

    c.frontend = conv_stack_params(cfg.conv());

    std::size_t gru_dir = d_A * 2 * d + d * 2 * d + 2 * d  // fused reset/update gates
                          + d_A * d + d * d + d;           // candidate state
    c.laa = 2 * d_A                    // input layer norm
            + d_A * d_A + d_A          // projection
            + 2 * gru_dir              // both directions
            + (d * d + d) + (d + 1);   // attentive pooling (shared across directions)

    std::size_t embed = V * d + cfg.max_positions * d + 2 * d;
    std::size_t mlm = cfg.tie_mlm ? V : d * V + V;
    c.lm = embed + cfg.n_layers * encoder_layer_params(d, cfg.d_ff) + mlm;

    c.head = (d * d + d) + (d + 1);
    return c;
}

PartitionCounts count_params(const ParameterStore& ps) {
    PartitionCounts c;
    for (const auto& [name, tensor] : ps.arrays) {
        switch (partition_of(name)) {
            case Partition::FrontendW: c.frontend += tensor.numel(); break;
            case Partition::LaaA: c.laa += tensor.numel(); break;
            case Partition::LmLM: c.lm += tensor.numel(); break;
            case Partition::HeadH: c.head += tensor.numel(); break;
        }
    }
    return c;
}

TwoTowerCounts two_tower_comparator() {
    TwoTowerCounts t;

    // Text tower: vocab 50265, 514 positions, embedding layer norm, 12
    // layers at d=768 / ff=3072.
    {
        std::size_t d = 768, V = 50265, P = 514;
        std::size_t embed = V * d + P * d + 2 * d;
        t.text_tower = embed + 12 * encoder_layer_params(d, 3072);
    }

    // Speech tower: the same conv stack we use (512 channels), a norm +
    // projection into the 1024-wide encoder, a grouped convolutional
    // position embedding (kernel 128, 16 groups), and 24 layers at
    // d=1024 / ff=4096.
    {
        std::size_t d = 1024, conv_ch = 512;
        std::size_t conv = conv_stack_params(ConvStackConfig::seven_layer(conv_ch, 0));
        std::size_t feat_proj = 2 * conv_ch + conv_ch * d + d;
        std::size_t conv_pos = d * (d / 16) * 128 + d;
        std::size_t pre_norm = 2 * d;
        t.speech_tower = conv + feat_proj + conv_pos + pre_norm +
                         24 * encoder_layer_params(d, 4096);
    }

    // Fusion: 1024->768 projection, 6 cross-modal layers at d=768, final
    // norm, regression head.
    {
        std::size_t d = 768;
        std::size_t proj = 1024 * d + d;
        std::size_t norm = 2 * d;
        std::size_t head = (d * d + d) + (d + 1);
        t.fusion = proj + 6 * encoder_layer_params(d, 3072) + norm + head;
    }
    return t;
}

std::string param_report(const ModelConfig& cfg, bool compare) {
    PartitionCounts c = count_params(cfg);
    char buf[256];
    std::string out;
    auto row = [&out, &buf](const char* label, std::size_t n) {
        std::snprintf(buf, sizeof(buf), "  %-28s %15zu\n", label, n);
        out += buf;
    };
    out += "parameters by partition\n";
    row("frontend (frozen conv)", c.frontend);
    row("aggregator", c.laa);
    row("language model", c.lm);
    row("regression head", c.head);
    row("total", c.total());
    row("pretraining updates", c.laa);
    row("max fine-tuning updates", c.laa + c.lm + c.head);

    if (compare) {
        TwoTowerCounts t = two_tower_comparator();
        out += "\ntwo-tower comparator\n";
        row("text tower", t.text_tower);
        row("speech tower", t.speech_tower);
        row("fusion", t.fusion);
        row("total", t.total());
        double saving = 100.0 * (1.0 - static_cast<double>(c.total()) /
                                           static_cast<double>(t.total()));
        std::snprintf(buf, sizeof(buf), "\nfootprint saving: %.2f%% fewer parameters\n",
                      saving);
        out += buf;
    }
    return out;
}

}  // namespace splm
