// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0

#include "splm/model.hpp"

#include <algorithm>
#include <cmath>

namespace splm {

void ModelConfig::validate() const {
    if (d == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0 || d_A == 0) {
        throw ValidationError("model dimensions must be positive");
    }
    if (d % n_heads != 0) {
        throw ValidationError("hidden width " + std::to_string(d) + " not divisible by " +
                              std::to_string(n_heads) + " heads");
    }
    if (vocab_size <= static_cast<std::size_t>(kNumSpecialIds)) {
        throw ValidationError("vocab_size " + std::to_string(vocab_size) +
                              " leaves no room beyond the " + std::to_string(kNumSpecialIds) +
                              " reserved ids");
    }
    if (max_positions < 4) {
        throw ValidationError("max_positions must cover at least [CLS] + 2 prefixes + [SEP]");
    }
    if (dropout_p < 0 || dropout_p >= 1) {
        throw ValidationError("dropout_p must be in [0, 1)");
    }
    if (att_activation != "gelu" && att_activation != "tanh") {
        throw ValidationError("att_activation must be gelu or tanh, got " + att_activation);
    }
    ConvStackConfig::by_name(conv_profile, d_A, init_seed);  // profile name check
}

const TensorF& ParameterStore::at(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw ContractError("unknown parameter " + name);
    return it->second;
}

TensorF& ParameterStore::at(const std::string& name) {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw ContractError("unknown parameter " + name);
    return it->second;
}

Partition partition_of(const std::string& name) {
    if (name.rfind("frontend.", 0) == 0) return Partition::FrontendW;
    if (name.rfind("laa.", 0) == 0) return Partition::LaaA;
    if (name.rfind("lm.", 0) == 0) return Partition::LmLM;
    if (name.rfind("head.", 0) == 0) return Partition::HeadH;
    throw ContractError("parameter " + name + " belongs to no partition");
}

const char* partition_tag(Partition p) {
    switch (p) {
        case Partition::FrontendW: return "theta_W";
        case Partition::LaaA: return "theta_A";
        case Partition::LmLM: return "theta_LM";
        case Partition::HeadH: return "theta_h";
    }
    return "?";
}

std::uint64_t hash_prefix(const ParameterStore& ps, const std::string& prefix) {
    std::uint64_t h = fnv1a64(prefix);
    for (const auto& [name, tensor] : ps.arrays) {
        if (name.rfind(prefix, 0) != 0) continue;
        h ^= fnv1a64(name) ^ tensor.hash();
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t hash_partition(const ParameterStore& ps, Partition p) {
    std::uint64_t h = fnv1a64(std::string(partition_tag(p)));
    for (const auto& [name, tensor] : ps.arrays) {
        if (partition_of(name) != p) continue;
        h ^= fnv1a64(name) ^ tensor.hash();
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), stream derived from the name
void add_uniform(ParameterStore& ps, std::uint64_t seed, const std::string& name, Shape shape,
                 std::size_t fan_in) {
    TensorF t = TensorF::zeros(std::move(shape));
    Rng rng = derive_rng(seed, "init/" + name);
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    t.fill_uniform(rng, -bound, bound);
    ps.arrays.emplace(name, std::move(t));
}

void add_normal(ParameterStore& ps, std::uint64_t seed, const std::string& name, Shape shape,
                double stddev) {
    TensorF t = TensorF::zeros(std::move(shape));
    Rng rng = derive_rng(seed, "init/" + name);
    t.fill_normal(rng, 0.0, stddev);
    ps.arrays.emplace(name, std::move(t));
}

void add_const(ParameterStore& ps, const std::string& name, Shape shape, float value) {
    ps.arrays.emplace(name, TensorF::full(std::move(shape), value));
}

void add_gru_direction(ParameterStore& ps, const ModelConfig& cfg, const std::string& prefix) {
    std::size_t d = cfg.d, d_A = cfg.d_A;
    add_uniform(ps, cfg.init_seed, prefix + ".wx_rz", {d_A, 2 * d}, d_A);
    add_uniform(ps, cfg.init_seed, prefix + ".wh_rz", {d, 2 * d}, d);
    add_uniform(ps, cfg.init_seed, prefix + ".b_rz", {2 * d}, d);
    add_uniform(ps, cfg.init_seed, prefix + ".wx_n", {d_A, d}, d_A);
    add_uniform(ps, cfg.init_seed, prefix + ".wh_n", {d, d}, d);
    add_uniform(ps, cfg.init_seed, prefix + ".b_n", {d}, d);
}

}  // namespace

ParameterStore init_params(const ModelConfig& cfg) {
    cfg.validate();
    if (cfg.vocab_size == 0) {
        throw ValidationError("vocab_size must be resolved before parameter initialization");
    }
    ParameterStore ps;
    std::uint64_t seed = cfg.init_seed;
    std::size_t d = cfg.d, d_A = cfg.d_A, v = cfg.vocab_size;

    for (auto& [name, tensor] : init_frontend(cfg.conv())) {
        ps.arrays.emplace(name, std::move(tensor));
    }

    add_const(ps, "laa.ln.gamma", {d_A}, 1.0f);
    add_const(ps, "laa.ln.beta", {d_A}, 0.0f);
    add_uniform(ps, seed, "laa.proj.w", {d_A, d_A}, d_A);
    add_uniform(ps, seed, "laa.proj.b", {d_A}, d_A);
    add_gru_direction(ps, cfg, "laa.gru.fwd");
    add_gru_direction(ps, cfg, "laa.gru.bwd");
    add_uniform(ps, seed, "laa.att.w1", {d, d}, d);
    add_uniform(ps, seed, "laa.att.b1", {d}, d);
    add_uniform(ps, seed, "laa.att.w2", {d, 1}, d);
    add_uniform(ps, seed, "laa.att.b2", {1}, d);

    // Embeddings at sigma = 1/sqrt(d) and weight matrices at uniform
    // +-1/sqrt(fan_in) keep activation and logit magnitudes O(1) at any
    // width, so small study configs behave like full-size ones.
    add_normal(ps, seed, "lm.embed.tok", {v, d}, 1.0 / std::sqrt(static_cast<double>(d)));
    add_normal(ps, seed, "lm.embed.pos", {cfg.max_positions, d},
               1.0 / std::sqrt(static_cast<double>(d)));
    add_const(ps, "lm.embed.ln_gamma", {d}, 1.0f);
    add_const(ps, "lm.embed.ln_beta", {d}, 0.0f);

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        std::string base = "lm.encoder.L" + std::to_string(l);
        for (const char* w : {".attn.wq", ".attn.wk", ".attn.wv", ".attn.wo"}) {
            add_uniform(ps, seed, base + w, {d, d}, d);
        }
        for (const char* b : {".attn.bq", ".attn.bk", ".attn.bv", ".attn.bo"}) {
            add_const(ps, base + b, {d}, 0.0f);
        }
        for (const char* ln : {".ln1", ".ln2"}) {
            add_const(ps, base + ln + std::string(".gamma"), {d}, 1.0f);
            add_const(ps, base + ln + std::string(".beta"), {d}, 0.0f);
        }
        add_uniform(ps, seed, base + ".ff.w1", {d, cfg.d_ff}, d);
        add_const(ps, base + ".ff.b1", {cfg.d_ff}, 0.0f);
        add_uniform(ps, seed, base + ".ff.w2", {cfg.d_ff, d}, cfg.d_ff);
        add_const(ps, base + ".ff.b2", {d}, 0.0f);
    }

    if (!cfg.tie_mlm) add_uniform(ps, seed, "lm.mlm.w", {d, v}, d);
    add_const(ps, "lm.mlm.b", {v}, 0.0f);

    add_uniform(ps, seed, "head.w1", {d, d}, d);
    add_const(ps, "head.b1", {d}, 0.0f);
    add_uniform(ps, seed, "head.w2", {d, 1}, d);
    add_const(ps, "head.b2", {1}, 0.0f);
    return ps;
}

Freeze freeze_by_name(const std::string& name) {
    if (name == "R" || name == "robert-encoder") return Freeze::R;
    if (name == "R+Att" || name == "+Attention" || name == "+ Attention") return Freeze::RAtt;
    if (name == "R+Att+GRU" || name == "+BiGRU" || name == "+ BiGRU") return Freeze::RAttGru;
    if (name == "R+Att+GRU+Proj" || name == "+Projection" || name == "+ Projection") {
        return Freeze::RAttGruProj;
    }
    if (name == "ALL" || name == "All Parameters" || name == "all") return Freeze::All;
    throw ValidationError("unknown freeze config '" + name +
                          "'; valid names: R, R+Att, R+Att+GRU, R+Att+GRU+Proj, ALL");
}

const char* freeze_name(Freeze f) { return kFreezeNames[static_cast<int>(f)]; }

TrainableSet finetune_trainable(Freeze f, const ParameterStore& ps) {
    std::vector<std::string> prefixes = {"lm.encoder.", "head."};
    if (f >= Freeze::RAtt) prefixes.push_back("laa.att.");
    if (f >= Freeze::RAttGru) prefixes.push_back("laa.gru.");
    if (f >= Freeze::RAttGruProj) {
        prefixes.push_back("laa.proj.");
        prefixes.push_back("laa.ln.");
    }
    if (f >= Freeze::All) prefixes.push_back("lm.embed.");
    TrainableSet out;
    for (const auto& [name, tensor] : ps.arrays) {
        for (const std::string& p : prefixes) {
            if (name.rfind(p, 0) == 0) {
                out.insert(name);
                break;
            }
        }
    }
    return out;
}

TrainableSet pretrain_trainable(const ParameterStore& ps) {
    TrainableSet out;
    for (const auto& [name, tensor] : ps.arrays) {
        if (name.rfind("laa.", 0) == 0) out.insert(name);
    }
    return out;
}

}  // namespace splm
