// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0

#include "splm/config.hpp"

#include <fstream>

#include "json.hpp"

namespace splm {

using nlohmann::json;

namespace {

json model_to_json(const ModelConfig& m) {
    json j;
    j["d"] = m.d;
    j["n_layers"] = m.n_layers;
    j["n_heads"] = m.n_heads;
    j["d_ff"] = m.d_ff;
    j["vocab_size"] = m.vocab_size;
    j["max_positions"] = m.max_positions;
    j["d_A"] = m.d_A;
    j["dropout_p"] = m.dropout_p;
    j["ln_eps"] = m.ln_eps;
    j["att_activation"] = m.att_activation;
    j["prefix_after_embed_ln"] = m.prefix_after_embed_ln;
    j["tie_mlm"] = m.tie_mlm;
    j["ablate_prefixes"] = m.ablate_prefixes;
    j["conv_profile"] = m.conv_profile;
    j["init_seed"] = m.init_seed;
    return j;
}

ModelConfig model_from_json(const json& j, const ModelConfig& base) {
    ModelConfig m = base;
    m.d = j.value("d", m.d);
    m.n_layers = j.value("n_layers", m.n_layers);
    m.n_heads = j.value("n_heads", m.n_heads);
    m.d_ff = j.value("d_ff", m.d_ff);
    m.vocab_size = j.value("vocab_size", m.vocab_size);
    m.max_positions = j.value("max_positions", m.max_positions);
    m.d_A = j.value("d_A", m.d_A);
    m.dropout_p = j.value("dropout_p", m.dropout_p);
    m.ln_eps = j.value("ln_eps", m.ln_eps);
    m.att_activation = j.value("att_activation", m.att_activation);
    m.prefix_after_embed_ln = j.value("prefix_after_embed_ln", m.prefix_after_embed_ln);
    m.tie_mlm = j.value("tie_mlm", m.tie_mlm);
    m.ablate_prefixes = j.value("ablate_prefixes", m.ablate_prefixes);
    m.conv_profile = j.value("conv_profile", m.conv_profile);
    m.init_seed = j.value("init_seed", m.init_seed);
    return m;
}

json train_to_json(const TrainConfig& t) {
    json j;
    j["lr_pretrain"] = t.lr_pretrain;
    j["lr_finetune"] = t.lr_finetune;
    j["warmup_frac"] = t.warmup_frac;
    j["pretrain_steps"] = t.pretrain_steps;
    j["finetune_epochs"] = t.finetune_epochs;
    j["batch_pretrain"] = t.batch_pretrain;
    j["batch_finetune"] = t.batch_finetune;
    j["weight_decay"] = t.weight_decay;
    j["beta1"] = t.beta1;
    j["beta2"] = t.beta2;
    j["eps"] = t.eps;
    j["checkpoint_every"] = t.checkpoint_every;
    j["seed"] = t.seed;
    return j;
}

TrainConfig train_from_json(const json& j, const TrainConfig& base) {
    TrainConfig t = base;
    t.lr_pretrain = j.value("lr_pretrain", t.lr_pretrain);
    t.lr_finetune = j.value("lr_finetune", t.lr_finetune);
    t.warmup_frac = j.value("warmup_frac", t.warmup_frac);
    t.pretrain_steps = j.value("pretrain_steps", t.pretrain_steps);
    t.finetune_epochs = j.value("finetune_epochs", t.finetune_epochs);
    t.batch_pretrain = j.value("batch_pretrain", t.batch_pretrain);
    t.batch_finetune = j.value("batch_finetune", t.batch_finetune);
    t.weight_decay = j.value("weight_decay", t.weight_decay);
    t.beta1 = j.value("beta1", t.beta1);
    t.beta2 = j.value("beta2", t.beta2);
    t.eps = j.value("eps", t.eps);
    t.checkpoint_every = j.value("checkpoint_every", t.checkpoint_every);
    t.seed = j.value("seed", t.seed);
    return t;
}

json mask_to_json(const MaskingPolicy& m) {
    json j;
    j["mask_prob"] = m.mask_prob;
    j["sub_mask"] = m.sub_mask;
    j["sub_random"] = m.sub_random;
    j["sub_keep"] = m.sub_keep;
    return j;
}

MaskingPolicy mask_from_json(const json& j, const MaskingPolicy& base) {
    MaskingPolicy m = base;
    m.mask_prob = j.value("mask_prob", m.mask_prob);
    m.sub_mask = j.value("sub_mask", m.sub_mask);
    m.sub_random = j.value("sub_random", m.sub_random);
    m.sub_keep = j.value("sub_keep", m.sub_keep);
    return m;
}

json run_to_json(const RunConfig& rc) {
    json j;
    j["profile"] = rc.profile;
    j["seed"] = rc.seed;
    j["freeze"] = rc.freeze;
    j["data"]["manifest"] = rc.manifest;
    j["model"] = model_to_json(rc.model);
    j["train"] = train_to_json(rc.train);
    j["mask"] = mask_to_json(rc.mask);
    return j;
}

RunConfig run_from_json(const json& j, const RunConfig& base) {
    RunConfig rc = base;
    rc.profile = j.value("profile", rc.profile);
    rc.seed = j.value("seed", rc.seed);
    rc.freeze = j.value("freeze", rc.freeze);
    if (j.contains("data")) rc.manifest = j["data"].value("manifest", rc.manifest);
    if (j.contains("model")) rc.model = model_from_json(j["model"], rc.model);
    if (j.contains("train")) rc.train = train_from_json(j["train"], rc.train);
    if (j.contains("mask")) rc.mask = mask_from_json(j["mask"], rc.mask);
    return rc;
}

// Rejects keys we would silently ignore: every key in `given` must exist in
// the fully-serialized reference at the same path.
void check_keys(const json& ref, const json& given, const std::string& path) {
    if (!given.is_object()) return;
    for (auto it = given.begin(); it != given.end(); ++it) {
        std::string here = path.empty() ? it.key() : path + "." + it.key();
        if (!ref.is_object() || !ref.contains(it.key())) {
            throw ValidationError("unknown config key: " + here);
        }
        check_keys(ref[it.key()], it.value(), here);
    }
}

void deep_merge(json& base, const json& patch) {
    if (!patch.is_object() || !base.is_object()) {
        base = patch;
        return;
    }
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (base.contains(it.key())) {
            deep_merge(base[it.key()], it.value());
        } else {
            base[it.key()] = it.value();
        }
    }
}

// "train.lr_finetune=2e-5" -> sets /train/lr_finetune. The value is parsed
// as JSON when possible, otherwise taken as a bare string.
void apply_override(json& j, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationError("override '" + kv + "' is not of the form key=value");
    }
    std::string key = kv.substr(0, eq);
    std::string raw = kv.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;
    }
    std::string pointer = "/";
    for (char c : key) pointer += (c == '.') ? '/' : c;
    j[json::json_pointer(pointer)] = value;
}

}  // namespace

RunConfig profile_defaults(const std::string& name) {
    RunConfig rc;  // struct defaults are the desk-scale ("toy") profile
    rc.profile = name;
    if (name == "toy") {
        return rc;
    }
    if (name == "base") {
        rc.model.d = 768;
        rc.model.n_layers = 12;
        rc.model.n_heads = 12;
        rc.model.d_ff = 3072;
        rc.model.d_A = 512;
        rc.model.vocab_size = 50265;
        rc.model.max_positions = 514;
        rc.model.tie_mlm = true;
        rc.train.lr_pretrain = 2e-5;
        rc.train.lr_finetune = 2e-5;
        rc.train.pretrain_steps = 8000;
        rc.train.finetune_epochs = 3;
        rc.train.batch_pretrain = 32;
        rc.train.batch_finetune = 16;
        return rc;
    }
    throw ValidationError("unknown profile '" + name + "' (expected toy or base)");
}

RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::string>& overrides) {
    json file = json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw IoError("cannot read config file " + config_path);
        try {
            in >> file;
        } catch (const json::exception& e) {
            throw ValidationError(config_path + " is not valid JSON: " + e.what());
        }
        if (!file.is_object()) {
            throw ValidationError(config_path + " must contain a JSON object");
        }
    }

    // The profile decides the defaults, so it is resolved before merging.
    std::string profile = file.value("profile", std::string("toy"));
    for (const std::string& kv : overrides) {
        if (kv.rfind("profile=", 0) == 0) profile = kv.substr(8);
    }

    RunConfig defaults = profile_defaults(profile);
    json merged = run_to_json(defaults);
    check_keys(merged, file, "");
    deep_merge(merged, file);
    for (const std::string& kv : overrides) apply_override(merged, kv);
    check_keys(run_to_json(defaults), merged, "");

    RunConfig rc = run_from_json(merged, defaults);
    rc.train.validate();
    rc.mask.validate();
    freeze_by_name(rc.freeze);  // reject unknown freeze names early
    return rc;
}

std::string run_config_json(const RunConfig& rc) { return run_to_json(rc).dump(2); }

std::string model_config_json(const ModelConfig& mc) { return model_to_json(mc).dump(2); }

ModelConfig model_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model config is not valid JSON: ") + e.what());
    }
    check_keys(model_to_json(ModelConfig{}), j, "model");
    return model_from_json(j, ModelConfig{});
}

void require_compatible(const ModelConfig& ckpt, const ModelConfig& run) {
    auto fail = [](const std::string& field, const std::string& a, const std::string& b) {
        throw IncompatibleError("checkpoint " + field + "=" + a +
                                " differs from requested " + field + "=" + b);
    };
    auto cmp_u = [&fail](const char* f, std::size_t a, std::size_t b) {
        if (a != b) fail(f, std::to_string(a), std::to_string(b));
    };
    cmp_u("d", ckpt.d, run.d);
    cmp_u("n_layers", ckpt.n_layers, run.n_layers);
    cmp_u("n_heads", ckpt.n_heads, run.n_heads);
    cmp_u("d_ff", ckpt.d_ff, run.d_ff);
    cmp_u("max_positions", ckpt.max_positions, run.max_positions);
    cmp_u("d_A", ckpt.d_A, run.d_A);
    if (run.vocab_size != 0) cmp_u("vocab_size", ckpt.vocab_size, run.vocab_size);
    if (ckpt.conv_profile != run.conv_profile) {
        fail("conv_profile", ckpt.conv_profile, run.conv_profile);
    }
    if (ckpt.att_activation != run.att_activation) {
        fail("att_activation", ckpt.att_activation, run.att_activation);
    }
    if (ckpt.tie_mlm != run.tie_mlm) {
        fail("tie_mlm", ckpt.tie_mlm ? "true" : "false", run.tie_mlm ? "true" : "false");
    }
    if (ckpt.prefix_after_embed_ln != run.prefix_after_embed_ln) {
        fail("prefix_after_embed_ln", ckpt.prefix_after_embed_ln ? "true" : "false",
             run.prefix_after_embed_ln ? "true" : "false");
    }
}

}  // namespace splm
