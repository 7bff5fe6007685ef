// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0

#include "splm/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"
#include "splm/config.hpp"
#include "splm/store_io.hpp"

namespace splm {

namespace fs = std::filesystem;
using nlohmann::json;

// ----------------------------------------------------------------- masking

void MaskingPolicy::validate() const {
    if (mask_prob < 0 || mask_prob > 1) {
        throw ValidationError("mask_prob must be in [0, 1]");
    }
    double s = sub_mask + sub_random + sub_keep;
    if (std::fabs(s - 1.0) > 1e-9) {
        throw ValidationError("masking sub-probabilities sum to " + std::to_string(s) +
                              ", expected 1");
    }
}

MaskedTokens apply_mlm_mask(const std::vector<int>& tokens, const MaskingPolicy& policy,
                            std::size_t vocab_size, Rng& rng) {
    policy.validate();
    std::size_t content = tokens.size();
    while (content > 0 && tokens[content - 1] == kPadId) --content;
    if (content < 2 || tokens.front() != kClsId || tokens[content - 1] != kSepId) {
        throw ContractError(
            "token sequence must begin with [CLS] and end with [SEP] (before padding)");
    }
    if (vocab_size <= static_cast<std::size_t>(kNumSpecialIds)) {
        throw ContractError("vocabulary has no non-special ids for random replacement");
    }
    MaskedTokens out;
    out.corrupted = tokens;
    for (std::size_t i = 1; i + 1 < content; ++i) {
        if (tokens[i] == kPadId) continue;
        if (rng.uniform() >= policy.mask_prob) continue;
        out.positions.push_back(i + 2);  // prefixes shift textual slots by 2
        out.targets.push_back(static_cast<std::size_t>(tokens[i]));
        double sub = rng.uniform();
        if (sub < policy.sub_mask) {
            out.corrupted[i] = kMaskId;
        } else if (sub < policy.sub_mask + policy.sub_random) {
            out.corrupted[i] = kNumSpecialIds +
                               static_cast<int>(rng.below(vocab_size - kNumSpecialIds));
        }  // else: keep the original token
    }
    return out;
}

// --------------------------------------------------------------- optimizer

void TrainConfig::validate() const {
    if (warmup_frac < 0 || warmup_frac >= 1) {
        throw ValidationError("warmup_frac must be in [0, 1)");
    }
    if (lr_pretrain <= 0 || lr_finetune <= 0) throw ValidationError("learning rate must be > 0");
    if (batch_pretrain == 0 || batch_finetune == 0) {
        throw ValidationError("batch size must be > 0");
    }
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
        throw ValidationError("adam betas must be in [0, 1)");
    }
}

double lr_at(std::size_t step, std::size_t total, double peak, double warmup_frac) {
    if (total == 0) return 0.0;
    if (step > total) {
        std::cerr << "warning: lr_at step " << step << " beyond total " << total
                  << ", clamping to 0\n";
        return 0.0;
    }
    auto warmup = static_cast<std::size_t>(std::llround(warmup_frac * static_cast<double>(total)));
    if (warmup > 0 && step < warmup) {
        return peak * static_cast<double>(step) / static_cast<double>(warmup);
    }
    if (total == warmup) return peak;
    double progress = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
    return peak * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

void adamw_update_one(TensorF& param, const TensorF& grad, TensorF& m, TensorF& v,
                      std::size_t t, const TrainConfig& cfg, double lr) {
    if (!param.same_shape(grad)) {
        throw ShapeError("adamw: gradient shape " + shape_str(grad.shape) + " vs parameter " +
                         shape_str(param.shape));
    }
    if (!grad.all_finite()) {
        throw NonFiniteError("adamw: non-finite gradient; aborting step " + std::to_string(t));
    }
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.numel(); ++i) {
        double g = grad[i];
        double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        double mhat = mi / bc1;
        double vhat = vi / bc2;
        // Decoupled decay: applied to the parameter directly, not via the
        // gradient, so it is unaffected by the moment normalization.
        double update = mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * param[i];
        param[i] = static_cast<float>(param[i] - lr * update);
    }
}

void adamw_update(ParameterStore& ps, const GradMap<float>& grads, AdamState& st,
                  const TrainConfig& cfg, double lr) {
    ++st.t;
    for (const auto& [name, grad] : grads) {
        TensorF& param = ps.at(name);
        auto it = st.moments.find(name);
        if (it == st.moments.end()) {
            it = st.moments
                     .emplace(name, std::make_pair(TensorF::zeros(param.shape),
                                                   TensorF::zeros(param.shape)))
                     .first;
        }
        adamw_update_one(param, grad, it->second.first, it->second.second, st.t, cfg, lr);
    }
}

// ------------------------------------------------------------- checkpoints

void save_checkpoint(const Checkpoint& ck, const std::string& dir) {
    fs::create_directories(dir);

    json cfg;
    cfg["format"] = kCheckpointFormat;
    cfg["model"] = json::parse(model_config_json(ck.model));
    cfg["vocab"] = ck.vocab;
    std::ofstream cf(fs::path(dir) / "config.json");
    if (!cf) throw IoError("cannot write " + dir + "/config.json");
    cf << cfg.dump(2) << "\n";

    ArrayStore arrays;
    for (const auto& [name, tensor] : ck.params.arrays) {
        arrays.emplace(name, StoredArray{tensor, partition_tag(partition_of(name))});
    }
    save_arrays(dir, arrays);

    std::ofstream ob(fs::path(dir) / "opt.bin", std::ios::binary);
    if (!ob) throw IoError("cannot write " + dir + "/opt.bin");
    auto write_u64 = [&ob](std::uint64_t v) {
        ob.write(reinterpret_cast<const char*>(&v), 8);
    };
    write_u64(ck.opt.t);
    write_u64(ck.opt.moments.size());
    for (const auto& [name, mv] : ck.opt.moments) {
        write_u64(name.size());
        ob.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u64(mv.first.numel());
        write_f32(ob, mv.first.data.data(), mv.first.numel());
        write_f32(ob, mv.second.data.data(), mv.second.numel());
    }
    ob.close();
    if (!ob) throw IoError("failed writing " + dir + "/opt.bin");

    json rng;
    rng["seed"] = ck.seed;
    rng["next_step"] = ck.next_step;
    std::ofstream rf(fs::path(dir) / "rng.json");
    if (!rf) throw IoError("cannot write " + dir + "/rng.json");
    rf << rng.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& dir) {
    std::ifstream cf(fs::path(dir) / "config.json");
    if (!cf) throw IoError("cannot read " + dir + "/config.json");
    json cfg;
    try {
        cf >> cfg;
    } catch (const json::exception& e) {
        throw IntegrityError(dir + "/config.json is malformed: " + e.what());
    }
    if (!cfg.contains("format") || cfg["format"].get<std::string>() != kCheckpointFormat) {
        throw IncompatibleError("checkpoint format '" +
                                cfg.value("format", std::string("<missing>")) +
                                "' differs from supported '" + kCheckpointFormat + "'");
    }

    Checkpoint ck;
    ck.model = model_config_from_json(cfg.at("model").dump());
    ck.vocab = cfg.at("vocab").get<std::vector<std::string>>();

    for (auto& [name, rec] : load_arrays(dir)) {
        if (partition_tag(partition_of(name)) != rec.partition && !rec.partition.empty()) {
            throw IntegrityError("array " + name + " tagged '" + rec.partition +
                                 "' but its name implies '" +
                                 partition_tag(partition_of(name)) + "'");
        }
        ck.params.arrays.emplace(name, std::move(rec.tensor));
    }
    auto tok = ck.params.arrays.find("lm.embed.tok");
    if (tok == ck.params.arrays.end() ||
        tok->second.shape != Shape{ck.model.vocab_size, ck.model.d}) {
        throw IncompatibleError("checkpoint arrays do not match the stored model config");
    }

    std::ifstream ob(fs::path(dir) / "opt.bin", std::ios::binary);
    if (!ob) throw IoError("cannot read " + dir + "/opt.bin");
    auto read_u64 = [&ob, &dir]() {
        std::uint64_t v = 0;
        ob.read(reinterpret_cast<char*>(&v), 8);
        if (ob.gcount() != 8) throw IntegrityError("truncated read of " + dir + "/opt.bin");
        return v;
    };
    ck.opt.t = read_u64();
    std::uint64_t n_moments = read_u64();
    for (std::uint64_t i = 0; i < n_moments; ++i) {
        std::uint64_t len = read_u64();
        std::string name(len, '\0');
        ob.read(name.data(), static_cast<std::streamsize>(len));
        if (static_cast<std::uint64_t>(ob.gcount()) != len) {
            throw IntegrityError("truncated read of " + dir + "/opt.bin");
        }
        auto pit = ck.params.arrays.find(name);
        if (pit == ck.params.arrays.end()) {
            throw IntegrityError("optimizer moment for unknown parameter " + name);
        }
        std::uint64_t numel = read_u64();
        if (numel != pit->second.numel()) {
            throw IntegrityError("optimizer moment size mismatch for " + name);
        }
        TensorF m = TensorF::zeros(pit->second.shape);
        TensorF v = TensorF::zeros(pit->second.shape);
        read_f32(ob, m.data.data(), numel, dir + "/opt.bin");
        read_f32(ob, v.data.data(), numel, dir + "/opt.bin");
        ck.opt.moments.emplace(name, std::make_pair(std::move(m), std::move(v)));
    }

    std::ifstream rf(fs::path(dir) / "rng.json");
    if (!rf) throw IoError("cannot read " + dir + "/rng.json");
    json rng;
    try {
        rf >> rng;
    } catch (const json::exception& e) {
        throw IntegrityError(dir + "/rng.json is malformed: " + e.what());
    }
    ck.seed = rng.at("seed").get<std::uint64_t>();
    ck.next_step = rng.at("next_step").get<std::size_t>();
    return ck;
}

// ----------------------------------------------------------------- trainer

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = rng.below(i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

void append_csv_row(std::ofstream& csv, std::size_t step, double lr, double loss) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g\n", step, lr, loss);
    csv << buf;
}

}  // namespace

Trainer::Trainer(ModelConfig model_cfg, TrainConfig train_cfg, MaskingPolicy mask_cfg,
                 ParameterStore params, Vocab vocab, std::size_t start_step, AdamState opt)
    : model_(std::move(model_cfg)),
      train_(train_cfg),
      mask_(mask_cfg),
      params_(std::move(params)),
      vocab_(std::move(vocab)),
      opt_(std::move(opt)),
      step_(start_step) {
    if (model_.vocab_size == 0) model_.vocab_size = vocab_.size();
    if (model_.vocab_size != vocab_.size()) {
        throw IncompatibleError("model vocab_size " + std::to_string(model_.vocab_size) +
                                " vs vocabulary of " + std::to_string(vocab_.size()));
    }
    model_.validate();
    train_.validate();
    mask_.validate();
}

const TensorF& Trainer::features_of(const Example& ex) {
    auto it = feature_cache_.find(ex.id);
    if (it != feature_cache_.end()) return it->second;
    TensorF frames = conv_frontend(load_wav(ex.audio), model_.conv(), params_.arrays);
    return feature_cache_.emplace(ex.id, std::move(frames)).first->second;
}

void Trainer::cache_features(const std::vector<Example>& examples) {
    for (const Example& ex : examples) features_of(ex);
}

Checkpoint Trainer::snapshot() const {
    return Checkpoint{model_, vocab_.to_list(), params_, opt_, step_, train_.seed};
}

void Trainer::save_failed_state(const std::string& out_dir, const std::string& message) {
    try {
        save_checkpoint(snapshot(), (fs::path(out_dir) / "failed-state").string());
        std::ofstream marker(fs::path(out_dir) / ".failed");
        marker << message << "\n";
    } catch (const Error& e) {
        std::cerr << "while saving failed state: " << e.what() << "\n";
    }
}

double Trainer::batch_loss_and_update(const std::vector<const Example*>& batch, std::size_t step,
                                      const TrainableSet& trainable, double lr,
                                      bool pretrain_phase, bool* skipped) {
    GradMap<float> acc;
    double loss_sum = 0.0;
    std::size_t contributing = 0;

    for (const Example* exp : batch) {
        const Example& ex = *exp;
        // Stable per-example stream index: position in the full dataset is
        // not available here, so hash the id instead.
        std::uint64_t ex_stream = fnv1a64(ex.id);
        std::vector<int> tokens = vocab_.encode_with_specials(ex.text);

        Graph<float> g;
        Binder<float> P(g, params_.arrays);
        Rng drng = derive_rng(train_.seed, "dropout", step, ex_stream);
        NodeId loss;
        if (pretrain_phase) {
            Rng mrng = derive_rng(train_.seed, "mask", step, ex_stream);
            MaskedTokens masked = apply_mlm_mask(tokens, mask_, model_.vocab_size, mrng);
            if (masked.positions.empty()) continue;
            loss = mlm_example_loss(g, P, features_of(ex), masked.corrupted, masked.positions,
                                    masked.targets, model_, true, &drng);
        } else {
            loss = mse_example_loss(g, P, features_of(ex), tokens, ex.label, model_, true, &drng);
        }
        loss_sum += g.value(loss)[0];
        ++contributing;
        GradMap<float> grads = g.backward(loss, trainable);
        for (auto& [name, grad] : grads) {
            auto it = acc.find(name);
            if (it == acc.end()) {
                acc.emplace(name, std::move(grad));
            } else {
                for (std::size_t i = 0; i < grad.numel(); ++i) it->second[i] += grad[i];
            }
        }
    }

    if (contributing == 0) {
        *skipped = true;
        return 0.0;
    }
    *skipped = false;
    float inv = 1.0f / static_cast<float>(contributing);
    for (auto& [name, grad] : acc) {
        for (std::size_t i = 0; i < grad.numel(); ++i) grad[i] *= inv;
    }
    adamw_update(params_, acc, opt_, train_, lr);
    return loss_sum / static_cast<double>(contributing);
}

PretrainResult Trainer::pretrain(const std::vector<Example>& train_set,
                                 const std::string& out_dir) {
    if (train_set.empty()) throw ValidationError("pretraining needs a non-empty train split");
    fs::create_directories(out_dir);
    cache_features(train_set);
    TrainableSet trainable = pretrain_trainable(params_);
    std::size_t total = train_.pretrain_steps;
    std::size_t b = std::min<std::size_t>(train_.batch_pretrain, train_set.size());
    std::size_t spe = (train_set.size() + b - 1) / b;

    fs::path csv_path = fs::path(out_dir) / "pretrain_loss.csv";
    bool resuming = step_ > 0 && fs::exists(csv_path);
    std::ofstream csv(csv_path, resuming ? std::ios::app : std::ios::trunc);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    if (!resuming) csv << "step,lr,loss\n";

    PretrainResult res;
    std::size_t cached_epoch = static_cast<std::size_t>(-1);
    std::vector<std::size_t> order;
    try {
        for (std::size_t s = step_; s < total; ++s) {
            std::size_t epoch = s / spe;
            if (epoch != cached_epoch) {
                order = shuffled_indices(train_set.size(),
                                         derive_rng(train_.seed, "shuffle", epoch, 0));
                cached_epoch = epoch;
            }
            std::size_t k = s % spe;
            std::vector<const Example*> batch;
            for (std::size_t i = k * b; i < std::min((k + 1) * b, train_set.size()); ++i) {
                batch.push_back(&train_set[order[i]]);
            }
            double lr = lr_at(s, total, train_.lr_pretrain, train_.warmup_frac);
            bool skipped = false;
            double loss = batch_loss_and_update(batch, s, trainable, lr, true, &skipped);
            step_ = s + 1;
            if (skipped) {
                ++res.skipped_steps;
                std::cerr << "step " << step_
                          << ": no masked positions anywhere in the batch; update skipped\n";
            } else {
                res.losses.push_back(loss);
                append_csv_row(csv, step_, lr, loss);
            }
            bool cadence_hit = train_.checkpoint_every != 0 && step_ % train_.checkpoint_every == 0;
            if (cadence_hit || step_ == total) {
                save_checkpoint(snapshot(), (fs::path(out_dir) / ("step-" + std::to_string(step_)))
                                                .string());
            }
        }
        if (total == 0) {
            save_checkpoint(snapshot(), (fs::path(out_dir) / "step-0").string());
        }
        save_checkpoint(snapshot(), (fs::path(out_dir) / "final").string());
    } catch (const NonFiniteError& e) {
        save_failed_state(out_dir, e.what());
        throw;
    }
    return res;
}

FinetuneResult Trainer::finetune(const std::vector<Example>& train_set,
                                 const std::vector<Example>& valid, Freeze freeze,
                                 const std::string& out_dir) {
    if (train_set.empty()) throw ValidationError("fine-tuning needs a non-empty train split");
    fs::create_directories(out_dir);
    cache_features(train_set);
    cache_features(valid);
    TrainableSet trainable = finetune_trainable(freeze, params_);
    std::size_t b = std::min<std::size_t>(train_.batch_finetune, train_set.size());
    std::size_t spe = (train_set.size() + b - 1) / b;
    std::size_t total = spe * train_.finetune_epochs;

    fs::path csv_path = fs::path(out_dir) / "finetune_loss.csv";
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    csv << "step,lr,loss\n";

    FinetuneResult res;
    double best_f1 = -1.0;
    ParameterStore best_params;
    AdamState best_opt;
    std::size_t best_step = 0;

    try {
        for (std::size_t epoch = 0; epoch < train_.finetune_epochs; ++epoch) {
            std::vector<std::size_t> order = shuffled_indices(
                train_set.size(), derive_rng(train_.seed, "shuffle", epoch, 0));
            for (std::size_t k = 0; k < spe; ++k) {
                std::size_t s = epoch * spe + k;
                std::vector<const Example*> batch;
                for (std::size_t i = k * b; i < std::min((k + 1) * b, train_set.size()); ++i) {
                    batch.push_back(&train_set[order[i]]);
                }
                double lr = lr_at(s, total, train_.lr_finetune, train_.warmup_frac);
                bool skipped = false;
                double loss = batch_loss_and_update(batch, s, trainable, lr, false, &skipped);
                step_ = s + 1;
                res.losses.push_back(loss);
                append_csv_row(csv, step_, lr, loss);
            }
            if (!valid.empty()) {
                EvalReport report = evaluate_split(valid);
                if (report.f1 > best_f1) {
                    best_f1 = report.f1;
                    best_params = params_;
                    best_opt = opt_;
                    best_step = step_;
                    res.best_valid = report;
                    res.best_epoch = epoch + 1;
                }
            }
        }
        if (best_f1 < 0) {  // no validation data: the final model is the best model
            best_params = params_;
            best_opt = opt_;
            best_step = step_;
        }
        save_checkpoint(snapshot(), (fs::path(out_dir) / "final").string());
        Checkpoint best{model_, vocab_.to_list(), best_params, best_opt, best_step, train_.seed};
        save_checkpoint(best, (fs::path(out_dir) / "best").string());
        if (best_f1 >= 0) {
            std::ofstream report(fs::path(out_dir) / "eval_report.json");
            report << res.best_valid.to_json() << "\n";
        } else {
            std::cerr << "warning: empty validation split, skipping eval_report.json\n";
        }
    } catch (const NonFiniteError& e) {
        save_failed_state(out_dir, e.what());
        throw;
    }
    return res;
}

std::vector<double> Trainer::predict(const std::vector<Example>& examples) {
    std::vector<double> preds;
    preds.reserve(examples.size());
    for (const Example& ex : examples) {
        std::vector<int> tokens = vocab_.encode_with_specials(ex.text);
        Graph<float> g;
        Binder<float> P(g, params_.arrays);
        NodeId pred = regression_prediction(g, P, features_of(ex), tokens, model_, false,
                                            nullptr);
        preds.push_back(static_cast<double>(g.value(pred)[0]));
    }
    return preds;
}

EvalReport Trainer::evaluate_split(const std::vector<Example>& examples) {
    if (examples.empty()) throw ContractError("evaluate: empty split");
    std::vector<double> gold;
    gold.reserve(examples.size());
    for (const Example& ex : examples) gold.push_back(ex.label);
    return evaluate(predict(examples), gold);
}

// --------------------------------------------------------- attention export

AttentionExport export_attention(const ParameterStore& ps, const ModelConfig& cfg,
                                 const Vocab& vocab, const Example& ex) {
    if (cfg.ablate_prefixes) {
        throw ContractError("attention export is unavailable with ablated prefixes");
    }
    TensorF features = conv_frontend(load_wav(ex.audio), cfg.conv(), ps.arrays);
    std::vector<int> tokens = vocab.encode_with_specials(ex.text);

    Graph<float> g;
    // Binder requires a mutable-free view; params are read-only here.
    Binder<float> P(g, ps.arrays);
    AttentionExport out;
    LaaNodes<float> laa;
    regression_prediction(g, P, features, tokens, cfg, false, nullptr, &out.layers, &laa);
    out.alpha_fwd = g.value(laa.alpha_fwd);
    out.alpha_bwd = g.value(laa.alpha_bwd);

    out.labels.push_back("[CLS]");
    out.labels.push_back("prefix_1");
    out.labels.push_back("prefix_2");
    for (std::size_t i = 1; i + 1 < tokens.size(); ++i) {
        out.labels.push_back(vocab.word_of(tokens[i]));
    }
    out.labels.push_back("[SEP]");
    return out;
}

}  // namespace splm
