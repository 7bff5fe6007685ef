// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0
//
// Training: masking policy, AdamW with decoupled weight decay, warmup+cosine
// schedule, the pretraining loop (updates only the aggregation module) and
// the fine-tuning loop (updates the freeze-config set), plus checkpoints.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "splm/metrics.hpp"
#include "splm/model.hpp"

namespace splm {

// ----------------------------------------------------------------- masking

struct MaskingPolicy {
    double mask_prob = 0.15;
    double sub_mask = 0.8;
    double sub_random = 0.1;
    double sub_keep = 0.1;

    void validate() const;
};

struct MaskedTokens {
    std::vector<int> corrupted;          // token sequence with the corruptions applied
    std::vector<std::size_t> positions;  // assembled positions (token index + 2)
    std::vector<std::size_t> targets;    // original ids, aligned with positions
};

// Independently selects each textual token (never [CLS]/[SEP]/[PAD]) with
// mask_prob, then replaces it by [MASK] / a random non-special id / itself
// per the sub-probabilities. Zero selections is a valid outcome.
MaskedTokens apply_mlm_mask(const std::vector<int>& tokens, const MaskingPolicy& policy,
                            std::size_t vocab_size, Rng& rng);

// --------------------------------------------------------------- optimizer

struct TrainConfig {
    double lr_pretrain = 1e-3;   // full-scale profile uses 2e-5
    double lr_finetune = 1e-3;
    double warmup_frac = 0.1;
    std::size_t pretrain_steps = 200;
    std::size_t finetune_epochs = 3;
    std::size_t batch_pretrain = 16;  // full-scale profile uses 32
    std::size_t batch_finetune = 16;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t checkpoint_every = 0;  // 0 = final only
    std::uint64_t seed = 0;

    void validate() const;
};

// Linear warmup from 0 to peak over warmup_frac * total steps, then cosine
// decay to 0 at total. Steps beyond total clamp to 0 with a warning.
double lr_at(std::size_t step, std::size_t total, double peak, double warmup_frac);

struct AdamState {
    std::map<std::string, std::pair<TensorF, TensorF>> moments;  // first, second
    std::size_t t = 0;  // completed updates (bias correction uses t after increment)
};

// One AdamW step on a single array; t is the 1-based update count.
void adamw_update_one(TensorF& param, const TensorF& grad, TensorF& m, TensorF& v,
                      std::size_t t, const TrainConfig& cfg, double lr);

// Applies one optimizer step to every array present in grads.
void adamw_update(ParameterStore& ps, const GradMap<float>& grads, AdamState& st,
                  const TrainConfig& cfg, double lr);

// ------------------------------------------------------------- checkpoints

inline constexpr const char* kCheckpointFormat = "splm-ckpt-1";

struct Checkpoint {
    ModelConfig model;
    std::vector<std::string> vocab;
    ParameterStore params;
    AdamState opt;
    std::size_t next_step = 0;
    std::uint64_t seed = 0;
};

void save_checkpoint(const Checkpoint& ck, const std::string& dir);
Checkpoint load_checkpoint(const std::string& dir);

// ---------------------------------------------------------------- trainer

struct PretrainResult {
    std::vector<double> losses;   // one entry per logged step
    std::size_t skipped_steps = 0;
};

struct FinetuneResult {
    std::vector<double> losses;
    EvalReport best_valid;       // report of the best-on-valid parameters
    std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
};

class Trainer {
public:
    Trainer(ModelConfig model_cfg, TrainConfig train_cfg, MaskingPolicy mask_cfg,
            ParameterStore params, Vocab vocab, std::size_t start_step = 0,
            AdamState opt = {});

    // Runs the frozen frontend once per distinct example id.
    void cache_features(const std::vector<Example>& examples);

    // Masked-LM pretraining; only the aggregation partition receives updates.
    // Writes pretrain_loss.csv and step-<n>/final checkpoint directories.
    PretrainResult pretrain(const std::vector<Example>& train, const std::string& out_dir);

    // MSE fine-tuning under a freeze config; writes finetune_loss.csv, a
    // best/ checkpoint, a final/ checkpoint, and eval_report.json.
    FinetuneResult finetune(const std::vector<Example>& train,
                            const std::vector<Example>& valid, Freeze freeze,
                            const std::string& out_dir);

    std::vector<double> predict(const std::vector<Example>& examples);
    EvalReport evaluate_split(const std::vector<Example>& examples);

    const ParameterStore& params() const { return params_; }
    ParameterStore& params() { return params_; }
    const ModelConfig& model_config() const { return model_; }
    const Vocab& vocab() const { return vocab_; }
    std::size_t step() const { return step_; }
    const AdamState& opt_state() const { return opt_; }

    Checkpoint snapshot() const;

private:
    double batch_loss_and_update(const std::vector<const Example*>& batch, std::size_t step,
                                 const TrainableSet& trainable, double lr, bool pretrain_phase,
                                 bool* skipped);
    const TensorF& features_of(const Example& ex);
    void save_failed_state(const std::string& out_dir, const std::string& message);

    ModelConfig model_;
    TrainConfig train_;
    MaskingPolicy mask_;
    ParameterStore params_;
    Vocab vocab_;
    AdamState opt_;
    std::size_t step_ = 0;
    std::map<std::string, TensorF> feature_cache_;
};

// --------------------------------------------------------- attention export

struct AttentionExport {
    TensorF alpha_fwd;              // 1 x T_A
    TensorF alpha_bwd;              // 1 x T_A
    AttentionTrace<float> layers;   // [layer][head], each (T_L+4) x (T_L+4)
    std::vector<std::string> labels;  // row/column labels, includes prefix_1/prefix_2
};

AttentionExport export_attention(const ParameterStore& ps, const ModelConfig& cfg,
                                 const Vocab& vocab, const Example& ex);

}  // namespace splm
