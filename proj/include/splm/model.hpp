// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0
//
// Model definition: configuration, the named parameter store with its four
// partitions, freeze-set expansion, and graph builders for every stage of
// the forward pass (speech aggregation, sequence assembly, encoder, heads).
// Builders are templated on the scalar type so the same code runs in float
// for training and in double for finite-difference verification.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "splm/audio.hpp"
#include "splm/data.hpp"
#include "splm/graph.hpp"

namespace splm {

struct ModelConfig {
    std::size_t d = 64;           // encoder width; also BiGRU hidden size per direction
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t d_ff = 256;
    std::size_t vocab_size = 0;   // 0 means "fill from data before building"
    std::size_t max_positions = 128;
    std::size_t d_A = 32;         // frontend/projection width
    double dropout_p = 0.1;
    double ln_eps = 1e-5;
    std::string att_activation = "gelu";  // pooling score activation; "tanh" selectable
    bool prefix_after_embed_ln = false;   // true: prefixes bypass the embedding LayerNorm
    bool tie_mlm = false;                 // true: MLM output reuses the token embedding
    bool ablate_prefixes = false;         // true: zero prefixes (text-only ablation)
    std::string conv_profile = "seven_layer";
    std::uint64_t init_seed = 0;

    void validate() const;
    ConvStackConfig conv() const { return ConvStackConfig::by_name(conv_profile, d_A, init_seed); }
};

// All named arrays of the model, ordered by name. Partition membership is
// determined by the name prefix, so the four partitions are disjoint and
// cover everything by construction.
struct ParameterStore {
    std::map<std::string, TensorF> arrays;

    const TensorF& at(const std::string& name) const;
    TensorF& at(const std::string& name);
};

enum class Partition { FrontendW, LaaA, LmLM, HeadH };

Partition partition_of(const std::string& name);
const char* partition_tag(Partition p);  // "theta_W", "theta_A", "theta_LM", "theta_h"

// Combined hash of every array whose name starts with prefix.
std::uint64_t hash_prefix(const ParameterStore& ps, const std::string& prefix);
std::uint64_t hash_partition(const ParameterStore& ps, Partition p);

// Seeded deterministic initialization of every partition.
ParameterStore init_params(const ModelConfig& cfg);

// ------------------------------------------------------------- freeze sets

enum class Freeze { R, RAtt, RAttGru, RAttGruProj, All };

inline constexpr const char* kFreezeNames[] = {"R", "R+Att", "R+Att+GRU", "R+Att+GRU+Proj",
                                               "ALL"};

// Accepts the canonical names above plus the ablation-table row labels
// ("robert-encoder", "+ Attention", "+ BiGRU", "+ Projection",
// "All Parameters"). Unknown names raise a validation error listing the
// canonical five.
Freeze freeze_by_name(const std::string& name);
const char* freeze_name(Freeze f);

// Trainable names for fine-tuning under a freeze config. The task head is
// always included; the frozen frontend and the MLM head never are.
TrainableSet finetune_trainable(Freeze f, const ParameterStore& ps);

// Trainable names for pretraining: exactly the aggregation module.
TrainableSet pretrain_trainable(const ParameterStore& ps);

template <typename T>
std::map<std::string, Tensor<T>> cast_store(const ParameterStore& ps) {
    std::map<std::string, Tensor<T>> out;
    for (const auto& [name, tensor] : ps.arrays) out.emplace(name, tensor.template cast<T>());
    return out;
}

// ------------------------------------------------------------ graph builders

// Binds store arrays into a graph once per name.
template <typename T>
class Binder {
public:
    Binder(Graph<T>& g, const std::map<std::string, Tensor<T>>& store) : g_(g), store_(store) {}

    NodeId operator()(const std::string& name) {
        auto it = bound_.find(name);
        if (it != bound_.end()) return it->second;
        auto sit = store_.find(name);
        if (sit == store_.end()) throw ContractError("unknown parameter " + name);
        NodeId id = g_.param(name, sit->second);
        bound_.emplace(name, id);
        return id;
    }

private:
    Graph<T>& g_;
    const std::map<std::string, Tensor<T>>& store_;
    std::map<std::string, NodeId> bound_;
};

template <typename T>
struct LaaNodes {
    NodeId prefixes;   // 2 x d
    NodeId alpha_fwd;  // 1 x T_A, softmax weights of the forward direction
    NodeId alpha_bwd;  // 1 x T_A
};

// One GRU direction over x [T x d_A] -> [T x d]; row i always corresponds to
// input frame i (the reversed pass un-reverses its outputs).
template <typename T>
NodeId gru_direction(Graph<T>& g, Binder<T>& P, const std::string& prefix, NodeId x,
                     bool reversed, std::size_t d) {
    std::size_t t_len = g.value(x).rows();
    std::size_t d_in = g.value(x).cols();
    NodeId seq = x;
    if (reversed) {
        std::vector<std::size_t> rev(t_len);
        for (std::size_t i = 0; i < t_len; ++i) rev[i] = t_len - 1 - i;
        seq = g.gather_rows(x, rev);
    }
    NodeId wx_rz = P(prefix + ".wx_rz");
    NodeId wh_rz = P(prefix + ".wh_rz");
    NodeId b_rz = P(prefix + ".b_rz");
    NodeId wx_n = P(prefix + ".wx_n");
    NodeId wh_n = P(prefix + ".wh_n");
    NodeId b_n = P(prefix + ".b_n");
    if (g.value(wx_rz).rows() != d_in) {
        throw ShapeError("gru input width " + std::to_string(d_in) + " vs weight " +
                         shape_str(g.value(wx_rz).shape));
    }
    NodeId h = g.zeros({1, d});
    std::vector<NodeId> outs(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        NodeId xt = g.row_slice(seq, t, 1);
        NodeId rz = g.sigmoid(g.add_row_bias(
            g.add(g.matmul(xt, wx_rz), g.matmul(h, wh_rz)), b_rz));
        NodeId r = g.col_slice(rz, 0, d);
        NodeId z = g.col_slice(rz, d, d);
        NodeId n = g.tanh_op(g.add_row_bias(
            g.add(g.matmul(xt, wx_n), g.matmul(g.mul(r, h), wh_n)), b_n));
        // h' = (1 - z) * n + z * h
        h = g.add(g.sub(n, g.mul(z, n)), g.mul(z, h));
        outs[reversed ? t_len - 1 - t : t] = h;
    }
    return g.concat_rows(outs);
}

// Attentive pooling of one direction's sequence phi [T x d] into a single
// vector: per-frame scores -> softmax -> weighted sum. Returns (c, alpha).
template <typename T>
std::pair<NodeId, NodeId> attentive_pool(Graph<T>& g, Binder<T>& P, NodeId phi,
                                         const ModelConfig& cfg) {
    std::size_t t_len = g.value(phi).rows();
    NodeId u_pre = g.add_row_bias(g.matmul(phi, P("laa.att.w1")), P("laa.att.b1"));
    NodeId u = cfg.att_activation == "tanh" ? g.tanh_op(u_pre) : g.gelu(u_pre);
    NodeId scores = g.add_row_bias(g.matmul(u, P("laa.att.w2")), P("laa.att.b2"));
    NodeId alpha = g.softmax_rows(g.reshape(scores, {1, t_len}));
    NodeId c = g.matmul(alpha, phi);
    return {c, alpha};
}

// Frame sequence [T_A x d_A] -> two prefix vectors [2 x d]:
// LayerNorm -> projection (+ dropout when training) -> BiGRU -> per-direction
// attentive pooling.
template <typename T>
LaaNodes<T> laa_forward(Graph<T>& g, Binder<T>& P, NodeId frames, const ModelConfig& cfg,
                        bool training, Rng* rng) {
    const Tensor<T>& z = g.value(frames);
    if (z.rows() == 0) throw ContractError("empty frame sequence: aggregation needs T_A >= 1");
    if (z.cols() != cfg.d_A) {
        throw ShapeError("frame width " + std::to_string(z.cols()) + " vs configured d_A " +
                         std::to_string(cfg.d_A));
    }
    NodeId zhat = g.layer_norm_rows(frames, P("laa.ln.gamma"), P("laa.ln.beta"),
                                    static_cast<T>(cfg.ln_eps));
    NodeId x = g.add_row_bias(g.matmul(zhat, P("laa.proj.w")), P("laa.proj.b"));
    if (training && cfg.dropout_p > 0) x = g.dropout(x, cfg.dropout_p, *rng);
    NodeId phi_f = gru_direction(g, P, "laa.gru.fwd", x, false, cfg.d);
    NodeId phi_b = gru_direction(g, P, "laa.gru.bwd", x, true, cfg.d);
    auto [c1, a1] = attentive_pool(g, P, phi_f, cfg);
    auto [c2, a2] = attentive_pool(g, P, phi_b, cfg);
    return {g.concat_rows({c1, c2}), a1, a2};
}

// Token ids (starting with [CLS], ending with [SEP]) plus the prefix pair
// [2 x d] -> raw embedded sequence of length T_L + 4 with prefixes at slots
// 1-2 and absolute position embeddings added to every slot.
template <typename T>
NodeId assemble(Graph<T>& g, Binder<T>& P, const std::vector<int>& token_ids, NodeId prefixes,
                const ModelConfig& cfg) {
    std::size_t content = token_ids.size();  // text may carry trailing padding
    while (content > 0 && token_ids[content - 1] == kPadId) --content;
    if (content < 2 || token_ids.front() != kClsId || token_ids[content - 1] != kSepId) {
        throw ContractError(
            "token sequence must begin with [CLS] and end with [SEP] (before padding)");
    }
    const Tensor<T>& pv = g.value(prefixes);
    if (pv.rows() != 2 || pv.cols() != cfg.d) {
        throw ShapeError("prefix block must be [2x" + std::to_string(cfg.d) + "], got " +
                         shape_str(pv.shape));
    }
    std::size_t assembled_len = token_ids.size() + 2;
    if (assembled_len > cfg.max_positions) {
        throw ValidationError("assembled length " + std::to_string(assembled_len) +
                              " exceeds max_positions " + std::to_string(cfg.max_positions) +
                              "; refusing to truncate");
    }
    std::vector<std::size_t> ids(token_ids.size());
    for (std::size_t i = 0; i < token_ids.size(); ++i) {
        if (token_ids[i] < 0 || static_cast<std::size_t>(token_ids[i]) >= cfg.vocab_size) {
            throw ValidationError("token id " + std::to_string(token_ids[i]) +
                                  " outside vocabulary of " + std::to_string(cfg.vocab_size));
        }
        ids[i] = static_cast<std::size_t>(token_ids[i]);
    }
    NodeId tok = g.gather_rows(P("lm.embed.tok"), ids);
    NodeId seq = g.concat_rows(
        {g.row_slice(tok, 0, 1), prefixes, g.row_slice(tok, 1, token_ids.size() - 1)});
    NodeId pos = g.row_slice(P("lm.embed.pos"), 0, assembled_len);
    return g.add(seq, pos);
}

// Per-layer, per-head attention weights captured during encode (values only).
template <typename T>
using AttentionTrace = std::vector<std::vector<Tensor<T>>>;

// Post-LayerNorm transformer encoder over the assembled sequence. pad_mask
// (empty = no padding) removes padded columns from every attention softmax.
template <typename T>
NodeId encode(Graph<T>& g, Binder<T>& P, NodeId x, const ModelConfig& cfg, bool training,
              Rng* rng, std::vector<std::uint8_t> pad_mask = {},
              AttentionTrace<T>* trace = nullptr) {
    std::size_t len = g.value(x).rows();
    if (g.value(x).cols() != cfg.d) {
        throw ShapeError("encoder input width " + shape_str(g.value(x).shape) +
                         " vs configured d " + std::to_string(cfg.d));
    }
    if (!pad_mask.empty() && pad_mask.size() != len) {
        throw ShapeError("padding mask length " + std::to_string(pad_mask.size()) + " vs " +
                         std::to_string(len) + " positions");
    }
    T eps = static_cast<T>(cfg.ln_eps);

    NodeId h;
    if (cfg.prefix_after_embed_ln && len >= 3) {
        // Prefix rows bypass the embedding LayerNorm; token rows go through.
        NodeId ln = g.layer_norm_rows(x, P("lm.embed.ln_gamma"), P("lm.embed.ln_beta"), eps);
        h = g.concat_rows({g.row_slice(ln, 0, 1), g.row_slice(x, 1, 2),
                           g.row_slice(ln, 3, len - 3)});
    } else {
        h = g.layer_norm_rows(x, P("lm.embed.ln_gamma"), P("lm.embed.ln_beta"), eps);
    }
    if (training && cfg.dropout_p > 0) h = g.dropout(h, cfg.dropout_p, *rng);

    std::size_t dh = cfg.d / cfg.n_heads;
    T inv_sqrt_dh = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    if (trace) trace->assign(cfg.n_layers, {});

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        std::string base = "lm.encoder.L" + std::to_string(l);
        NodeId q = g.add_row_bias(g.matmul(h, P(base + ".attn.wq")), P(base + ".attn.bq"));
        NodeId k = g.add_row_bias(g.matmul(h, P(base + ".attn.wk")), P(base + ".attn.bk"));
        NodeId v = g.add_row_bias(g.matmul(h, P(base + ".attn.wv")), P(base + ".attn.bv"));
        std::vector<NodeId> heads(cfg.n_heads);
        for (std::size_t hd = 0; hd < cfg.n_heads; ++hd) {
            NodeId qh = g.col_slice(q, hd * dh, dh);
            NodeId kh = g.col_slice(k, hd * dh, dh);
            NodeId vh = g.col_slice(v, hd * dh, dh);
            NodeId scores = g.scale(g.matmul_nt(qh, kh), inv_sqrt_dh);
            NodeId probs = g.softmax_rows(scores, pad_mask);
            if (trace) (*trace)[l].push_back(g.value(probs));
            heads[hd] = g.matmul(probs, vh);
        }
        NodeId ctx = g.concat_cols(heads);
        NodeId attn_out = g.add_row_bias(g.matmul(ctx, P(base + ".attn.wo")),
                                         P(base + ".attn.bo"));
        if (training && cfg.dropout_p > 0) attn_out = g.dropout(attn_out, cfg.dropout_p, *rng);
        h = g.layer_norm_rows(g.add(h, attn_out), P(base + ".ln1.gamma"), P(base + ".ln1.beta"),
                              eps);
        NodeId ff = g.add_row_bias(
            g.matmul(g.gelu(g.add_row_bias(g.matmul(h, P(base + ".ff.w1")), P(base + ".ff.b1"))),
                     P(base + ".ff.w2")),
            P(base + ".ff.b2"));
        if (training && cfg.dropout_p > 0) ff = g.dropout(ff, cfg.dropout_p, *rng);
        h = g.layer_norm_rows(g.add(h, ff), P(base + ".ln2.gamma"), P(base + ".ln2.beta"), eps);
    }
    return h;
}

// Vocabulary logits for the given assembled positions, which must be textual
// slots: index >= 3 and < len - 1, never [CLS]/prefix/[SEP]/[PAD].
template <typename T>
NodeId mlm_logits(Graph<T>& g, Binder<T>& P, NodeId hidden,
                  const std::vector<std::size_t>& positions, const ModelConfig& cfg,
                  const std::vector<std::uint8_t>& pad_mask = {}) {
    std::size_t len = g.value(hidden).rows();
    for (std::size_t p : positions) {
        if (p < 3 || p + 1 >= len) {
            throw ContractError("masked position " + std::to_string(p) +
                                " is not a textual slot (need 3 <= p < " +
                                std::to_string(len) + " - 1)");
        }
        if (!pad_mask.empty() && !pad_mask[p]) {
            throw ContractError("masked position " + std::to_string(p) + " is padding");
        }
    }
    NodeId gathered = g.gather_rows(hidden, positions);
    if (cfg.tie_mlm) {
        return g.add_row_bias(g.matmul_nt(gathered, P("lm.embed.tok")), P("lm.mlm.b"));
    }
    return g.add_row_bias(g.matmul(gathered, P("lm.mlm.w")), P("lm.mlm.b"));
}

// Two-layer regression head over the [CLS] hidden state -> scalar [1x1].
template <typename T>
NodeId cls_regression(Graph<T>& g, Binder<T>& P, NodeId hidden, const ModelConfig& cfg,
                      bool training, Rng* rng) {
    NodeId c = g.row_slice(hidden, 0, 1);
    NodeId a = g.gelu(g.add_row_bias(g.matmul(c, P("head.w1")), P("head.b1")));
    if (training && cfg.dropout_p > 0) a = g.dropout(a, cfg.dropout_p, *rng);
    return g.add_row_bias(g.matmul(a, P("head.w2")), P("head.b2"));
}

// --------------------------------------------------------- whole-model pass

template <typename T>
struct ExampleGraph {
    Graph<T> g;
    std::map<std::string, Tensor<T>> store;
    std::optional<Binder<T>> binder;

    explicit ExampleGraph(const ParameterStore& ps) : store(cast_store<T>(ps)) {
        binder.emplace(g, store);
    }
    explicit ExampleGraph(std::map<std::string, Tensor<T>> s) : store(std::move(s)) {
        binder.emplace(g, store);
    }
};

// Builds prefixes for one example: the cached frozen frontend features go in
// as a constant; with ablate_prefixes the prefix block is a zero constant, so
// text-only behavior is reproduced without changing the rest of the pipeline.
template <typename T>
LaaNodes<T> example_prefixes(Graph<T>& g, Binder<T>& P, const TensorF& features,
                             const ModelConfig& cfg, bool training, Rng* rng) {
    if (cfg.ablate_prefixes) {
        return {g.input(Tensor<T>::zeros({2, cfg.d})), kNoNode, kNoNode};
    }
    NodeId frames = g.input(features.template cast<T>());
    return laa_forward(g, P, frames, cfg, training, rng);
}

// Masked-LM loss for one example from pre-masked inputs: mean cross entropy
// of the original ids at the masked assembled positions.
template <typename T>
NodeId mlm_example_loss(Graph<T>& g, Binder<T>& P, const TensorF& features,
                        const std::vector<int>& corrupted,
                        const std::vector<std::size_t>& positions,
                        const std::vector<std::size_t>& targets, const ModelConfig& cfg,
                        bool training, Rng* rng) {
    if (positions.empty()) throw ContractError("mlm loss needs at least one masked position");
    LaaNodes<T> laa = example_prefixes(g, P, features, cfg, training, rng);
    NodeId x = assemble(g, P, corrupted, laa.prefixes, cfg);
    NodeId h = encode(g, P, x, cfg, training, rng);
    NodeId logits = mlm_logits(g, P, h, positions, cfg);
    return g.cross_entropy_rows(logits, targets);
}

// Regression prediction for one example (scalar node).
template <typename T>
NodeId regression_prediction(Graph<T>& g, Binder<T>& P, const TensorF& features,
                             const std::vector<int>& tokens, const ModelConfig& cfg,
                             bool training, Rng* rng,
                             AttentionTrace<T>* trace = nullptr,
                             LaaNodes<T>* laa_out = nullptr) {
    LaaNodes<T> laa = example_prefixes(g, P, features, cfg, training, rng);
    if (laa_out) *laa_out = laa;
    NodeId x = assemble(g, P, tokens, laa.prefixes, cfg);
    NodeId h = encode(g, P, x, cfg, training, rng, {}, trace);
    return cls_regression(g, P, h, cfg, training, rng);
}

// Squared-error fine-tuning loss for one example.
template <typename T>
NodeId mse_example_loss(Graph<T>& g, Binder<T>& P, const TensorF& features,
                        const std::vector<int>& tokens, double label, const ModelConfig& cfg,
                        bool training, Rng* rng) {
    if (label < -3.0 || label > 3.0) {
        throw ContractError("label " + std::to_string(label) + " outside [-3, 3]");
    }
    NodeId pred = regression_prediction(g, P, features, tokens, cfg, training, rng);
    return g.squared_error(pred, static_cast<T>(label));
}

}  // namespace splm
