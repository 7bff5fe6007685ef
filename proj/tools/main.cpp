// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Verbs:
//   pretrain          masked-LM pretraining of the aggregator
//   finetune          selective-freeze sentiment fine-tuning from a checkpoint
//   evaluate          EvalReport JSON on one split (model or predictions file)
//   export-attention  aggregator + encoder attention maps as labelled CSV
//   param-count       per-partition parameter audit, optional comparator
//   synth-data        deterministic synthetic audio+text corpus
//
// Exit codes: 0 success, 1 validation/contract error, 2 runtime failure
// (I/O, corrupt artifacts, non-finite loss).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "CLI11.hpp"
#include "splm/config.hpp"
#include "splm/count_params.hpp"
#include "splm/train.hpp"

namespace fs = std::filesystem;
using namespace splm;

namespace {

// seed=0 in a sub-config means "follow the run seed"; resolved here so the
// written config shows the effective values.
void resolve_seeds(RunConfig& rc) {
    if (rc.model.init_seed == 0) rc.model.init_seed = rc.seed;
    if (rc.train.seed == 0) rc.train.seed = rc.seed;
}

void write_resolved_config(const RunConfig& rc, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream f(fs::path(out_dir) / "resolved_config.json");
    if (!f) throw IoError("cannot write " + out_dir + "/resolved_config.json");
    f << run_config_json(rc) << "\n";
}

std::vector<Example> load_split(const std::vector<Example>& all, const std::string& split) {
    std::vector<Example> out;
    for (const Example& ex : all) {
        if (ex.split == split) out.push_back(ex);
    }
    return out;
}

std::vector<Example> require_split(const std::vector<Example>& all, const std::string& split) {
    std::vector<Example> out = load_split(all, split);
    if (out.empty()) {
        throw ValidationError("split '" + split + "' is absent from the manifest");
    }
    return out;
}

std::vector<Example> load_examples(const RunConfig& rc) {
    if (rc.manifest.empty()) {
        throw ValidationError("no dataset configured; set data.manifest");
    }
    return load_manifest(rc.manifest);
}

// Checkpoint architecture wins; per-run knobs that do not touch stored
// arrays are taken from the requested config.
ModelConfig adopt_runtime_knobs(const ModelConfig& ckpt, const ModelConfig& requested) {
    ModelConfig m = ckpt;
    m.dropout_p = requested.dropout_p;
    m.ablate_prefixes = requested.ablate_prefixes;
    return m;
}

void write_matrix_csv(const fs::path& path, const TensorF& m,
                      const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels,
                      const std::vector<std::size_t>& keep_rows,
                      const std::vector<std::size_t>& keep_cols) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    for (std::size_t c : keep_cols) f << "," << col_labels[c];
    f << "\n";
    char buf[32];
    for (std::size_t r : keep_rows) {
        f << row_labels[r];
        for (std::size_t c : keep_cols) {
            std::snprintf(buf, sizeof(buf), ",%.8g", static_cast<double>(m.at(r, c)));
            f << buf;
        }
        f << "\n";
    }
}

int cmd_pretrain(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& out_dir, const std::string& init_dir,
                 long long checkpoint_every) {
    RunConfig rc = resolve_config(config_path, overrides);
    resolve_seeds(rc);
    if (checkpoint_every >= 0) {
        rc.train.checkpoint_every = static_cast<std::size_t>(checkpoint_every);
    }
    write_resolved_config(rc, out_dir);
    std::vector<Example> train_split = require_split(load_examples(rc), "train");

    ModelConfig model;
    ParameterStore params;
    Vocab vocab;
    AdamState opt;
    std::size_t start = 0;
    if (!init_dir.empty()) {
        Checkpoint ck = load_checkpoint(init_dir);
        require_compatible(ck.model, rc.model);
        model = adopt_runtime_knobs(ck.model, rc.model);
        vocab = Vocab::from_list(ck.vocab);
        params = std::move(ck.params);
        opt = std::move(ck.opt);
        start = ck.next_step;
    } else {
        std::vector<std::string> corpus;
        for (const Example& ex : train_split) corpus.push_back(ex.text);
        vocab = Vocab::build(corpus);
        model = rc.model;
        if (model.vocab_size == 0) model.vocab_size = vocab.size();
        params = init_params(model);
    }

    Trainer trainer(model, rc.train, rc.mask, std::move(params), std::move(vocab), start,
                    std::move(opt));
    PretrainResult res = trainer.pretrain(train_split, out_dir);
    std::printf("pretrained to step %zu (%zu updates, %zu skipped); outputs in %s\n",
                trainer.step(), res.losses.size(), res.skipped_steps, out_dir.c_str());
    return 0;
}

int cmd_finetune(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& out_dir, const std::string& init_dir,
                 const std::string& freeze_flag) {
    RunConfig rc = resolve_config(config_path, overrides);
    resolve_seeds(rc);
    if (!freeze_flag.empty()) rc.freeze = freeze_flag;
    Freeze freeze = freeze_by_name(rc.freeze);
    rc.freeze = freeze_name(freeze);  // canonical spelling in the resolved config
    write_resolved_config(rc, out_dir);

    std::vector<Example> all = load_examples(rc);
    std::vector<Example> train_split = require_split(all, "train");
    std::vector<Example> valid_split = load_split(all, "valid");

    Checkpoint ck = load_checkpoint(init_dir);
    require_compatible(ck.model, rc.model);
    ModelConfig model = adopt_runtime_knobs(ck.model, rc.model);
    // Fresh optimizer: fine-tuning is a new objective over a different
    // trainable set, so pretraining moments do not carry over.
    Trainer trainer(model, rc.train, rc.mask, std::move(ck.params),
                    Vocab::from_list(ck.vocab), 0, AdamState{});
    FinetuneResult res = trainer.finetune(train_split, valid_split, freeze, out_dir);
    if (res.best_epoch > 0) {
        std::cout << res.best_valid.to_json() << "\n";
    }
    std::fprintf(stderr, "fine-tuned %zu steps (best epoch %zu); outputs in %s\n",
                 res.losses.size(), res.best_epoch, out_dir.c_str());
    return 0;
}

int cmd_evaluate(const std::string& model_dir, const std::string& manifest_path,
                 const std::string& split, const std::string& predictions_path) {
    std::vector<Example> examples = require_split(load_manifest(manifest_path), split);

    EvalReport report;
    if (!predictions_path.empty()) {
        std::ifstream pf(predictions_path);
        if (!pf) throw IoError("cannot read predictions file " + predictions_path);
        std::vector<double> preds;
        double v = 0;
        while (pf >> v) preds.push_back(v);
        if (preds.size() != examples.size()) {
            throw ValidationError("predictions file has " + std::to_string(preds.size()) +
                                  " values for a split of " + std::to_string(examples.size()));
        }
        std::vector<double> gold;
        for (const Example& ex : examples) gold.push_back(ex.label);
        report = evaluate(preds, gold);
    } else {
        if (model_dir.empty()) {
            throw ValidationError("evaluate needs --model or --predictions");
        }
        Checkpoint ck = load_checkpoint(model_dir);
        Trainer trainer(ck.model, TrainConfig{}, MaskingPolicy{}, std::move(ck.params),
                        Vocab::from_list(ck.vocab), ck.next_step, std::move(ck.opt));
        report = trainer.evaluate_split(examples);
    }
    std::cout << report.to_json() << "\n";
    return 0;
}

int cmd_export_attention(const std::string& model_dir, const std::string& manifest_path,
                         const std::string& example_id, const std::string& out_dir,
                         bool drop_specials) {
    Checkpoint ck = load_checkpoint(model_dir);
    std::vector<Example> all = load_manifest(manifest_path);
    const Example* found = nullptr;
    for (const Example& ex : all) {
        if (ex.id == example_id) {
            found = &ex;
            break;
        }
    }
    if (found == nullptr) {
        throw ValidationError("unknown example id '" + example_id + "'");
    }

    Vocab vocab = Vocab::from_list(ck.vocab);
    AttentionExport exp = export_attention(ck.params, ck.model, vocab, *found);
    fs::create_directories(out_dir);
    {
        std::ofstream f(fs::path(out_dir) / "resolved_config.json");
        f << model_config_json(ck.model) << "\n";
    }

    {
        std::ofstream f(fs::path(out_dir) / "laa_alpha.csv");
        if (!f) throw IoError("cannot write " + out_dir + "/laa_alpha.csv");
        char buf[32];
        auto write_dir = [&f, &buf](const char* name, const TensorF& alpha) {
            f << name;
            for (std::size_t i = 0; i < alpha.numel(); ++i) {
                std::snprintf(buf, sizeof(buf), ",%.8g", static_cast<double>(alpha[i]));
                f << buf;
            }
            f << "\n";
        };
        write_dir("forward", exp.alpha_fwd);
        write_dir("backward", exp.alpha_bwd);
    }

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < exp.labels.size(); ++i) {
        if (drop_specials && (exp.labels[i] == "[CLS]" || exp.labels[i] == "[SEP]")) continue;
        keep.push_back(i);
    }
    for (std::size_t l = 0; l < exp.layers.size(); ++l) {
        for (std::size_t h = 0; h < exp.layers[l].size(); ++h) {
            char name[64];
            std::snprintf(name, sizeof(name), "encoder_attn_L%zu_H%zu.csv", l + 1, h + 1);
            write_matrix_csv(fs::path(out_dir) / name, exp.layers[l][h], exp.labels,
                             exp.labels, keep, keep);
        }
    }
    std::printf("wrote laa_alpha.csv and %zu attention matrices to %s\n",
                exp.layers.size() * (exp.layers.empty() ? 0 : exp.layers[0].size()),
                out_dir.c_str());
    return 0;
}

int cmd_param_count(const std::string& config_path, const std::vector<std::string>& overrides,
                    bool compare) {
    RunConfig rc = resolve_config(config_path, overrides);
    if (rc.model.vocab_size == 0) {
        throw ValidationError(
            "param-count needs a concrete vocabulary; use profile=base or set "
            "model.vocab_size");
    }
    std::cout << param_report(rc.model, compare);
    return 0;
}

int cmd_synth_data(const std::string& out_dir, std::size_t n, std::uint64_t seed,
                   double conflict_fraction) {
    SynthSpec spec;
    spec.n = n;
    spec.seed = seed;
    spec.conflict_fraction = conflict_fraction;
    std::vector<Example> examples = synth_dataset(spec, out_dir);
    std::printf("wrote %zu examples to %s\n", examples.size(), out_dir.c_str());
    return 0;
}

int run_guarded(const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IntegrityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NonFiniteError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"speech-prefixed language model: training, evaluation, and audit tools"};
    app.require_subcommand(1);

    std::string config_path, out_dir, init_dir, model_dir, manifest_path;
    std::string split = "test", example_id, freeze_flag, predictions_path;
    std::vector<std::string> overrides;
    long long checkpoint_every = -1;
    bool compare = false, drop_specials = false;
    std::size_t synth_n = 2000;
    std::uint64_t synth_seed = 0;
    double synth_conflict = 0.5;

    CLI::App* pre = app.add_subcommand("pretrain", "masked-LM pretraining of the aggregator");
    pre->add_option("--config", config_path, "JSON run config");
    pre->add_option("--out", out_dir, "output directory")->required();
    pre->add_option("--init", init_dir, "checkpoint to resume from");
    pre->add_option("--checkpoint-every", checkpoint_every, "checkpoint cadence in steps");
    pre->add_option("overrides", overrides, "dotted-key overrides (train.lr_pretrain=1e-3)");

    CLI::App* fin = app.add_subcommand("finetune", "selective-freeze sentiment fine-tuning");
    fin->add_option("--config", config_path, "JSON run config");
    fin->add_option("--out", out_dir, "output directory")->required();
    fin->add_option("--init", init_dir, "starting checkpoint (required; no silent random init)")
        ->required();
    fin->add_option("--freeze", freeze_flag, "freeze configuration name");
    fin->add_option("overrides", overrides, "dotted-key overrides");

    CLI::App* ev = app.add_subcommand("evaluate", "EvalReport JSON for one split");
    ev->add_option("--model", model_dir, "checkpoint directory");
    ev->add_option("--manifest", manifest_path, "dataset manifest")->required();
    ev->add_option("--split", split, "split name (default test)");
    ev->add_option("--predictions", predictions_path,
                   "score file (one prediction per line) instead of a model");

    CLI::App* ex = app.add_subcommand("export-attention", "attention maps as labelled CSV");
    ex->add_option("--model", model_dir, "checkpoint directory")->required();
    ex->add_option("--manifest", manifest_path, "dataset manifest")->required();
    ex->add_option("--example-id", example_id, "example to visualize")->required();
    ex->add_option("--out", out_dir, "output directory")->required();
    ex->add_flag("--drop-specials", drop_specials, "omit [CLS]/[SEP] rows and columns");

    CLI::App* pc = app.add_subcommand("param-count", "per-partition parameter audit");
    pc->add_option("--config", config_path, "JSON run config");
    pc->add_flag("--compare", compare, "also print the two-tower comparator");
    pc->add_option("overrides", overrides, "dotted-key overrides (profile=base)");

    CLI::App* sy = app.add_subcommand("synth-data", "deterministic synthetic corpus");
    sy->add_option("--out", out_dir, "output directory")->required();
    sy->add_option("--n", synth_n, "number of examples");
    sy->add_option("--seed", synth_seed, "generator seed");
    sy->add_option("--conflict-fraction", synth_conflict,
                   "fraction with keyword independent of tone");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (pre->parsed()) {
        return run_guarded([&] {
            return cmd_pretrain(config_path, overrides, out_dir, init_dir, checkpoint_every);
        });
    }
    if (fin->parsed()) {
        return run_guarded([&] {
            return cmd_finetune(config_path, overrides, out_dir, init_dir, freeze_flag);
        });
    }
    if (ev->parsed()) {
        return run_guarded([&] {
            return cmd_evaluate(model_dir, manifest_path, split, predictions_path);
        });
    }
    if (ex->parsed()) {
        return run_guarded([&] {
            return cmd_export_attention(model_dir, manifest_path, example_id, out_dir,
                                        drop_specials);
        });
    }
    if (pc->parsed()) {
        return run_guarded([&] { return cmd_param_count(config_path, overrides, compare); });
    }
    if (sy->parsed()) {
        return run_guarded(
            [&] { return cmd_synth_data(out_dir, synth_n, synth_seed, synth_conflict); });
    }
    return 1;  // unreachable: require_subcommand(1)
}
