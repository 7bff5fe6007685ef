// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset plumbing: JSONL manifests, the toy whitespace tokenizer with a
// corpus-built vocabulary, and a synthetic audio+text corpus whose labels
// are constructed so that no single modality can reach full accuracy.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "splm/audio.hpp"

namespace splm {

// Reserved token ids, fixed for every vocabulary.
inline constexpr int kPadId = 0;
inline constexpr int kClsId = 1;
inline constexpr int kSepId = 2;
inline constexpr int kMaskId = 3;
inline constexpr int kUnkId = 4;
inline constexpr int kNumSpecialIds = 5;

struct Example {
    std::string id;
    std::string audio;  // path, resolved relative to the manifest
    std::string text;
    double label = 0.0;  // sentiment intensity in [-3, 3]
    std::string split;   // train | valid | test
};

// JSONL, one object per line: {id, audio, text, label, split}.
std::vector<Example> load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<Example>& examples);

class Vocab {
public:
    Vocab() = default;

    // Deterministic construction: frequency descending, ties lexicographic,
    // ids 0..4 reserved for the special tokens. Throws on an empty corpus.
    static Vocab build(const std::vector<std::string>& corpus);

    // Lowercased whitespace split; unseen words map to <unk>.
    std::vector<int> encode(const std::string& text) const;

    // Token ids ready for assembly: [CLS], words..., [SEP].
    std::vector<int> encode_with_specials(const std::string& text) const;

    int id_of(const std::string& word) const;  // kUnkId when absent
    const std::string& word_of(int id) const;
    std::size_t size() const { return words_.size(); }

    // Serialization embedded into checkpoint configs.
    std::vector<std::string> to_list() const { return words_; }
    static Vocab from_list(const std::vector<std::string>& words);

private:
    std::vector<std::string> words_;
    std::map<std::string, int> index_;
};

std::vector<std::string> split_words(const std::string& text);

struct SynthSpec {
    std::size_t n = 2000;
    std::uint64_t seed = 0;
    double conflict_fraction = 0.5;
    double f_pos = 440.0;  // Hz, tone used for positive acoustic evidence
    double f_neg = 220.0;
    double noise_sigma = 0.05;
    double duration_s = 1.0;
    std::vector<std::string> pos_words = {"good", "great", "happy", "excellent", "pleasant"};
    std::vector<std::string> neg_words = {"bad", "awful", "sad", "terrible", "unpleasant"};
};

// Generates WAV files under out_dir plus a manifest.jsonl, splits.csv, and
// returns the examples. Construction: every example carries one sentiment
// keyword and one tone. For (1 - conflict_fraction) of examples keyword and
// tone agree and the label is +-2.0; for the rest the keyword is drawn
// independently of the tone and the label follows the tone at +-0.5. A
// text-only predictor therefore tops out at 1 - conflict_fraction/2 binary
// accuracy while both modalities together determine every label sign.
std::vector<Example> synth_dataset(const SynthSpec& spec, const std::string& out_dir);

}  // namespace splm
