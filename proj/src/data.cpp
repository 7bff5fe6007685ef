// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0

#include "splm/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "json.hpp"

namespace splm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve_relative(const fs::path& base_dir, const std::string& p) {
    fs::path path(p);
    if (path.is_absolute() || base_dir.empty()) return p;
    return (base_dir / path).string();
}

const char* kSpecialWords[kNumSpecialIds] = {"[PAD]", "[CLS]", "[SEP]", "[MASK]", "<unk>"};

}  // namespace

std::vector<Example> load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read manifest " + path);
    fs::path base_dir = fs::path(path).parent_path();

    std::vector<Example> out;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError(path + " line " + std::to_string(line_no) +
                                  ": malformed JSON: " + e.what());
        }
        Example ex;
        try {
            ex.id = obj.at("id").get<std::string>();
            ex.audio = obj.at("audio").get<std::string>();
            ex.text = obj.at("text").get<std::string>();
            ex.label = obj.at("label").get<double>();
            ex.split = obj.at("split").get<std::string>();
        } catch (const json::exception& e) {
            throw ValidationError(path + " line " + std::to_string(line_no) +
                                  ": missing or mistyped field: " + e.what());
        }
        if (ex.label < -3.0 || ex.label > 3.0) {
            throw ValidationError(path + " line " + std::to_string(line_no) + ": label " +
                                  std::to_string(ex.label) + " outside [-3, 3]");
        }
        if (ex.split != "train" && ex.split != "valid" && ex.split != "test") {
            throw ValidationError(path + " line " + std::to_string(line_no) + ": split '" +
                                  ex.split + "' is not train/valid/test");
        }
        if (!seen_ids.insert(ex.id).second) {
            throw ValidationError(path + " line " + std::to_string(line_no) + ": duplicate id '" +
                                  ex.id + "'");
        }
        ex.audio = resolve_relative(base_dir, ex.audio);
        if (!fs::exists(ex.audio)) {
            throw IoError(path + " line " + std::to_string(line_no) + ": audio file not found: " +
                          ex.audio);
        }
        out.push_back(std::move(ex));
    }
    if (out.empty()) {
        std::cerr << "warning: manifest " << path << " is empty\n";
    }
    return out;
}

void save_manifest(const std::string& path, const std::vector<Example>& examples) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write manifest " + path);
    for (const Example& ex : examples) {
        json obj;
        obj["id"] = ex.id;
        obj["audio"] = ex.audio;
        obj["text"] = ex.text;
        obj["label"] = ex.label;
        obj["split"] = ex.split;
        os << obj.dump() << "\n";
    }
    if (!os) throw IoError("failed writing manifest " + path);
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Vocab Vocab::build(const std::vector<std::string>& corpus) {
    if (corpus.empty()) throw ValidationError("cannot build vocabulary from an empty corpus");
    std::map<std::string, std::size_t> freq;
    for (const std::string& text : corpus) {
        for (const std::string& w : split_words(text)) ++freq[w];
    }
    if (freq.empty()) throw ValidationError("cannot build vocabulary from an empty corpus");

    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    std::vector<std::string> words;
    words.reserve(kNumSpecialIds + ranked.size());
    for (const char* s : kSpecialWords) words.emplace_back(s);
    for (auto& [w, c] : ranked) words.push_back(w);
    return from_list(words);
}

Vocab Vocab::from_list(const std::vector<std::string>& words) {
    if (words.size() < kNumSpecialIds) {
        throw ValidationError("vocabulary list is missing the reserved special tokens");
    }
    for (int i = 0; i < kNumSpecialIds; ++i) {
        if (words[i] != kSpecialWords[i]) {
            throw ValidationError("vocabulary id " + std::to_string(i) + " must be " +
                                  kSpecialWords[i] + ", got " + words[i]);
        }
    }
    Vocab v;
    v.words_ = words;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (!v.index_.emplace(words[i], static_cast<int>(i)).second) {
            throw ValidationError("duplicate word '" + words[i] + "' in vocabulary list");
        }
    }
    return v;
}

int Vocab::id_of(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocab::word_of(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
        throw ValidationError("token id " + std::to_string(id) + " outside vocabulary of " +
                              std::to_string(words_.size()));
    }
    return words_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(const std::string& text) const {
    std::vector<int> out;
    for (const std::string& w : split_words(text)) out.push_back(id_of(w));
    return out;
}

std::vector<int> Vocab::encode_with_specials(const std::string& text) const {
    std::vector<int> out{kClsId};
    for (const std::string& w : split_words(text)) out.push_back(id_of(w));
    out.push_back(kSepId);
    return out;
}

std::vector<Example> synth_dataset(const SynthSpec& spec, const std::string& out_dir) {
    if (spec.conflict_fraction < 0.0 || spec.conflict_fraction > 1.0) {
        throw ValidationError("conflict_fraction " + std::to_string(spec.conflict_fraction) +
                              " outside [0, 1]");
    }
    if (spec.pos_words.empty() || spec.neg_words.empty()) {
        throw ValidationError("synth spec needs non-empty keyword sets");
    }
    static const std::vector<std::string> kFillers = {
        "the",  "a",     "clip",    "sounds", "today",   "it",  "was",
        "very", "quite", "really",  "this",   "session", "had", "some",
        "tone", "again", "morning", "during", "review",  "note"};

    fs::create_directories(fs::path(out_dir) / "wav");
    std::vector<Example> examples;
    examples.reserve(spec.n);
    std::size_t n_samples = static_cast<std::size_t>(spec.duration_s * kSampleRate);

    for (std::size_t i = 0; i < spec.n; ++i) {
        Rng rng = derive_rng(spec.seed, "synth", i, 0);
        bool tone_pos = rng.bernoulli(0.5);
        bool conflict = rng.bernoulli(spec.conflict_fraction);
        bool keyword_pos = conflict ? rng.bernoulli(0.5) : tone_pos;
        double label = (conflict ? 0.5 : 2.0) * (tone_pos ? 1.0 : -1.0);

        const auto& kw_set = keyword_pos ? spec.pos_words : spec.neg_words;
        const std::string& keyword = kw_set[rng.below(kw_set.size())];
        std::size_t n_fill = 4 + rng.below(4);
        std::size_t kw_pos = rng.below(n_fill + 1);
        std::string text;
        for (std::size_t w = 0; w <= n_fill; ++w) {
            if (!text.empty()) text += ' ';
            text += (w == kw_pos) ? keyword : kFillers[rng.below(kFillers.size())];
        }

        double freq = tone_pos ? spec.f_pos : spec.f_neg;
        std::vector<float> samples(n_samples);
        for (std::size_t t = 0; t < n_samples; ++t) {
            double v = 0.6 * std::sin(2.0 * 3.14159265358979323846 * freq *
                                      static_cast<double>(t) / kSampleRate) +
                       spec.noise_sigma * rng.normal();
            samples[t] = static_cast<float>(v);
        }

        char id_buf[32];
        std::snprintf(id_buf, sizeof(id_buf), "synth-%06zu", i);
        std::string rel_audio = std::string("wav/") + id_buf + ".wav";
        write_wav((fs::path(out_dir) / rel_audio).string(), samples);

        Example ex;
        ex.id = id_buf;
        ex.audio = rel_audio;
        ex.text = text;
        ex.label = label;
        ex.split = i < spec.n * 8 / 10 ? "train" : (i < spec.n * 9 / 10 ? "valid" : "test");
        examples.push_back(std::move(ex));
    }

    std::string manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
    save_manifest(manifest_path, examples);
    std::ofstream splits(fs::path(out_dir) / "splits.csv");
    splits << "id,split\n";
    for (const Example& ex : examples) splits << ex.id << "," << ex.split << "\n";

    return load_manifest(manifest_path);
}

}  // namespace splm
