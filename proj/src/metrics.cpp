// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0

#include "splm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace splm {

namespace {

void require_aligned(const std::vector<double>& pred, const std::vector<double>& gold,
                     const char* what) {
    if (pred.size() != gold.size()) {
        throw ContractError(std::string(what) + ": " + std::to_string(pred.size()) +
                            " predictions vs " + std::to_string(gold.size()) + " labels");
    }
    if (pred.empty()) {
        throw ContractError(std::string(what) + ": empty input");
    }
}

}  // namespace

double mae(const std::vector<double>& pred, const std::vector<double>& gold) {
    require_aligned(pred, gold, "mae");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += std::fabs(pred[i] - gold[i]);
    return sum / static_cast<double>(pred.size());
}

double pearson(const std::vector<double>& pred, const std::vector<double>& gold) {
    require_aligned(pred, gold, "pearson");
    if (pred.size() < 2) throw ContractError("pearson: need at least 2 points");
    double n = static_cast<double>(pred.size());
    double mp = 0, mg = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        mp += pred[i];
        mg += gold[i];
    }
    mp /= n;
    mg /= n;
    double spp = 0, sgg = 0, spg = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double dp = pred[i] - mp, dg = gold[i] - mg;
        spp += dp * dp;
        sgg += dg * dg;
        spg += dp * dg;
    }
    if (spp == 0.0 || sgg == 0.0) {
        throw ValidationError("undefined correlation: constant input has zero variance");
    }
    return spg / std::sqrt(spp * sgg);
}

BinaryScores binary_scores(const std::vector<double>& pred, const std::vector<double>& gold) {
    require_aligned(pred, gold, "binary_scores");
    std::size_t correct = 0, n = 0;
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (gold[i] == 0.0) continue;
        ++n;
        bool gold_pos = gold[i] > 0;
        bool pred_pos = pred[i] > 0;
        if (gold_pos == pred_pos) ++correct;
        if (pred_pos && gold_pos) ++tp;
        if (pred_pos && !gold_pos) ++fp;
        if (!pred_pos && gold_pos) ++fn;
    }
    if (n == 0) {
        throw ValidationError("no evaluable examples: every gold label is exactly 0");
    }
    BinaryScores out;
    out.n_nonzero = n;
    out.acc2 = static_cast<double>(correct) / static_cast<double>(n);
    // Positive-class F1; an empty positive class on both sides scores 0.
    double denom = static_cast<double>(2 * tp + fp + fn);
    out.f1 = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
    return out;
}

int sentiment_class(double v) {
    double r = v >= 0 ? std::floor(v + 0.5) : std::ceil(v - 0.5);
    return static_cast<int>(std::clamp(r, -3.0, 3.0));
}

double acc7(const std::vector<double>& pred, const std::vector<double>& gold) {
    require_aligned(pred, gold, "acc7");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (sentiment_class(pred[i]) == sentiment_class(gold[i])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

EvalReport evaluate(const std::vector<double>& pred, const std::vector<double>& gold) {
    require_aligned(pred, gold, "evaluate");
    EvalReport r;
    r.n_total = pred.size();
    r.mae = mae(pred, gold);
    try {
        r.corr = pearson(pred, gold);
    } catch (const Error&) {
        r.corr.reset();
    }
    BinaryScores b = binary_scores(pred, gold);
    r.acc2 = b.acc2;
    r.f1 = b.f1;
    r.n_nonzero = b.n_nonzero;
    r.acc7 = acc7(pred, gold);
    return r;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["mae"] = mae;
    if (corr.has_value()) {
        j["corr"] = *corr;
    } else {
        j["corr"] = nullptr;
    }
    j["acc2"] = acc2;
    j["f1"] = f1;
    j["acc7"] = acc7;
    j["n_total"] = n_total;
    j["n_nonzero"] = n_nonzero;
    return j.dump(2);
}

}  // namespace splm
