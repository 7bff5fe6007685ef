// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0
//
// Sentiment evaluation: MAE, Pearson correlation, binary accuracy/F1 over
// non-zero gold labels, and 7-class accuracy.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splm/common.hpp"

namespace splm {

struct EvalReport {
    double mae = 0.0;
    std::optional<double> corr;  // unset when correlation is undefined
    double acc2 = 0.0;
    double f1 = 0.0;
    double acc7 = 0.0;
    std::size_t n_total = 0;
    std::size_t n_nonzero = 0;

    std::string to_json() const;
};

double mae(const std::vector<double>& pred, const std::vector<double>& gold);

// Sample Pearson r; throws ValidationError("undefined correlation...") when
// either input is constant (callers report null, never 0).
double pearson(const std::vector<double>& pred, const std::vector<double>& gold);

// Drops examples with gold exactly 0, classifies by sign, and returns binary
// accuracy plus positive-class F1. Throws when nothing is evaluable.
struct BinaryScores {
    double acc2 = 0.0;
    double f1 = 0.0;
    std::size_t n_nonzero = 0;
};
BinaryScores binary_scores(const std::vector<double>& pred, const std::vector<double>& gold);

// Seven-class accuracy: round half away from zero, clamp to [-3, 3].
double acc7(const std::vector<double>& pred, const std::vector<double>& gold);
int sentiment_class(double v);

// Full report over aligned prediction/gold lists.
EvalReport evaluate(const std::vector<double>& pred, const std::vector<double>& gold);

}  // namespace splm
