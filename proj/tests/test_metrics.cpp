// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "json.hpp"
#include "splm/metrics.hpp"

using namespace splm;

TEST_CASE("mean absolute error") {
    CHECK(mae({1, 2}, {1, 1}) == doctest::Approx(0.5));
    CHECK(mae({1.5, -2.25, 0}, {1.5, -2.25, 0}) == 0.0);
    CHECK(mae({-3}, {3}) == doctest::Approx(6.0));
    CHECK_THROWS_AS(mae({1}, {1, 2}), ContractError);
    CHECK_THROWS_AS(mae({}, {}), ContractError);
}

TEST_CASE("pearson correlation") {
    CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
    CHECK(pearson({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(pearson({1, 2, 3, 4}, {1.1, 1.9, 3.2, 3.8}) == doctest::Approx(1.0).epsilon(0.01));
    CHECK_THROWS_WITH_AS(pearson({1, 1, 1}, {1, 2, 3}), doctest::Contains("undefined"),
                         ValidationError);
    CHECK_THROWS_AS(pearson({1, 2, 3}, {5, 5, 5}), ValidationError);
    CHECK_THROWS_AS(pearson({1}, {1}), ContractError);  // need at least two points
}

TEST_CASE("binary scores drop zero gold and score sign agreement") {
    BinaryScores s = binary_scores({-0.4, 9.0, 0.3}, {-1.2, 0.0, 2.0});
    CHECK(s.acc2 == doctest::Approx(1.0));
    CHECK(s.n_nonzero == 2);

    // All predictions positive, gold half positive: recall 1, precision 0.5.
    s = binary_scores({1, 1, 1, 1}, {2, 2, -2, -2});
    CHECK(s.acc2 == doctest::Approx(0.5));
    CHECK(s.f1 == doctest::Approx(2.0 / 3.0));

    s = binary_scores({1, -1, 1}, {-2, 2, -2});
    CHECK(s.acc2 == 0.0);
    CHECK(s.f1 == 0.0);

    CHECK_THROWS_WITH_AS(binary_scores({1, 2}, {0, 0}), doctest::Contains("no evaluable"),
                         ValidationError);
}

TEST_CASE("seven-class mapping rounds half away from zero and clamps") {
    CHECK(sentiment_class(2.7) == 3);
    CHECK(sentiment_class(2.5) == 3);
    CHECK(sentiment_class(-2.5) == -3);
    CHECK(sentiment_class(0.49) == 0);
    CHECK(sentiment_class(-0.5) == -1);
    CHECK(sentiment_class(-5.0) == -3);
    CHECK(sentiment_class(97.0) == 3);
    CHECK(sentiment_class(0.0) == 0);

    CHECK(acc7({2.7, -5.0}, {3.0, -3.0}) == doctest::Approx(1.0));
    CHECK(acc7({1.0, 2.0, -1.0}, {1.0, 2.0, -1.0}) == doctest::Approx(1.0));
    CHECK(acc7({0.4}, {1.0}) == 0.0);
    CHECK_THROWS_AS(acc7({}, {}), ContractError);
}

TEST_CASE("classification metrics are invariant to positive rescaling") {
    std::vector<double> pred = {0.2, -1.7, 2.4, -0.1, 0.9};
    std::vector<double> gold = {1.0, -2.0, 2.0, -1.0, 0.5};
    BinaryScores a = binary_scores(pred, gold);
    std::vector<double> scaled = pred;
    for (double& p : scaled) p *= 37.5;
    BinaryScores b = binary_scores(scaled, gold);
    CHECK(a.acc2 == b.acc2);
    CHECK(a.f1 == b.f1);
    CHECK(mae(scaled, gold) != mae(pred, gold));
}

TEST_CASE("full report aggregates and accounts every example") {
    std::vector<double> pred = {1.1, -0.6, 0.2, 2.6};
    std::vector<double> gold = {1.0, -1.0, 0.0, 3.0};
    EvalReport r = evaluate(pred, gold);
    CHECK(r.n_total == 4);
    CHECK(r.n_nonzero == 3);
    CHECK(r.n_nonzero + 1 == r.n_total);  // one zero-gold example dropped
    CHECK(r.acc2 == doctest::Approx(1.0));
    CHECK(r.mae == doctest::Approx((0.1 + 0.4 + 0.2 + 0.4) / 4));
    REQUIRE(r.corr.has_value());
    CHECK(*r.corr > 0.9);
}

TEST_CASE("acc7 inside the report uses the shared class mapping") {
    // classes: pred {1, -1, 0, 3} vs gold {1, -1, 0, 3} -> all correct.
    EvalReport r = evaluate({1.1, -0.6, 0.2, 2.6}, {1.0, -1.0, 0.0, 3.0});
    CHECK(r.acc7 == doctest::Approx(1.0));
}

TEST_CASE("constant predictions serialize correlation as null, never zero") {
    EvalReport r = evaluate({1.0, 1.0, 1.0}, {2.0, -1.0, 0.5});
    CHECK_FALSE(r.corr.has_value());
    nlohmann::json j = nlohmann::json::parse(r.to_json());
    CHECK(j["corr"].is_null());
    CHECK(j["n_total"] == 3);
    CHECK(j.contains("mae"));
    CHECK(j.contains("acc2"));
    CHECK(j.contains("f1"));
    CHECK(j.contains("acc7"));
    CHECK(j.contains("n_nonzero"));
}

TEST_CASE("report serialization is stable across calls") {
    EvalReport r = evaluate({0.5, -1.5, 2.5}, {1.0, -2.0, 2.0});
    CHECK(r.to_json() == r.to_json());
}
