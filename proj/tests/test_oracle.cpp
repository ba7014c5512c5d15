#include <doctest.h>

#include <cmath>

#include "qm/metrics.hpp"
#include "qm/oracle.hpp"
#include "support/fixtures.hpp"

using namespace qm;

TEST_SUITE("oracle") {

TEST_CASE("noiseless masses follow the affine formula") {
    CHECK(oracle_mass({1.0, 0.0, 0.0, 0}, 1, "r", "t").p_yes_raw == 1.0);
    CHECK(oracle_mass({1.0, 0.0, 0.0, 0}, 1, "r", "t").p_no_raw == 0.0);
    CHECK(oracle_mass({1.0, 0.0, 0.0, 0}, 0, "r", "t").p_yes_raw == 0.0);

    // the constant-no configuration
    CHECK(oracle_mass({0.0, 0.0, 0.0, 0}, 1, "r", "t").p_yes_raw == 0.0);
    CHECK(oracle_mass({0.0, 0.0, 0.0, 0}, 1, "r", "t").p_no_raw == 1.0);

    auto m = oracle_mass({0.5, 0.5, 0.0, 0}, 1, "r", "t");
    CHECK(m.p_yes_raw == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(m.p_no_raw == doctest::Approx(0.25).epsilon(1e-12));

    // no usable gold answer collapses to the base rate
    CHECK(oracle_mass({0.7, 0.4, 0.0, 0}, -1, "", "t").p_yes_raw == doctest::Approx(0.4));
}

TEST_CASE("masses are complementary and clamped") {
    oracle_spec spec{0.5, 0.9, 2.0, 77};
    for (int gold : {0, 1}) {
        for (int i = 0; i < 50; ++i) {
            auto m = oracle_mass(spec, gold, "r" + std::to_string(i), "t");
            CHECK(m.p_yes_raw >= 0.0);
            CHECK(m.p_yes_raw <= 1.0);
            CHECK(m.p_yes_raw + m.p_no_raw == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("noise is keyed by respondent and target only") {
    oracle_spec spec{0.8, 0.5, 0.1, 1234};
    auto a = oracle_mass(spec, 1, "r1", "13.1");
    auto b = oracle_mass(spec, 1, "r1", "13.1");
    CHECK(a.p_yes_raw == b.p_yes_raw);  // bit-identical draw

    auto other_target = oracle_mass(spec, 1, "r1", "13.2");
    auto other_resp = oracle_mass(spec, 1, "r2", "13.1");
    CHECK(a.p_yes_raw != other_target.p_yes_raw);
    CHECK(a.p_yes_raw != other_resp.p_yes_raw);

    oracle_spec reseeded = spec;
    reseeded.seed = 4321;
    CHECK(a.p_yes_raw != oracle_mass(reseeded, 1, "r1", "13.1").p_yes_raw);
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(oracle_mass({1.5, 0.0, 0.0, 0}, 1, "r", "t"), std::invalid_argument);
    CHECK_THROWS_AS(oracle_mass({0.5, -0.1, 0.0, 0}, 1, "r", "t"), std::invalid_argument);
    CHECK_THROWS_AS(oracle_mass({0.5, 0.5, -1.0, 0}, 1, "r", "t"), std::invalid_argument);
}

TEST_CASE("closed forms: faithful and constant-no corners") {
    auto faithful = expected_metrics({1.0, 0.3, 0.0, 0}, 0.42);
    CHECK(faithful.pa == 1.0);
    CHECK(faithful.bias == 0.0);

    double m = 0.299;
    auto constant_no = expected_metrics({0.0, 0.0, 0.0, 0}, m);
    CHECK(constant_no.bias == doctest::Approx(-m).epsilon(1e-12));
    CHECK(constant_no.pa == doctest::Approx(1.0 - m).epsilon(1e-12));

    CHECK_THROWS_WITH(expected_metrics({1.0, 0.0, 0.1, 0}, 0.5),
                      doctest::Contains("Monte Carlo"));
}

TEST_CASE("a faithful oracle over a balanced pair averages to p_yes one half") {
    std::vector<per_respondent_prediction> preds;
    for (int gold : {1, 0}) {
        preds.push_back(predict(oracle_mass({1.0, 0.0, 0.0, 0}, gold, "r" + std::to_string(gold), "t")));
    }
    auto summary = response_summary(preds);
    CHECK(summary.mean_p_yes == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(summary.yes_count == 1);
    CHECK(summary.no_count == 1);
}

TEST_CASE("closed-form accuracy matches a brute-force run on a ten-respondent toy matrix") {
    std::vector<int> golds{1, 1, 1, 0, 0, 0, 0, 1, 0, 1};  // m = 0.5
    answer_matrix matrix = qm::testing::toy_matrix(golds);
    const question& target = *matrix.find_question("t.1");
    double m = human_yes_mean(matrix, target).mean;

    for (oracle_spec spec : {oracle_spec{0.0, 0.5, 0.0, 0}, oracle_spec{0.25, 0.0, 0.0, 0},
                             oracle_spec{0.5, 1.0, 0.0, 0}, oracle_spec{0.75, 0.5, 0.0, 0}}) {
        std::vector<per_respondent_prediction> preds;
        std::vector<int> gold;
        for (size_t r = 0; r < matrix.respondents().size(); ++r) {
            answer a = matrix.cell(r, *matrix.question_index(target.id));
            int g = a == answer::yes ? 1 : 0;
            preds.push_back(predict(oracle_mass(spec, g, matrix.respondents()[r].id, target.id)));
            gold.push_back(g);
        }
        auto pa = personalization_accuracy(preds, gold);
        auto bias = bias_score(preds, gold);
        auto expect = expected_metrics(spec, m);
        CHECK(pa.pa == doctest::Approx(expect.pa).epsilon(1e-12));
        CHECK(bias.bias == doctest::Approx(expect.bias).epsilon(1e-12));
    }
}

}  // TEST_SUITE
