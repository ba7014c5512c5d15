#include <doctest.h>

#include <fstream>
#include <random>

#include "qm/corpus.hpp"
#include "support/fixtures.hpp"

using namespace qm;
using qm::testing::temp_dir;

namespace {

answer binarize_value(answer_scale scale, int v) {
    return binarize({"r", "q", scale, v});
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("binarize: seven-point scale folds around the neutral midpoint") {
    std::vector<answer> got;
    for (int v = 1; v <= 7; ++v) got.push_back(binarize_value(answer_scale::likert7, v));
    CHECK(got == std::vector<answer>{answer::no, answer::no, answer::no, answer::missing,
                                     answer::yes, answer::yes, answer::yes});
}

TEST_CASE("binarize: four-point scale") {
    CHECK(binarize_value(answer_scale::four_point, 1) == answer::yes);
    CHECK(binarize_value(answer_scale::four_point, 2) == answer::yes);  // rather yes
    CHECK(binarize_value(answer_scale::four_point, 3) == answer::no);
    CHECK(binarize_value(answer_scale::four_point, 4) == answer::no);
}

TEST_CASE("binarize: out-of-range values are rejected") {
    CHECK_THROWS_AS(binarize_value(answer_scale::four_point, 0), std::out_of_range);
    CHECK_THROWS_AS(binarize_value(answer_scale::four_point, 5), std::out_of_range);
    CHECK_THROWS_AS(binarize_value(answer_scale::likert7, 8), std::out_of_range);
}

TEST_CASE("binarize is order-preserving on the seven-point scale") {
    // higher scale value never maps to a strictly lower binary value
    for (int a = 1; a <= 7; ++a) {
        for (int b = a; b <= 7; ++b) {
            answer lo = binarize_value(answer_scale::likert7, a);
            answer hi = binarize_value(answer_scale::likert7, b);
            if (lo == answer::missing || hi == answer::missing) continue;
            CHECK(static_cast<int>(hi) >= static_cast<int>(lo));
        }
    }
}

TEST_CASE("demo corpus ingests with the published shape") {
    ingest_stats stats;
    answer_matrix matrix = qm::testing::load_demo_matrix(&stats);
    CHECK(matrix.respondents().size() == 192);
    CHECK(stats.rows_total == 200);
    CHECK(stats.dropped_no_answers == 8);
    CHECK(matrix.questions().size() == 67);
    CHECK(matrix.issue_questions().size() == 60);
    CHECK(matrix.attitude_questions().size() == 7);

    size_t total_gold = 0;
    for (const question* q : matrix.attitude_questions()) total_gold += human_yes_mean(matrix, *q).n;
    CHECK(total_gold == 1222);
}

TEST_CASE("demo corpus majority baselines match the published table") {
    answer_matrix matrix = qm::testing::load_demo_matrix();
    auto maj = [&](const char* id) {
        return majority_baseline(matrix, *matrix.find_question(id)).accuracy * 100.0;
    };
    CHECK(maj("13.1") == doctest::Approx(54.6).epsilon(0.005));
    CHECK(maj("13.2") == doctest::Approx(62.0).epsilon(0.005));
    CHECK(maj("13.3") == doctest::Approx(52.3).epsilon(0.005));
    CHECK(maj("13.4") == doctest::Approx(70.1).epsilon(0.005));
    CHECK(maj("13.5") == doctest::Approx(88.9).epsilon(0.005));
    CHECK(maj("13.6") == doctest::Approx(51.1).epsilon(0.005));
    CHECK(maj("13.7") == doctest::Approx(52.0).epsilon(0.005));
}

TEST_CASE("elected flag filters candidate rows") {
    temp_dir dir("elected");
    auto csv = dir.path() / "m.csv";
    {
        std::ofstream out(csv);
        out << "respondent,elected,q1\n";
        for (int i = 0; i < 200; ++i) {
            bool elected = i < 192;
            out << 'c' << i << ',' << (elected ? 1 : 0) << ",1\n";
        }
    }
    auto qjson = dir.path() / "q.json";
    {
        std::ofstream out(qjson);
        out << R"([{"id":"q1","ordinal":0,"text":"Q?","kind":"issue"}])";
    }
    ingest_stats stats;
    answer_matrix matrix = ingest_corpus(csv.string(), qjson.string(), &stats);
    CHECK(matrix.respondents().size() == 192);
    CHECK(stats.dropped_not_elected == 8);
}

TEST_CASE("ingestion errors name the offending input") {
    temp_dir dir("ingest-errors");
    auto qjson = dir.path() / "q.json";
    {
        std::ofstream out(qjson);
        out << R"([{"id":"q1","ordinal":0,"text":"Q?","kind":"issue"}])";
    }
    auto write_csv = [&](const std::string& content) {
        auto p = dir.path() / "m.csv";
        std::ofstream out(p);
        out << content;
        return p.string();
    };

    CHECK_THROWS_WITH(ingest_corpus(write_csv(""), qjson.string()),
                      doctest::Contains("no respondents"));
    CHECK_THROWS_WITH(ingest_corpus(write_csv("respondent,q1\n"), qjson.string()),
                      doctest::Contains("no respondents"));
    CHECK_THROWS_WITH(ingest_corpus(write_csv("respondent,qX\nr1,1\n"), qjson.string()),
                      doctest::Contains("unknown question id 'qX'"));
    CHECK_THROWS_WITH(ingest_corpus(write_csv("respondent,q1\nr1,1\nr1,2\n"), qjson.string()),
                      doctest::Contains("duplicate respondent id 'r1'"));
    CHECK_THROWS_WITH(ingest_corpus(write_csv("respondent,q1,q1\nr1,1,1\n"), qjson.string()),
                      doctest::Contains("duplicate question column"));
    CHECK_THROWS_WITH(ingest_corpus(write_csv("respondent,q1\nr1,9\n"), qjson.string()),
                      doctest::Contains("out of range"));
    CHECK_THROWS_WITH(ingest_corpus(write_csv("respondent,q1\nr1,abc\n"), qjson.string()),
                      doctest::Contains("cannot parse value"));
}

TEST_CASE("a lone respondent answering everything leaves no missing cells") {
    temp_dir dir("dense");
    auto qjson = dir.path() / "q.json";
    {
        std::ofstream out(qjson);
        out << "[";
        for (int i = 0; i < 67; ++i) {
            if (i) out << ",";
            bool attitude = i >= 60;
            out << R"({"id":"q)" << i << R"(","ordinal":)" << i << R"(,"text":"Q )" << i
                << R"(?","kind":")" << (attitude ? "attitude" : "issue") << R"("})";
        }
        out << "]";
    }
    auto csv = dir.path() / "m.csv";
    {
        std::ofstream out(csv);
        out << "respondent";
        for (int i = 0; i < 67; ++i) out << ",q" << i;
        out << "\nsolo";
        for (int i = 0; i < 67; ++i) out << ',' << (i >= 60 ? 6 : 2);  // agree, never neutral
        out << "\n";
    }
    answer_matrix matrix = ingest_corpus(csv.string(), qjson.string());
    CHECK(matrix.respondents().size() == 1);
    CHECK(matrix.missing_cell_count() == 0);
}

TEST_CASE("human_yes_mean counts non-missing cells only") {
    answer_matrix m = qm::testing::toy_matrix({1, 1, 0, -1});
    auto r = human_yes_mean(m, *m.find_question("t.1"));
    CHECK(r.n == 3);
    CHECK(r.mean == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("human_yes_mean: all yes gives 1.0, all missing is an error") {
    answer_matrix all_yes = qm::testing::toy_matrix({1, 1, 1});
    CHECK(human_yes_mean(all_yes, *all_yes.find_question("t.1")).mean == 1.0);

    answer_matrix none = qm::testing::toy_matrix({-1, -1});
    CHECK_THROWS_WITH(human_yes_mean(none, *none.find_question("t.1")),
                      doctest::Contains("no gold answers"));
}

TEST_CASE("majority baseline on the three-respondent toy matrix") {
    answer_matrix m = qm::testing::toy_matrix({1, 1, 0});
    auto r = majority_baseline(m, *m.find_question("t.1"));
    CHECK(r.accuracy == doctest::Approx(2.0 / 3.0));
    CHECK_FALSE(r.tie);
}

TEST_CASE("majority baseline flags exact ties") {
    answer_matrix m = qm::testing::toy_matrix({1, 1, 0, 0});
    auto r = majority_baseline(m, *m.find_question("t.1"));
    CHECK(r.accuracy == 0.5);
    CHECK(r.tie);
}

TEST_CASE("human_yes_mean is invariant under respondent permutation") {
    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 50; ++trial) {
        size_t n = 2 + gen() % 20;
        std::vector<int> golds;
        for (size_t i = 0; i < n; ++i) golds.push_back(static_cast<int>(gen() % 3) - 1);
        if (std::count_if(golds.begin(), golds.end(), [](int g) { return g >= 0; }) == 0) continue;

        answer_matrix a = qm::testing::toy_matrix(golds);
        std::vector<int> shuffled = golds;
        for (size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[gen() % i]);
        answer_matrix b = qm::testing::toy_matrix(shuffled);

        auto ra = human_yes_mean(a, *a.find_question("t.1"));
        auto rb = human_yes_mean(b, *b.find_question("t.1"));
        CHECK(ra.mean == doctest::Approx(rb.mean));
        CHECK(ra.n == rb.n);

        // majority == max(m, 1-m) exactly
        auto maj = majority_baseline(a, *a.find_question("t.1"));
        CHECK(maj.accuracy == std::max(ra.mean, 1.0 - ra.mean));
    }
}

}  // TEST_SUITE
