// Regenerates the bundled demo answer matrix. The attitude-question columns
// reproduce the published per-category response counts of the 2023 Smartvote
// elected-candidate survey (192 respondents); the issue-question columns are
// seeded synthetic four-point answers, since the per-respondent raw export is
// not redistributed with this project.

#include <CLI11.hpp>

#include <array>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "qm/corpus.hpp"
#include "qm/rng.hpp"

namespace {

constexpr int k_participants = 192;
constexpr int k_non_participants = 8;

// per-question counts for 7-point answers, values 1..7, summing to 192
const std::map<std::string, std::array<int, 7>> k_attitude_counts = {
    {"13.1", {51, 36, 14, 7, 21, 41, 22}},
    {"13.2", {16, 35, 17, 13, 16, 29, 66}},
    {"13.3", {50, 28, 12, 20, 15, 15, 52}},
    {"13.4", {81, 21, 13, 28, 24, 19, 6}},
    {"13.5", {3, 2, 14, 21, 57, 63, 32}},
    {"13.6", {43, 29, 17, 18, 28, 37, 20}},
    {"13.7", {32, 35, 18, 15, 25, 27, 40}},
};

const char* k_parties[] = {"SP", "SVP", "FDP", "Mitte", "Gruene", "GLP"};

// issue answers left blank to exercise the skip-turn policy
const std::set<std::pair<std::string, std::string>> k_blank_cells = {
    {"r007", "2.3"}, {"r033", "8.5"}, {"r100", "12.1"}};

std::string respondent_id(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "r%03d", i + 1);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"regenerate the bundled demo answer matrix"};
    std::string questions_path = "data/demo/questions.json";
    std::string out_path = "data/demo/matrix.csv";
    uint64_t seed = 42;
    app.add_option("--questions", questions_path, "question sidecar JSON");
    app.add_option("--out", out_path, "output CSV path");
    app.add_option("--seed", seed, "seed for the synthetic issue answers");
    CLI11_PARSE(app, argc, argv);

    std::vector<qm::question> questions = qm::load_question_sidecar(questions_path);

    // attitude columns: expand counts into a value list and shuffle per question
    std::map<std::string, std::vector<int>> attitude_values;
    for (const auto& [qid, counts] : k_attitude_counts) {
        std::vector<int> values;
        for (int v = 0; v < 7; ++v) {
            values.insert(values.end(), static_cast<size_t>(counts[static_cast<size_t>(v)]), v + 1);
        }
        if (values.size() != k_participants) {
            std::cerr << "count table for " << qid << " does not sum to " << k_participants << "\n";
            return 1;
        }
        std::mt19937_64 gen(qm::derive_seed(seed, "attitude-assignment", qid));
        qm::fisher_yates_shuffle(values, gen);
        attitude_values[qid] = std::move(values);
    }

    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) {
        std::cerr << "cannot write " << out_path << "\n";
        return 1;
    }

    out << "respondent,elected,meta.party";
    for (const auto& q : questions) out << ',' << q.id;
    out << '\n';

    for (int i = 0; i < k_participants; ++i) {
        std::string rid = respondent_id(i);
        out << rid << ",1," << k_parties[static_cast<size_t>(i) % std::size(k_parties)];
        for (const auto& q : questions) {
            out << ',';
            if (q.kind == qm::question_kind::attitude) {
                out << attitude_values.at(q.id)[static_cast<size_t>(i)];
                continue;
            }
            if (k_blank_cells.count({rid, q.id})) continue;
            // per-question yes propensity in [0.2, 0.8], then a four-point value
            uint64_t h = qm::derive_seed(seed, "issue-propensity", q.id);
            double propensity = 0.2 + 0.6 * (static_cast<double>(h >> 11) * 0x1.0p-53);
            std::mt19937_64 gen(qm::derive_seed(seed, "issue-answer", rid + "|" + q.id));
            double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
            bool yes = u < propensity;
            bool strong = (gen() & 1) != 0;
            out << (yes ? (strong ? 1 : 2) : (strong ? 4 : 3));
        }
        out << '\n';
    }

    // elected candidates who did not participate: filtered at ingestion
    for (int i = 0; i < k_non_participants; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "x%03d", k_participants + i + 1);
        out << buf << ",1,";
        for (size_t q = 0; q < questions.size(); ++q) out << ',';
        out << '\n';
    }

    std::cout << "wrote " << out_path << " (" << k_participants << " respondents + "
              << k_non_participants << " filtered rows)\n";
    return 0;
}
