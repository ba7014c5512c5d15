#include "support/fixtures.hpp"

#include <atomic>
#include <fstream>

namespace qm::testing {

namespace fs = std::filesystem;

fs::path repo_dir() { return fs::path(QM_REPO_DIR); }

answer_matrix load_demo_matrix(ingest_stats* stats) {
    return ingest_corpus((repo_dir() / "data/demo/matrix.csv").string(),
                         (repo_dir() / "data/demo/questions.json").string(), stats);
}

answer_matrix toy_matrix(const std::vector<int>& golds, int issue_count) {
    std::vector<question> questions;
    for (int i = 0; i < issue_count; ++i) {
        questions.push_back({"i." + std::to_string(i + 1), i,
                             "Toy issue question number " + std::to_string(i + 1) + "?",
                             question_kind::issue, std::nullopt});
    }
    questions.push_back({"t.1", issue_count, "Toy attitude target?", question_kind::attitude,
                         leaning_kind::conservative_if_yes});

    std::vector<respondent> respondents;
    std::vector<answer> cells;
    for (size_t r = 0; r < golds.size(); ++r) {
        respondents.push_back({"p" + std::to_string(r + 1), true, {}});
        for (int i = 0; i < issue_count; ++i) {
            cells.push_back((r + static_cast<size_t>(i)) % 2 == 0 ? answer::yes : answer::no);
        }
        cells.push_back(golds[r] < 0 ? answer::missing
                                     : (golds[r] == 1 ? answer::yes : answer::no));
    }
    return answer_matrix(std::move(questions), std::move(respondents), std::move(cells));
}

answer_matrix full_matrix_no_neutrals(int respondents_n) {
    std::vector<question> questions;
    int ordinal = 0;
    for (int i = 0; i < 60; ++i) {
        questions.push_back({"i." + std::to_string(i + 1), ordinal++,
                             "Synthetic issue question number " + std::to_string(i + 1) + "?",
                             question_kind::issue, std::nullopt});
    }
    for (int i = 0; i < 7; ++i) {
        questions.push_back({"a." + std::to_string(i + 1), ordinal++,
                             "Synthetic attitude statement number " + std::to_string(i + 1) + "?",
                             question_kind::attitude,
                             i % 2 == 0 ? leaning_kind::conservative_if_yes
                                        : leaning_kind::liberal_if_yes});
    }

    std::vector<respondent> respondents;
    std::vector<answer> cells;
    for (int r = 0; r < respondents_n; ++r) {
        respondents.push_back({"p" + std::to_string(r + 1), true, {}});
        for (size_t q = 0; q < questions.size(); ++q) {
            cells.push_back((static_cast<size_t>(r) + q) % 2 == 0 ? answer::yes : answer::no);
        }
    }
    return answer_matrix(std::move(questions), std::move(respondents), std::move(cells));
}

temp_dir::temp_dir(const std::string& tag) {
    static std::atomic<uint64_t> counter{0};
    path_ = fs::temp_directory_path() /
            ("qm-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
}

temp_dir::~temp_dir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

run_config demo_config(const fs::path& out_dir, std::vector<condition_kind> conditions) {
    run_config cfg;
    cfg.run_id = "test-run";
    cfg.output_dir = out_dir;
    cfg.matrix_path = repo_dir() / "data/demo/matrix.csv";
    cfg.questions_path = repo_dir() / "data/demo/questions.json";
    cfg.backend = backend_kind::synthetic;
    cfg.backend_id = "synthetic-test";
    cfg.oracle = {1.0, 0.0, 0.0, 1};
    cfg.conditions = std::move(conditions);
    cfg.cache_dir = out_dir / "cache";
    cfg.seeds[condition_kind::random_context] = 7;
    cfg.seeds[condition_kind::paraphrase_study] = 11;
    cfg.seeds[condition_kind::permutation_ablation] = 13;
    cfg.seeds[condition_kind::length_ablation] = 17;
    return cfg;
}

void write_paraphrase_files(const fs::path& dir, const std::vector<std::string>& target_ids,
                            int count) {
    fs::create_directories(dir);
    for (const auto& id : target_ids) {
        std::ofstream out(dir / (id + ".txt"), std::ios::binary | std::ios::trunc);
        for (int k = 0; k < count; ++k) {
            out << "Synthetic wording " << k + 1 << " of the statement behind target " << id << ".\n";
        }
    }
}

}  // namespace qm::testing
