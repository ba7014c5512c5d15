#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qm/corpus.hpp"
#include "qm/orchestrator.hpp"

namespace qm::testing {

std::filesystem::path repo_dir();

// Ingest the bundled demo corpus (192 respondents, 67 questions).
answer_matrix load_demo_matrix(ingest_stats* stats = nullptr);

// One attitude target plus `issue_count` in-context questions. `golds` holds
// one cell per respondent: 0, 1, or -1 for a dropped neutral. Issue answers
// are deterministic non-missing values.
answer_matrix toy_matrix(const std::vector<int>& golds, int issue_count = 2);

// Full-shape corpus (60 issue + 7 attitude questions) with no neutral gold
// answers; attitude cells alternate yes/no.
answer_matrix full_matrix_no_neutrals(int respondents = 192);

// Unique scratch directory under the build tree; removed on destruction.
class temp_dir {
public:
    explicit temp_dir(const std::string& tag);
    ~temp_dir();
    temp_dir(const temp_dir&) = delete;
    temp_dir& operator=(const temp_dir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Baseline config for a synthetic run over the demo corpus.
run_config demo_config(const std::filesystem::path& out_dir,
                       std::vector<condition_kind> conditions = {condition_kind::qm});

// Write `count` machine-distinct paraphrase files for each target into dir.
void write_paraphrase_files(const std::filesystem::path& dir,
                            const std::vector<std::string>& target_ids, int count);

}  // namespace qm::testing
