#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace qm {

enum class question_kind { issue, attitude };
enum class leaning_kind { conservative_if_yes, liberal_if_yes };

std::string to_string(question_kind k);
std::string to_string(leaning_kind l);
question_kind question_kind_from_string(const std::string& s);
leaning_kind leaning_from_string(const std::string& s);

struct question {
    std::string id;
    int ordinal = 0;  // 0-based position in original questionnaire order
    std::string text;
    question_kind kind = question_kind::issue;
    std::optional<leaning_kind> leaning;
};

enum class answer_scale { four_point, likert7 };

// Cell state after binarization.
enum class answer : uint8_t { no = 0, yes = 1, missing = 2 };

struct raw_response {
    std::string respondent_id;
    std::string question_id;
    answer_scale scale = answer_scale::four_point;
    int value = 0;
};

// four_point: 1=yes 2=rather-yes 3=rather-no 4=no -> {1,2} yes, {3,4} no.
// likert7: 1..7 from strongly-disagree to strongly-agree -> {5,6,7} yes,
// {1,2,3} no, 4 (neutral) dropped as missing.
answer binarize(const raw_response& raw);

struct respondent {
    std::string id;
    bool elected = true;
    std::map<std::string, std::string> metadata;  // pass-through (party, canton, ...)
};

struct ingest_stats {
    size_t rows_total = 0;
    size_t dropped_not_elected = 0;
    size_t dropped_no_answers = 0;
    size_t absent_cells = 0;
    size_t neutral_cells = 0;
    size_t missing_cells() const { return absent_cells + neutral_cells; }
};

// Immutable after construction; safe to share across threads.
class answer_matrix {
public:
    answer_matrix(std::vector<question> questions, std::vector<respondent> respondents,
                  std::vector<answer> cells);

    const std::vector<question>& questions() const { return questions_; }
    const std::vector<respondent>& respondents() const { return respondents_; }

    const question* find_question(const std::string& id) const;
    const respondent* find_respondent(const std::string& id) const;
    std::optional<size_t> question_index(const std::string& id) const;
    std::optional<size_t> respondent_index(const std::string& id) const;

    answer cell(size_t respondent_idx, size_t question_idx) const;
    answer cell(const std::string& respondent_id, const std::string& question_id) const;

    // Questions of one kind, in questionnaire (ordinal) order.
    std::vector<const question*> issue_questions() const;
    std::vector<const question*> attitude_questions() const;

    size_t missing_cell_count() const;

private:
    std::vector<question> questions_;
    std::vector<respondent> respondents_;
    std::vector<answer> cells_;  // respondent-major
    std::unordered_map<std::string, size_t> question_idx_;
    std::unordered_map<std::string, size_t> respondent_idx_;
};

// Wide-CSV ingestion. First column is the respondent id; an optional
// "elected" column filters non-participants; "meta.*" columns pass through
// to the respondent metadata bag; every other column must name a question
// declared in the sidecar. Empty cell = absent answer. Scale follows the
// question kind (issue -> four_point, attitude -> likert7).
answer_matrix ingest_corpus(const std::string& matrix_csv_path,
                            const std::string& questions_json_path,
                            ingest_stats* stats = nullptr);

std::vector<question> load_question_sidecar(const std::string& path);

struct yes_mean_result {
    double mean = 0.0;
    size_t n = 0;  // non-missing cells
};

// Mean human yes-answer over non-missing cells. Throws "no gold answers"
// when every cell is missing.
yes_mean_result human_yes_mean(const answer_matrix& matrix, const question& q);

struct majority_result {
    double accuracy = 0.0;
    bool tie = false;
    size_t n = 0;
};

// Accuracy of always predicting the modal class: max(m, 1-m); ties -> 0.5.
majority_result majority_baseline(const answer_matrix& matrix, const question& q);

}  // namespace qm
