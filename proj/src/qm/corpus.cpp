#include "qm/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace qm {

std::string to_string(question_kind k) {
    return k == question_kind::issue ? "issue" : "attitude";
}

std::string to_string(leaning_kind l) {
    return l == leaning_kind::conservative_if_yes ? "conservative_if_yes" : "liberal_if_yes";
}

question_kind question_kind_from_string(const std::string& s) {
    if (s == "issue") return question_kind::issue;
    if (s == "attitude") return question_kind::attitude;
    throw std::runtime_error("unknown question kind '" + s + "'");
}

leaning_kind leaning_from_string(const std::string& s) {
    if (s == "conservative_if_yes") return leaning_kind::conservative_if_yes;
    if (s == "liberal_if_yes") return leaning_kind::liberal_if_yes;
    throw std::runtime_error("unknown leaning '" + s + "'");
}

answer binarize(const raw_response& raw) {
    switch (raw.scale) {
        case answer_scale::four_point:
            if (raw.value < 1 || raw.value > 4) {
                throw std::out_of_range("respondent '" + raw.respondent_id + "' question '" +
                                        raw.question_id + "': value " + std::to_string(raw.value) +
                                        " out of range for four_point scale");
            }
            return raw.value <= 2 ? answer::yes : answer::no;
        case answer_scale::likert7:
            if (raw.value < 1 || raw.value > 7) {
                throw std::out_of_range("respondent '" + raw.respondent_id + "' question '" +
                                        raw.question_id + "': value " + std::to_string(raw.value) +
                                        " out of range for likert7 scale");
            }
            if (raw.value == 4) return answer::missing;
            return raw.value >= 5 ? answer::yes : answer::no;
    }
    throw std::logic_error("binarize: bad scale");
}

answer_matrix::answer_matrix(std::vector<question> questions, std::vector<respondent> respondents,
                             std::vector<answer> cells)
    : questions_(std::move(questions)),
      respondents_(std::move(respondents)),
      cells_(std::move(cells)) {
    if (cells_.size() != questions_.size() * respondents_.size()) {
        throw std::invalid_argument("answer_matrix: cell count mismatch");
    }
    std::set<int> ordinals;
    for (size_t i = 0; i < questions_.size(); ++i) {
        if (!question_idx_.emplace(questions_[i].id, i).second) {
            throw std::invalid_argument("duplicate question id '" + questions_[i].id + "'");
        }
        ordinals.insert(questions_[i].ordinal);
    }
    if (!questions_.empty()) {
        if (ordinals.size() != questions_.size() || *ordinals.begin() != 0 ||
            *ordinals.rbegin() != static_cast<int>(questions_.size()) - 1) {
            throw std::invalid_argument("question ordinals must be unique and contiguous from 0");
        }
    }
    for (size_t i = 0; i < respondents_.size(); ++i) {
        if (!respondent_idx_.emplace(respondents_[i].id, i).second) {
            throw std::invalid_argument("duplicate respondent id '" + respondents_[i].id + "'");
        }
    }
}

const question* answer_matrix::find_question(const std::string& id) const {
    auto it = question_idx_.find(id);
    return it == question_idx_.end() ? nullptr : &questions_[it->second];
}

const respondent* answer_matrix::find_respondent(const std::string& id) const {
    auto it = respondent_idx_.find(id);
    return it == respondent_idx_.end() ? nullptr : &respondents_[it->second];
}

std::optional<size_t> answer_matrix::question_index(const std::string& id) const {
    auto it = question_idx_.find(id);
    if (it == question_idx_.end()) return std::nullopt;
    return it->second;
}

std::optional<size_t> answer_matrix::respondent_index(const std::string& id) const {
    auto it = respondent_idx_.find(id);
    if (it == respondent_idx_.end()) return std::nullopt;
    return it->second;
}

answer answer_matrix::cell(size_t respondent_idx, size_t question_idx) const {
    return cells_.at(respondent_idx * questions_.size() + question_idx);
}

answer answer_matrix::cell(const std::string& respondent_id, const std::string& question_id) const {
    auto r = respondent_index(respondent_id);
    auto q = question_index(question_id);
    if (!r) throw std::out_of_range("unknown respondent id '" + respondent_id + "'");
    if (!q) throw std::out_of_range("unknown question id '" + question_id + "'");
    return cell(*r, *q);
}

static std::vector<const question*> questions_of_kind(const std::vector<question>& qs,
                                                      question_kind kind) {
    std::vector<const question*> out;
    for (const auto& q : qs) {
        if (q.kind == kind) out.push_back(&q);
    }
    std::sort(out.begin(), out.end(),
              [](const question* a, const question* b) { return a->ordinal < b->ordinal; });
    return out;
}

std::vector<const question*> answer_matrix::issue_questions() const {
    return questions_of_kind(questions_, question_kind::issue);
}

std::vector<const question*> answer_matrix::attitude_questions() const {
    return questions_of_kind(questions_, question_kind::attitude);
}

size_t answer_matrix::missing_cell_count() const {
    return static_cast<size_t>(std::count(cells_.begin(), cells_.end(), answer::missing));
}

std::vector<question> load_question_sidecar(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open question sidecar: " + path);
    nlohmann::json j;
    in >> j;
    if (!j.is_array()) throw std::runtime_error("question sidecar must be a JSON array");
    std::vector<question> out;
    for (const auto& item : j) {
        question q;
        q.id = item.at("id").get<std::string>();
        q.ordinal = item.at("ordinal").get<int>();
        q.text = item.at("text").get<std::string>();
        q.kind = question_kind_from_string(item.at("kind").get<std::string>());
        if (item.contains("leaning") && !item["leaning"].is_null()) {
            q.leaning = leaning_from_string(item["leaning"].get<std::string>());
        }
        out.push_back(std::move(q));
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    // cells are ids and small integers; quoting is not part of the format
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
    }
    return out;
}

bool parse_bool_cell(const std::string& s) {
    if (s == "1" || s == "true" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "no") return false;
    throw std::runtime_error("cannot parse boolean cell '" + s + "'");
}

}  // namespace

answer_matrix ingest_corpus(const std::string& matrix_csv_path,
                            const std::string& questions_json_path, ingest_stats* stats) {
    std::vector<question> questions = load_question_sidecar(questions_json_path);

    std::ifstream in(matrix_csv_path);
    if (!in) throw std::runtime_error("cannot open matrix file: " + matrix_csv_path);

    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("no respondents: empty matrix file");
    auto cols = split_csv_line(header);
    if (cols.size() < 2) throw std::runtime_error("matrix header needs a respondent column and at least one question column");

    // column -> role
    enum class col_role { respondent_id, elected, metadata, question };
    struct col_info {
        col_role role = col_role::respondent_id;
        size_t question_idx = 0;   // into `questions`
        std::string meta_key;
    };
    std::vector<col_info> col_infos(cols.size());
    std::unordered_map<std::string, size_t> qidx;
    for (size_t i = 0; i < questions.size(); ++i) qidx.emplace(questions[i].id, i);

    std::set<std::string> seen_question_cols;
    col_infos[0].role = col_role::respondent_id;
    for (size_t c = 1; c < cols.size(); ++c) {
        const std::string& name = cols[c];
        if (name == "elected") {
            col_infos[c].role = col_role::elected;
        } else if (name.rfind("meta.", 0) == 0) {
            col_infos[c].role = col_role::metadata;
            col_infos[c].meta_key = name.substr(5);
        } else {
            auto it = qidx.find(name);
            if (it == qidx.end()) {
                throw std::runtime_error("unknown question id '" + name + "' in matrix header (column " +
                                         std::to_string(c + 1) + ")");
            }
            if (!seen_question_cols.insert(name).second) {
                throw std::runtime_error("duplicate question column '" + name + "' in matrix header");
            }
            col_infos[c].role = col_role::question;
            col_infos[c].question_idx = it->second;
        }
    }

    ingest_stats local{};
    std::vector<respondent> respondents;
    std::vector<answer> cells;

    std::string line;
    size_t line_no = 1;
    std::set<std::string> seen_ids;  // across all rows, including filtered ones
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (fields.size() != cols.size()) {
            throw std::runtime_error("row " + std::to_string(line_no) + ": expected " +
                                     std::to_string(cols.size()) + " cells, got " +
                                     std::to_string(fields.size()));
        }
        ++local.rows_total;

        respondent r;
        r.id = fields[0];
        if (r.id.empty()) throw std::runtime_error("row " + std::to_string(line_no) + ": empty respondent id");
        if (!seen_ids.insert(r.id).second) {
            throw std::runtime_error("duplicate respondent id '" + r.id + "' (row " +
                                     std::to_string(line_no) + ")");
        }

        std::vector<answer> row(questions.size(), answer::missing);
        size_t answered = 0;
        size_t row_absent = 0;
        size_t row_neutral = 0;
        for (size_t c = 1; c < cols.size(); ++c) {
            const std::string& cell_text = fields[c];
            switch (col_infos[c].role) {
                case col_role::elected:
                    if (!cell_text.empty()) r.elected = parse_bool_cell(cell_text);
                    break;
                case col_role::metadata:
                    if (!cell_text.empty()) r.metadata[col_infos[c].meta_key] = cell_text;
                    break;
                case col_role::question: {
                    size_t qi = col_infos[c].question_idx;
                    if (cell_text.empty()) {
                        ++row_absent;
                        break;
                    }
                    int v = 0;
                    auto [p, ec] = std::from_chars(cell_text.data(), cell_text.data() + cell_text.size(), v);
                    if (ec != std::errc() || p != cell_text.data() + cell_text.size()) {
                        throw std::runtime_error("row " + std::to_string(line_no) + " column '" +
                                                 cols[c] + "': cannot parse value '" + cell_text + "'");
                    }
                    raw_response raw{r.id, questions[qi].id,
                                     questions[qi].kind == question_kind::attitude
                                         ? answer_scale::likert7
                                         : answer_scale::four_point,
                                     v};
                    answer a = binarize(raw);
                    if (a == answer::missing) ++row_neutral;
                    row[qi] = a;
                    ++answered;
                    break;
                }
                case col_role::respondent_id:
                    break;
            }
        }

        if (!r.elected) {
            ++local.dropped_not_elected;
            continue;
        }
        if (answered == 0) {
            ++local.dropped_no_answers;
            continue;
        }
        local.absent_cells += row_absent;
        local.neutral_cells += row_neutral;
        respondents.push_back(std::move(r));
        cells.insert(cells.end(), row.begin(), row.end());
    }

    if (respondents.empty()) throw std::runtime_error("no respondents");
    if (stats) *stats = local;
    return answer_matrix(std::move(questions), std::move(respondents), std::move(cells));
}

yes_mean_result human_yes_mean(const answer_matrix& matrix, const question& q) {
    auto qi = matrix.question_index(q.id);
    if (!qi) throw std::out_of_range("unknown question id '" + q.id + "'");
    size_t yes = 0, n = 0;
    for (size_t r = 0; r < matrix.respondents().size(); ++r) {
        answer a = matrix.cell(r, *qi);
        if (a == answer::missing) continue;
        ++n;
        if (a == answer::yes) ++yes;
    }
    if (n == 0) throw std::runtime_error("no gold answers for question '" + q.id + "'");
    return {static_cast<double>(yes) / static_cast<double>(n), n};
}

majority_result majority_baseline(const answer_matrix& matrix, const question& q) {
    auto [m, n] = human_yes_mean(matrix, q);
    majority_result out;
    out.n = n;
    out.tie = (m == 0.5);
    out.accuracy = std::max(m, 1.0 - m);
    return out;
}

}  // namespace qm
