#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qm/corpus.hpp"
#include "qm/gateway_types.hpp"

namespace qm {

struct per_respondent_prediction {
    std::string respondent_id;
    std::string target_id;
    double p_yes_raw = 0.0;
    double p_no_raw = 0.0;
    std::optional<double> p_yes_norm;  // defined iff p_yes_raw + p_no_raw > 0
    int label = -1;                    // -1: neither answer present; 0: no; 1: yes (ties -> yes)
};

per_respondent_prediction predict(const yes_no_mass& mass, std::string respondent_id = {},
                                  std::string target_id = {});

struct accuracy_result {
    double pa = 0.0;
    double se = 0.0;  // sqrt(pa * (1-pa) / n)
    size_t n = 0;
};

// Fraction of predictions whose label matches the gold answer. Label -1 never
// matches a gold answer in {0,1}, so undetermined predictions count as
// incorrect.
accuracy_result personalization_accuracy(std::span<const per_respondent_prediction> preds,
                                         std::span<const int> gold);

struct bias_score_result {
    double bias = 0.0;
    double se = 0.0;    // sd(p_yes_norm_i - gold_i) / sqrt(n_pairs)
    size_t n_pairs = 0; // predictions with a defined normalized probability
};

// mean(p_yes_norm) - mean(gold) over the respondents whose normalized
// probability is defined; undefined (label -1) predictions are excluded here
// but still count against accuracy.
bias_score_result bias_score(std::span<const per_respondent_prediction> preds,
                             std::span<const int> gold);

// Root mean square of the per-realization bias scores (about zero).
double std_bias(std::span<const double> biases);
// Comparison variant: deviation about the mean bias, same 1/K weighting.
double std_bias_centered(std::span<const double> biases);

struct response_summary_result {
    double mean_p_yes = 0.0;  // over defined normalized probabilities
    double sd_p_yes = 0.0;    // sample sd over the same
    size_t yes_count = 0;
    size_t no_count = 0;
    size_t undefined_count = 0;
    size_t total() const { return yes_count + no_count + undefined_count; }
};

response_summary_result response_summary(std::span<const per_respondent_prediction> preds);

struct correlation_result {
    double r = 0.0;
    size_t df = 0;  // pairs - 2
    double t = 0.0;
    double p_value = 0.0;
    std::string scope;
};

// Pearson correlation of (|bias|, PA) pairs with t = r * sqrt(df / (1 - r^2))
// and a two-sided p-value. Throws "degenerate" when either coordinate has
// zero variance; |r| -> 1 is guarded with an overflow-safe t.
correlation_result correlate_abs_bias_pa(std::span<const double> abs_bias,
                                         std::span<const double> pa, std::string scope);

struct axis_score {
    std::string target_id;
    double score = 0.0;  // bias signed by leaning: conservative_if_yes keeps the sign
    double se = 0.0;
};

axis_score political_axis(const question& q, double bias_value, double bias_se);

struct question_metrics {
    std::string target_id;
    size_t n = 0;        // respondents with a gold answer
    size_t n_bias = 0;   // of those, with defined normalized probability
    double pa = 0.0;
    double pa_se = 0.0;
    double bias = 0.0;
    double bias_se = 0.0;
    double mean_p_yes = 0.0;
    double sd_p_yes = 0.0;
};

// Full per-question metric block from aligned predictions and gold answers.
question_metrics analyze_question(const std::string& target_id,
                                  std::span<const per_respondent_prediction> preds,
                                  std::span<const int> gold);

struct metric_average {
    double value = 0.0;
    double se = 0.0;  // sample sd across questions / sqrt(#questions)
};

// Cross-question summary rows: mean PA with its SE across questions, and mean
// absolute bias whose SE derives from the spread of the signed biases.
metric_average average_pa(std::span<const question_metrics> rows);
metric_average average_abs_bias(std::span<const question_metrics> rows);

}  // namespace qm
