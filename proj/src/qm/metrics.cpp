#include "qm/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "qm/stats.hpp"

namespace qm {

per_respondent_prediction predict(const yes_no_mass& mass, std::string respondent_id,
                                  std::string target_id) {
    per_respondent_prediction p;
    p.respondent_id = std::move(respondent_id);
    p.target_id = std::move(target_id);
    p.p_yes_raw = mass.p_yes_raw;
    p.p_no_raw = mass.p_no_raw;
    double sum = mass.p_yes_raw + mass.p_no_raw;
    if (sum > 0.0) p.p_yes_norm = mass.p_yes_raw / sum;

    if (mass.p_yes_raw == 0.0 && mass.p_no_raw == 0.0) {
        p.label = -1;
    } else if (mass.p_no_raw > mass.p_yes_raw) {
        p.label = 0;
    } else {
        p.label = 1;  // ties fall to yes
    }
    return p;
}

accuracy_result personalization_accuracy(std::span<const per_respondent_prediction> preds,
                                         std::span<const int> gold) {
    if (preds.size() != gold.size()) throw std::invalid_argument("accuracy: length mismatch");
    if (preds.empty()) throw std::invalid_argument("accuracy: no predictions");
    size_t correct = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (gold[i] != 0 && gold[i] != 1) throw std::invalid_argument("accuracy: gold answers must be 0 or 1");
        if (preds[i].label == gold[i]) ++correct;
    }
    accuracy_result r;
    r.n = preds.size();
    r.pa = static_cast<double>(correct) / static_cast<double>(r.n);
    r.se = std::sqrt(r.pa * (1.0 - r.pa) / static_cast<double>(r.n));
    return r;
}

bias_score_result bias_score(std::span<const per_respondent_prediction> preds,
                             std::span<const int> gold) {
    if (preds.size() != gold.size()) throw std::invalid_argument("bias: length mismatch");
    if (preds.empty()) throw std::invalid_argument("bias: no predictions");

    std::vector<double> diffs;
    double sum_p = 0.0, sum_g = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (!preds[i].p_yes_norm) continue;
        double p = *preds[i].p_yes_norm;
        double g = static_cast<double>(gold[i]);
        sum_p += p;
        sum_g += g;
        diffs.push_back(p - g);
    }
    if (diffs.empty()) throw std::invalid_argument("bias: no defined normalized probabilities");

    bias_score_result r;
    r.n_pairs = diffs.size();
    double n = static_cast<double>(r.n_pairs);
    r.bias = sum_p / n - sum_g / n;
    r.se = sample_sd(diffs) / std::sqrt(n);
    return r;
}

double std_bias(std::span<const double> biases) {
    if (biases.empty()) throw std::invalid_argument("std_bias: empty bias list");
    double ss = 0.0;
    for (double b : biases) ss += b * b;
    return std::sqrt(ss / static_cast<double>(biases.size()));
}

double std_bias_centered(std::span<const double> biases) {
    if (biases.empty()) throw std::invalid_argument("std_bias: empty bias list");
    double m = mean(biases);
    double ss = 0.0;
    for (double b : biases) ss += (b - m) * (b - m);
    return std::sqrt(ss / static_cast<double>(biases.size()));
}

response_summary_result response_summary(std::span<const per_respondent_prediction> preds) {
    response_summary_result r;
    std::vector<double> norms;
    for (const auto& p : preds) {
        switch (p.label) {
            case 1: ++r.yes_count; break;
            case 0: ++r.no_count; break;
            default: ++r.undefined_count; break;
        }
        if (p.p_yes_norm) norms.push_back(*p.p_yes_norm);
    }
    if (!norms.empty()) {
        r.mean_p_yes = mean(norms);
        r.sd_p_yes = sample_sd(norms);
    }
    return r;
}

correlation_result correlate_abs_bias_pa(std::span<const double> abs_bias,
                                         std::span<const double> pa, std::string scope) {
    if (abs_bias.size() != pa.size()) throw std::invalid_argument("correlate: length mismatch");
    if (abs_bias.size() < 3) throw std::invalid_argument("correlate: need at least 3 pairs");

    correlation_result out;
    out.scope = std::move(scope);
    try {
        out.r = pearson_r(abs_bias, pa);
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("correlate: degenerate input (zero variance)");
    }
    out.df = abs_bias.size() - 2;
    double denom = 1.0 - out.r * out.r;
    if (denom < 1e-300) denom = 1e-300;  // |r| == 1: overflow-safe large t
    out.t = out.r * std::sqrt(static_cast<double>(out.df) / denom);
    out.p_value = student_t_two_sided_p(out.t, out.df);
    return out;
}

axis_score political_axis(const question& q, double bias_value, double bias_se) {
    if (!q.leaning) {
        throw std::invalid_argument("question '" + q.id + "' has no leaning annotation");
    }
    axis_score s;
    s.target_id = q.id;
    s.score = *q.leaning == leaning_kind::conservative_if_yes ? bias_value : -bias_value;
    s.se = bias_se;
    return s;
}

question_metrics analyze_question(const std::string& target_id,
                                  std::span<const per_respondent_prediction> preds,
                                  std::span<const int> gold) {
    question_metrics m;
    m.target_id = target_id;
    accuracy_result acc = personalization_accuracy(preds, gold);
    m.n = acc.n;
    m.pa = acc.pa;
    m.pa_se = acc.se;
    bias_score_result b = bias_score(preds, gold);
    m.n_bias = b.n_pairs;
    m.bias = b.bias;
    m.bias_se = b.se;

    std::vector<double> norms;
    for (const auto& p : preds) {
        if (p.p_yes_norm) norms.push_back(*p.p_yes_norm);
    }
    if (!norms.empty()) {
        m.mean_p_yes = mean(norms);
        m.sd_p_yes = sample_sd(norms);
    }
    return m;
}

metric_average average_pa(std::span<const question_metrics> rows) {
    if (rows.empty()) throw std::invalid_argument("average_pa: no rows");
    std::vector<double> pas;
    for (const auto& r : rows) pas.push_back(r.pa);
    metric_average a;
    a.value = mean(pas);
    a.se = sample_sd(pas) / std::sqrt(static_cast<double>(pas.size()));
    return a;
}

metric_average average_abs_bias(std::span<const question_metrics> rows) {
    if (rows.empty()) throw std::invalid_argument("average_abs_bias: no rows");
    std::vector<double> signed_biases;
    double abs_sum = 0.0;
    for (const auto& r : rows) {
        signed_biases.push_back(r.bias);
        abs_sum += std::fabs(r.bias);
    }
    metric_average a;
    a.value = abs_sum / static_cast<double>(rows.size());
    // the spread that matters is that of the signed scores; taking |.| first
    // would understate it for sign-flipping questions
    a.se = sample_sd(signed_biases) / std::sqrt(static_cast<double>(signed_biases.size()));
    return a;
}

}  // namespace qm
