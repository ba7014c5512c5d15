#include "qm/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "qm/rng.hpp"
#include "qm/sha256.hpp"

namespace qm {

namespace {

std::string make_question_turn_text(const std::string& question_text) {
    std::string s(k_instruction_prefix);
    s += question_text;
    return s;
}

std::string make_zero_shot_turn_text(const std::string& question_text) {
    std::string s = make_question_turn_text(question_text);
    s += '\n';
    s += k_zero_shot_suffix;
    return s;
}

void finalize_hash(rendered_prompt& p) {
    std::string buf = "qm-prompt-v1\n";
    buf += p.mode == render_mode::chat_messages ? "mode=chat\n" : "mode=raw\n";
    buf += "template=";
    buf += p.template_id.value_or("none");
    buf += "\ntemperature=";
    buf += std::to_string(k_temperature);
    buf += "\ntop_k=";
    buf += std::to_string(k_top_k);
    buf += '\n';
    if (p.mode == render_mode::raw_template) {
        buf += render_raw(p, p.template_id.value());
    } else {
        buf += serialize_chat(p);
    }
    p.canonical_hash = sha256_hex(buf);
}

void validate_render_options(const render_options& opts) {
    if (opts.mode == render_mode::raw_template) {
        if (!opts.template_id) throw std::invalid_argument("raw_template mode requires a template_id");
        if (!template_supported(*opts.template_id)) {
            throw std::invalid_argument("unknown template_id '" + *opts.template_id + "'");
        }
    }
}

}  // namespace

std::string context_spec::digest() const {
    std::string buf = "qm-spec-v1|order=";
    for (int o : order) {
        buf += std::to_string(o);
        buf += ',';
    }
    buf += "|included=";
    for (int o : included) {
        buf += std::to_string(o);
        buf += ',';
    }
    buf += "|source=";
    buf += answer_source == answer_source_kind::human ? "human" : "random";
    buf += "|seed=";
    buf += seed ? std::to_string(*seed) : "none";
    buf += "|keep_last=";
    buf += keep_last_flag ? '1' : '0';
    return sha256_hex(buf).substr(0, 16);
}

context_spec default_context(const answer_matrix& matrix) {
    context_spec spec;
    for (const question* q : matrix.issue_questions()) {
        spec.order.push_back(q->ordinal);
        spec.included.push_back(q->ordinal);
    }
    return spec;
}

rendered_prompt build_qm(const answer_matrix& matrix, const respondent& resp,
                         const question& target, const context_spec& spec,
                         const render_options& opts, build_log* log) {
    validate_render_options(opts);
    if (target.kind != question_kind::attitude) {
        throw std::invalid_argument("target '" + target.id + "' is not an attitude question");
    }
    if (target.text.empty()) {
        throw std::invalid_argument("target '" + target.id + "' has empty text");
    }
    if (spec.answer_source == answer_source_kind::random && !spec.seed) {
        throw std::invalid_argument("random answer source requires a seed");
    }

    std::set<int> included(spec.included.begin(), spec.included.end());
    if (included.count(target.ordinal)) {
        throw std::invalid_argument("target '" + target.id + "' must not appear in the included context");
    }
    for (int o : spec.included) {
        if (std::find(spec.order.begin(), spec.order.end(), o) == spec.order.end()) {
            throw std::invalid_argument("included ordinal " + std::to_string(o) + " not in order");
        }
    }

    // ordinal -> question lookup
    std::vector<const question*> by_ordinal(matrix.questions().size(), nullptr);
    for (const auto& q : matrix.questions()) by_ordinal[static_cast<size_t>(q.ordinal)] = &q;

    auto ri = matrix.respondent_index(resp.id);
    if (!ri) throw std::invalid_argument("unknown respondent '" + resp.id + "'");

    rendered_prompt p;
    p.mode = opts.mode;
    p.template_id = opts.template_id;
    p.target_id = target.id;
    p.target_text = target.text;

    for (int ordinal : spec.order) {
        if (!included.count(ordinal)) continue;
        if (ordinal < 0 || static_cast<size_t>(ordinal) >= by_ordinal.size() || !by_ordinal[static_cast<size_t>(ordinal)]) {
            throw std::invalid_argument("ordinal " + std::to_string(ordinal) + " not in questionnaire");
        }
        const question& q = *by_ordinal[static_cast<size_t>(ordinal)];

        std::string answer_text;
        if (spec.answer_source == answer_source_kind::human) {
            auto qi = matrix.question_index(q.id);
            answer a = matrix.cell(*ri, *qi);
            if (a == answer::missing) {
                if (log) {
                    log->skipped_turns.push_back("respondent " + resp.id + ": no answer for " +
                                                 q.id + ", turn skipped");
                }
                continue;
            }
            answer_text = a == answer::yes ? "yes" : "no";
        } else {
            answer_text = derive_answer_bit(*spec.seed, resp.id, target.id, q.id) ? "yes" : "no";
        }

        p.turns.push_back({turn_role::user, make_question_turn_text(q.text)});
        p.turns.push_back({turn_role::assistant, std::move(answer_text)});
    }

    p.turns.push_back({turn_role::user, make_question_turn_text(target.text)});
    finalize_hash(p);
    return p;
}

rendered_prompt build_zero_shot(const question& target, const render_options& opts) {
    validate_render_options(opts);
    if (target.text.empty()) {
        throw std::invalid_argument("target '" + target.id + "' has empty text");
    }
    rendered_prompt p;
    p.mode = opts.mode;
    p.template_id = opts.template_id;
    p.target_id = target.id;
    p.target_text = target.text;
    p.zero_shot = true;
    p.turns.push_back({turn_role::user, make_zero_shot_turn_text(target.text)});
    finalize_hash(p);
    return p;
}

rendered_prompt apply_paraphrase(const rendered_prompt& prompt, const std::string& paraphrase_text) {
    if (paraphrase_text.empty()) throw std::invalid_argument("empty paraphrase");
    if (prompt.turns.empty() || prompt.turns.back().role != turn_role::user) {
        throw std::invalid_argument("prompt does not end in a target user turn");
    }
    rendered_prompt p = prompt;
    p.target_text = paraphrase_text;
    p.turns.back().text = p.zero_shot ? make_zero_shot_turn_text(paraphrase_text)
                                      : make_question_turn_text(paraphrase_text);
    finalize_hash(p);
    return p;
}

std::vector<context_spec> derive_permutation_specs(const context_spec& base,
                                                   const permutation_params& params,
                                                   uint64_t seed) {
    if (params.count < 1) throw std::invalid_argument("permutation count must be >= 1");
    if (params.same_last_count > params.count) {
        throw std::invalid_argument("same_last_count exceeds permutation count");
    }
    if (base.order.empty()) throw std::invalid_argument("base context is empty");

    std::vector<context_spec> specs;
    int last = base.order.back();
    for (int i = 0; i < params.count; ++i) {
        bool keep_last = i < params.same_last_count;
        uint64_t sub_seed = derive_seed(seed, "permutation", std::to_string(i));
        std::mt19937_64 gen(sub_seed);

        context_spec spec = base;
        spec.seed = sub_seed;
        spec.keep_last_flag = keep_last;
        if (keep_last) {
            std::vector<int> head(base.order.begin(), base.order.end() - 1);
            fisher_yates_shuffle(head, gen);
            head.push_back(last);
            spec.order = std::move(head);
        } else {
            if (base.order.size() < 2) {
                throw std::invalid_argument("cannot vary the final example of a single-example context");
            }
            std::vector<int> perm = base.order;
            do {
                fisher_yates_shuffle(perm, gen);
            } while (perm.back() == last);
            spec.order = std::move(perm);
        }
        specs.push_back(std::move(spec));
    }
    return specs;
}

std::vector<context_spec> derive_truncation_specs(const context_spec& base,
                                                  const truncation_params& params,
                                                  uint64_t seed) {
    if (params.fractions.empty()) throw std::invalid_argument("no truncation fractions given");
    if (base.order.empty()) throw std::invalid_argument("base context is empty");
    size_t n = base.order.size();
    int last = base.order.back();

    std::vector<context_spec> specs;
    for (size_t fi = 0; fi < params.fractions.size(); ++fi) {
        double f = params.fractions[fi];
        if (!(f > 0.0 && f < 1.0)) {
            throw std::invalid_argument("truncation fraction must lie strictly between 0 and 1");
        }
        size_t retain = static_cast<size_t>(std::llround((1.0 - f) * static_cast<double>(n)));
        if (retain == 0 || retain >= n) {
            throw std::invalid_argument("truncation fraction leaves a degenerate context");
        }

        for (int variant = 0; variant < (params.both_last_variants ? 2 : 1); ++variant) {
            bool keep_last = variant == 0;
            uint64_t sub_seed = derive_seed(seed, "truncation",
                                            std::to_string(fi) + (keep_last ? ":same" : ":diff"));
            std::mt19937_64 gen(sub_seed);

            // choose retained examples among the first n-1; the original final
            // example is forced in or out by the variant
            std::vector<size_t> head_positions(n - 1);
            for (size_t i = 0; i + 1 < n; ++i) head_positions[i] = i;
            size_t from_head = keep_last ? retain - 1 : retain;
            if (from_head > head_positions.size()) {
                throw std::invalid_argument("truncation cannot satisfy last-example variant");
            }
            std::vector<size_t> chosen = sample_without_replacement(n - 1, from_head, gen);
            std::sort(chosen.begin(), chosen.end());

            context_spec spec = base;
            spec.seed = sub_seed;
            spec.keep_last_flag = keep_last;
            spec.order.clear();
            spec.included.clear();
            for (size_t pos : chosen) spec.order.push_back(base.order[pos]);
            if (keep_last) spec.order.push_back(last);
            spec.included = spec.order;
            specs.push_back(std::move(spec));
        }
    }
    return specs;
}

bool template_supported(const std::string& template_id) {
    return template_id == "llama3" || template_id == "olmo";
}

std::string render_raw(const rendered_prompt& prompt, const std::string& template_id) {
    if (!template_supported(template_id)) {
        throw std::invalid_argument("unknown template_id '" + template_id + "'");
    }
    std::string out;
    if (template_id == "llama3") {
        for (const auto& t : prompt.turns) {
            out += "<|start_header_id|>";
            out += t.role == turn_role::user ? "user" : "assistant";
            out += "<|end_header_id|>\n\n";
            out += t.text;
            out += "<|eot_id|>";
        }
        out += "<|start_header_id|>assistant<|end_header_id|>\n\n";
    } else {  // olmo
        for (const auto& t : prompt.turns) {
            if (t.role == turn_role::user) {
                out += "<|user|>\n";
                out += t.text;
                out += '\n';
            } else {
                out += "<|assistant|>\n";
                out += t.text;
                out += "<|endoftext|>\n";
            }
        }
        out += "<|assistant|>\n";
    }
    return out;
}

std::string serialize_chat(const rendered_prompt& prompt) {
    std::string out;
    for (const auto& t : prompt.turns) {
        out += t.role == turn_role::user ? 'u' : 'a';
        out += '\x1f';
        out += t.text;
        out += '\x1e';
    }
    return out;
}

}  // namespace qm
