#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qm/corpus.hpp"

namespace qm {

// Decoding parameters are fixed for the whole harness and folded into every
// canonical prompt hash.
inline constexpr double k_temperature = 1.0;
inline constexpr int k_top_k = 10;

// Every question is prepended with this instruction (straight apostrophes;
// one canonical byte form for API payloads).
inline constexpr std::string_view k_instruction_prefix = "Please respond with 'yes' or 'no': ";
// Zero-shot prompts append a newline plus this prefix after the question.
inline constexpr std::string_view k_zero_shot_suffix = "Your response:";

enum class turn_role { user, assistant };

struct conversation_turn {
    turn_role role;
    std::string text;
};

enum class render_mode { chat_messages, raw_template };

struct render_options {
    render_mode mode = render_mode::chat_messages;
    std::optional<std::string> template_id;  // "llama3" | "olmo" when mode == raw_template
};

enum class answer_source_kind { human, random };

struct context_spec {
    std::vector<int> order;     // permutation of in-context ordinals
    std::vector<int> included;  // subset of `order`'s domain
    answer_source_kind answer_source = answer_source_kind::human;
    std::optional<uint64_t> seed;  // required when answer_source == random
    bool keep_last_flag = true;    // original final in-context example kept in final position

    // Short content digest for manifests.
    std::string digest() const;
};

struct rendered_prompt {
    std::vector<conversation_turn> turns;  // ends in the target user turn
    render_mode mode = render_mode::chat_messages;
    std::optional<std::string> template_id;
    std::string target_id;
    std::string target_text;  // question text in the final turn (sans prefix/suffix)
    bool zero_shot = false;
    std::string canonical_hash;  // sha256 of rendered bytes + decoding params
};

struct build_log {
    std::vector<std::string> skipped_turns;  // "respondent r12: no answer for 3.2, turn skipped"
};

// Default context: all in-context (issue) questions in questionnaire order,
// answered from the human matrix.
context_spec default_context(const answer_matrix& matrix);

rendered_prompt build_qm(const answer_matrix& matrix, const respondent& resp,
                         const question& target, const context_spec& spec,
                         const render_options& opts = {}, build_log* log = nullptr);

rendered_prompt build_zero_shot(const question& target, const render_options& opts = {});

// Replaces only the final turn's question text; all in-context turns are
// byte-identical. Throws on empty paraphrase.
rendered_prompt apply_paraphrase(const rendered_prompt& prompt, const std::string& paraphrase_text);

struct permutation_params {
    int count = 6;
    int same_last_count = 3;
};

struct truncation_params {
    std::vector<double> fractions;   // each in (0,1)
    bool both_last_variants = true;  // emit keep-last and drop-last variants per fraction
};

// `count` seeded random permutations of the base order, exactly
// `same_last_count` of which keep the original final example in place.
std::vector<context_spec> derive_permutation_specs(const context_spec& base,
                                                   const permutation_params& params,
                                                   uint64_t seed);

// For each fraction f, specs retaining round((1-f) * n) examples in original
// order; with both_last_variants, one spec keeps the original final example
// and one removes it.
std::vector<context_spec> derive_truncation_specs(const context_spec& base,
                                                  const truncation_params& params,
                                                  uint64_t seed);

bool template_supported(const std::string& template_id);

// Bit-exact raw rendering for base-model querying; ends after the assistant
// header so the next token is the model's answer.
std::string render_raw(const rendered_prompt& prompt, const std::string& template_id);

// Chat-mode canonical byte serialization (also the hash input).
std::string serialize_chat(const rendered_prompt& prompt);

}  // namespace qm
