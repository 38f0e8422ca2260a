#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uqac/datasets.hpp"
#include "uqac/runtime/adapter.hpp"
#include "uqac/trace.hpp"

namespace uqac::baselines {

struct BaselineScores {
    double p_ans_joint = 0.0;
    double p_resp_joint = 0.0;
    double p_ans_mean = 0.0;
    double p_resp_mean = 0.0;
    double entropy_resp = 0.0;
    double entropy_ans = 0.0;
    double entropy_resp_norm = 0.0;
    double entropy_ans_norm = 0.0;
    std::optional<double> self_consistency;
    std::optional<double> verbalized;
    bool verbalized_parse_failed = false;
};

[[nodiscard]] double ans_joint(const Trace& trace);
[[nodiscard]] double resp_joint(const Trace& trace);
[[nodiscard]] double ans_mean(const Trace& trace);
[[nodiscard]] double resp_mean(const Trace& trace);
[[nodiscard]] double predictive_entropy(const Trace& trace);
[[nodiscard]] double normalized_entropy(const Trace& trace);
[[nodiscard]] double answer_entropy(const Trace& trace);
[[nodiscard]] double normalized_answer_entropy(const Trace& trace);

// Every trace-only baseline; self-consistency and verbalized are left empty.
[[nodiscard]] BaselineScores trace_baselines(const Trace& trace);

// Fraction of `n_expected` samples whose extracted answer the judge accepts
// as equivalent to `main_answer`. Missing and unextractable samples count as
// disagreement.
[[nodiscard]] double agreement_fraction(std::span<const std::optional<std::string>> sample_answers,
                                        std::string_view main_answer, datasets::DatasetTag tag,
                                        std::size_t n_expected);

struct SelfConsistencyConfig {
    std::size_t n_samples = 5;
    double temperature = 0.5;
    double top_p = 1.0;
    std::size_t max_new_tokens = 1024;
    std::uint64_t seed = 0;
};

struct SelfConsistencyResult {
    double score = 0.0;
    std::size_t generated = 0;  // samples that completed
    std::vector<std::optional<std::string>> answers;
};

[[nodiscard]] SelfConsistencyResult self_consistency(std::span<const TokenId> instr, std::string_view main_answer,
                                                     datasets::DatasetTag tag, const runtime::RuntimeAdapter& adapter,
                                                     const SelfConsistencyConfig& cfg);

struct VerbalizedResult {
    double value = 0.5;
    bool parse_failed = true;
    std::string reply;
};

// First integer in `reply`, divided by 100 and clamped to [0, 1]; 0.5 with
// parse_failed when the reply has no digits.
[[nodiscard]] VerbalizedResult parse_verbalized(std::string_view reply);

// Built-in follow-up template with {prompt} and {response} placeholders.
[[nodiscard]] const std::string& default_verbalized_template();
[[nodiscard]] std::string render_verbalized_prompt(std::string_view tmpl, std::string_view prompt,
                                                   std::string_view response);

[[nodiscard]] VerbalizedResult verbalized(std::string_view prompt_text, std::string_view response_text,
                                          const runtime::RuntimeAdapter& adapter, std::string_view tmpl,
                                          std::size_t max_new_tokens = 16);

}  // namespace uqac::baselines
