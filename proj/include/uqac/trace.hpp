#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uqac {

using TokenId = std::int32_t;

inline constexpr double kCandidateFloor = 0.01;

struct Candidate {
    TokenId token = 0;
    double prob = 0.0;
};

// [start, end) over absolute token positions.
struct AnswerSpan {
    std::size_t start = 0;
    std::size_t end = 0;
};

struct GenerationConfig {
    std::size_t max_new_tokens = 1024;
    double temperature = 0.0;
    double top_p = 1.0;
    std::size_t n_samples = 1;
    std::uint64_t seed = 0;

    // Throws ConfigError on violated invariants.
    void validate() const;
};

// One generation episode. Positions are absolute, 0-based indices into
// `tokens`; the first `n_instr` tokens are the prompt. Per-position arrays
// (cond_prob, entropy, top_candidates, hidden, attention) are indexed by the
// generated position p in [n_instr, n_total()) and describe the forward step
// whose query is token p-1, i.e. the step that produced token p.
struct Trace {
    std::string instance_id;
    std::string model_name;
    std::string prompt_text;
    std::string response_text;

    std::vector<TokenId> tokens;
    std::size_t n_instr = 0;
    std::optional<AnswerSpan> answer;
    bool hit_context_limit = false;

    std::vector<double> cond_prob;
    std::vector<double> entropy;
    double candidate_floor = kCandidateFloor;
    std::vector<std::vector<Candidate>> top_candidates;

    std::size_t n_layers = 0;
    std::size_t n_heads = 0;
    std::size_t hidden_dim = 0;
    std::size_t vocab_size = 0;
    // Ragged block per generated position p: [layer][head][p] floats.
    std::vector<float> attention;
    // [n_resp][hidden_dim]
    std::vector<float> hidden;

    [[nodiscard]] std::size_t n_total() const noexcept { return tokens.size(); }
    [[nodiscard]] std::size_t n_resp() const noexcept { return tokens.size() - n_instr; }
    [[nodiscard]] bool is_generated(std::size_t pos) const noexcept {
        return pos >= n_instr && pos < tokens.size();
    }
    // Throws PositionError for non-generated positions.
    [[nodiscard]] std::size_t gen_index(std::size_t pos) const;

    // CoT region is [n_instr, answer.start); both throw IncompleteTraceError without an answer span.
    [[nodiscard]] std::size_t n_cot() const;
    [[nodiscard]] std::size_t n_ans() const;
    [[nodiscard]] bool in_cot(std::size_t pos) const;

    [[nodiscard]] double prob_at(std::size_t pos) const { return cond_prob[gen_index(pos)]; }
    [[nodiscard]] double entropy_at(std::size_t pos) const { return entropy[gen_index(pos)]; }
    [[nodiscard]] const std::vector<Candidate>& candidates_at(std::size_t pos) const {
        return top_candidates[gen_index(pos)];
    }

    [[nodiscard]] bool has_attention() const noexcept;
    [[nodiscard]] bool has_hidden() const noexcept;

    // Floats preceding the block of generated position p.
    [[nodiscard]] std::size_t attention_offset(std::size_t pos) const;
    [[nodiscard]] std::size_t attention_floats() const;
    // Row produced while generating token `pos`; covers positions [0, pos).
    [[nodiscard]] std::span<const float> attention_row(std::size_t pos, std::size_t layer,
                                                       std::size_t head) const;
    // Row whose query is token `source` (length source + 1). Valid for
    // source in [n_instr - 1, n_total() - 1).
    [[nodiscard]] std::span<const float> source_row(std::size_t source, std::size_t layer,
                                                    std::size_t head) const {
        return attention_row(source + 1, layer, head);
    }
    [[nodiscard]] std::span<const float> hidden_at(std::size_t pos) const;
};

// Checks the capture invariants: attention rows sum to 1 within `row_tol`,
// conditional probabilities in (0, 1], entropies non-negative, the chosen token
// listed among its own candidates, consistent array sizes. Throws FormatError.
void validate_trace(const Trace& trace, double row_tol = 1e-4);

}  // namespace uqac
