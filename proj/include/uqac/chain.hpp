#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "uqac/runtime/tokenizer.hpp"
#include "uqac/trace.hpp"

namespace uqac::chain {

// Multipliers for the C most recent attention entries. gamma.back() applies
// to the newest position.
struct ReweightFactors {
    std::vector<double> gamma;

    [[nodiscard]] std::size_t size() const noexcept { return gamma.size(); }
    // Entries in [0, 1]; with `require_monotone`, non-increasing as well.
    void validate(bool require_monotone = true) const;
};

struct ChainConfig {
    std::size_t top_heads = 16;     // K
    std::size_t target_buffer = 3;  // L_tgt
    double theta = 0.5;
    std::size_t theta_delay = 5;    // theta ignored while the chain is shorter than this
    std::unordered_set<TokenId> stopwords;

    void validate() const;
};

// Attention row of one head at one source position.
struct HeadRow {
    std::size_t layer = 0;
    std::size_t head = 0;
    std::vector<double> weights;
};

struct ChainStep {
    std::vector<std::size_t> sources;
    std::vector<std::pair<std::size_t, double>> ranked;  // top-L_tgt positions with their cumulative weight
    std::vector<std::size_t> targets;                     // new chain positions found in this step
    std::vector<std::size_t> instruction_hits;
};

struct AttentionChain {
    std::vector<std::size_t> positions;        // strictly increasing
    std::vector<std::size_t> discovery_order;  // concatenation of the step targets
    std::vector<ChainStep> steps;

    [[nodiscard]] std::size_t size() const noexcept { return positions.size(); }
    [[nodiscard]] bool empty() const noexcept { return positions.empty(); }
    // Number of steps that produced new positions.
    [[nodiscard]] std::size_t productive_steps() const noexcept;
};

// Which positions identify_targets may emit and how to test stopwords.
struct TargetRegion {
    std::span<const TokenId> tokens;
    std::size_t cot_begin = 0;  // first CoT position (= instruction length)
    std::size_t cot_end = 0;    // one past the last CoT position
};

struct TargetSelection {
    std::vector<std::pair<std::size_t, double>> ranked;
    std::vector<std::size_t> targets;
    std::vector<std::size_t> instruction_hits;
};

// Scales the newest min(C, T-1) entries by the tail of gamma, zeroes the BOS
// entry and renormalizes. Throws DegenerateAttentionError when no mass is left.
[[nodiscard]] std::vector<double> reweight_attention(std::span<const double> alpha, const ReweightFactors& gamma);
[[nodiscard]] std::vector<double> reweight_attention(std::span<const float> alpha, const ReweightFactors& gamma);

// Indices into `rows` of the K lowest-entropy heads, ascending entropy, ties
// broken by (layer, head). Returns every row when fewer than K are present.
[[nodiscard]] std::vector<std::size_t> select_heads(std::span<const HeadRow> rows, std::size_t k);

[[nodiscard]] double attention_entropy(std::span<const double> row);

// Element-wise maximum over equal-length rows.
[[nodiscard]] std::vector<double> aggregate_heads(std::span<const std::vector<double>> rows);

// Cumulative weight phi over all source rows (shorter rows count as zero past
// their end), top-L_tgt ranking (ties: smaller position), then the theta,
// positivity, stopword and CoT-region filters.
[[nodiscard]] TargetSelection identify_targets(std::span<const std::vector<double>> alpha_stars,
                                               const ChainConfig& cfg, std::size_t chain_len,
                                               const TargetRegion& region);

// Reweighted, head-selected, aggregated row for the query at `source`.
// Returns an empty vector when every head is degenerate.
[[nodiscard]] std::vector<double> aggregated_source_row(const Trace& trace, std::size_t source,
                                                        const ChainConfig& cfg, const ReweightFactors& gamma);

// Iterates the backtracking step from the answer tokens until no new CoT
// position is found.
[[nodiscard]] AttentionChain backtrack(const Trace& trace, const ChainConfig& cfg, const ReweightFactors& gamma);

// Default English stopword and punctuation list shipped with the library.
[[nodiscard]] const std::vector<std::string>& default_stopword_list();
[[nodiscard]] std::vector<std::string> read_stopword_file(const std::string& path);

// Token ids whose decoded, whitespace-stripped, lowercased text is in `words`,
// is empty, or is made only of punctuation characters listed in `words`.
[[nodiscard]] std::unordered_set<TokenId> stopword_ids(const runtime::Tokenizer& tokenizer,
                                                       const std::vector<std::string>& words);
[[nodiscard]] bool is_stopword_text(std::string_view decoded, const std::unordered_set<std::string>& words);

}  // namespace uqac::chain
