#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "uqac/chain.hpp"
#include "uqac/errors.hpp"
#include "uqac/runtime/adapter.hpp"
#include "uqac/trace.hpp"

namespace uqac::confidence {

struct ReducedEntry {
    std::size_t position = 0;  // substituted position; unused for the original entry
    TokenId token = 0;
    double candidate_prob = 0.0;  // original-distribution probability of `token` at `position`
    double joint = 0.0;           // filled in by marginalized_confidence
    bool original = false;
    bool scored = false;
};

// Entry 0 is the original assignment; every other entry alters exactly one
// filtered-chain position to a candidate above the capture floor.
struct ReducedSpace {
    std::vector<ReducedEntry> entries;

    [[nodiscard]] std::size_t size() const noexcept { return entries.size(); }
};

struct ConfidenceScores {
    double p_attn = 0.0;
    double p_sim = 0.0;
    double p_marg = 0.0;
    double p_attn_avg = 0.0;
    double p_sim_avg = 0.0;
};

// Scoring an entry failed; carries the entries scored before the failure.
class PartialSpaceError : public Error {
public:
    PartialSpaceError(const std::string& what, ReducedSpace partial) : Error(what), partial_(std::move(partial)) {}
    [[nodiscard]] const ReducedSpace& partial() const noexcept { return partial_; }

private:
    ReducedSpace partial_;
};

// Product of the trace's original-context conditionals at `positions`; 1 for none.
[[nodiscard]] double joint_over_positions(const Trace& trace, std::span<const std::size_t> positions);
[[nodiscard]] double mean_over_positions(const Trace& trace, std::span<const std::size_t> positions);

// Sorted union of `chain_positions` and the answer positions.
[[nodiscard]] std::vector<std::size_t> with_answer(const Trace& trace, std::span<const std::size_t> chain_positions);

[[nodiscard]] double attn_approx(const Trace& trace, const chain::AttentionChain& chain);
[[nodiscard]] double sim_approx(const Trace& trace, const chain::AttentionChain& filtered);

[[nodiscard]] ReducedSpace build_reduced_space(const Trace& trace, const chain::AttentionChain& filtered);

struct MarginalResult {
    double value = 0.0;    // clamped to [0, 1]
    double raw_sum = 0.0;  // before clamping
    ReducedSpace space;    // with every joint filled in
};

// Sum of joints over the reduced space. The original entry contributes
// P_sim; each substitution entry costs one scoring pass (or none when no
// later position needs re-scoring). Entries run on up to `threads` workers.
[[nodiscard]] MarginalResult marginalized_confidence(const Trace& trace, const chain::AttentionChain& filtered,
                                                     ReducedSpace space, const runtime::RuntimeAdapter& adapter,
                                                     std::size_t threads = 1);

// Arithmetic means of the conditionals over chain ∪ answer and filtered ∪ answer.
struct AveragedVariants {
    double p_attn_avg = 0.0;
    double p_sim_avg = 0.0;
};
[[nodiscard]] AveragedVariants averaged_variants(const Trace& trace, const chain::AttentionChain& chain,
                                                 const chain::AttentionChain& filtered);

}  // namespace uqac::confidence
