#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "uqac/chain.hpp"
#include "uqac/trace.hpp"

namespace uqac::similarity {

struct SimilarityFilterConfig {
    std::size_t max_positions = 10;  // L_attn_max
    double tau = 0.0;                // keep positions with w > tau

    void validate() const;
};

// Cosine similarity; 0 when either vector has zero norm.
[[nodiscard]] double cosine(std::span<const float> a, std::span<const float> b);

// w[n] = sum over answer states m of cos(h_m, h_n), one entry per chain state.
[[nodiscard]] std::vector<double> similarity_weights(std::span<const std::span<const float>> answer_states,
                                                     std::span<const std::span<const float>> chain_states);

// Same, reading the trace's last-layer states at the answer and chain positions.
[[nodiscard]] std::vector<double> similarity_weights(const Trace& trace, const chain::AttentionChain& chain);

// Keeps the chain positions ranked in the top max_positions by w (ties: earlier
// position) whose weight exceeds tau, in their original order. Steps are kept
// as provenance; discovery_order is filtered to the kept positions.
[[nodiscard]] chain::AttentionChain filter_chain(const chain::AttentionChain& chain, std::span<const double> w,
                                                 const SimilarityFilterConfig& cfg);

}  // namespace uqac::similarity
