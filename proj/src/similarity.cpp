#include "uqac/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "uqac/errors.hpp"
#include "uqac/simd/kernels.hpp"

namespace uqac::similarity {

void SimilarityFilterConfig::validate() const {
    if (max_positions < 1) throw ConfigError("L_attn_max must be >= 1");
    if (!std::isfinite(tau)) throw ConfigError("tau must be finite");
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw FormatError("cosine of vectors with different dimensions");
    const auto& k = simd::kernels();
    const double na = k.dot_f32_acc64(a.data(), a.data(), a.size());
    const double nb = k.dot_f32_acc64(b.data(), b.data(), b.size());
    if (!(na > 0.0) || !(nb > 0.0)) return 0.0;
    const double c = k.dot_f32_acc64(a.data(), b.data(), a.size()) / std::sqrt(na * nb);
    return std::clamp(c, -1.0, 1.0);
}

std::vector<double> similarity_weights(std::span<const std::span<const float>> answer_states,
                                       std::span<const std::span<const float>> chain_states) {
    std::vector<double> w(chain_states.size(), 0.0);
    for (std::size_t n = 0; n < chain_states.size(); ++n) {
        for (const auto& m : answer_states) w[n] += cosine(m, chain_states[n]);
    }
    return w;
}

std::vector<double> similarity_weights(const Trace& trace, const chain::AttentionChain& chain) {
    if (!trace.answer) throw IncompleteTraceError("trace has no answer span");
    if (!trace.has_hidden()) throw IncompleteTraceError("trace has no hidden states");
    std::vector<std::span<const float>> ans;
    for (std::size_t p = trace.answer->start; p < trace.answer->end; ++p) ans.push_back(trace.hidden_at(p));
    std::vector<std::span<const float>> cot;
    for (std::size_t p : chain.positions) cot.push_back(trace.hidden_at(p));
    return similarity_weights(ans, cot);
}

chain::AttentionChain filter_chain(const chain::AttentionChain& chain, std::span<const double> w,
                                   const SimilarityFilterConfig& cfg) {
    cfg.validate();
    if (w.size() != chain.positions.size()) {
        throw FormatError("similarity weights (" + std::to_string(w.size()) + ") do not match chain length (" +
                          std::to_string(chain.positions.size()) + ")");
    }
    // positions are sorted, so index order is position order for tie breaking
    std::vector<std::size_t> order(w.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
    std::set<std::size_t> keep;
    for (std::size_t r = 0; r < order.size() && r < cfg.max_positions; ++r) {
        if (w[order[r]] > cfg.tau) keep.insert(chain.positions[order[r]]);
    }
    chain::AttentionChain out;
    out.steps = chain.steps;
    out.positions.assign(keep.begin(), keep.end());
    for (std::size_t p : chain.discovery_order) {
        if (keep.count(p)) out.discovery_order.push_back(p);
    }
    return out;
}

}  // namespace uqac::similarity
