#include "uqac/confidence.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

namespace uqac::confidence {

double joint_over_positions(const Trace& trace, std::span<const std::size_t> positions) {
    double p = 1.0;
    for (std::size_t pos : positions) p *= trace.prob_at(pos);
    return p;
}

double mean_over_positions(const Trace& trace, std::span<const std::size_t> positions) {
    if (positions.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t pos : positions) s += trace.prob_at(pos);
    return s / static_cast<double>(positions.size());
}

std::vector<std::size_t> with_answer(const Trace& trace, std::span<const std::size_t> chain_positions) {
    if (!trace.answer) throw IncompleteTraceError("trace has no answer span");
    std::vector<std::size_t> out(chain_positions.begin(), chain_positions.end());
    for (std::size_t p = trace.answer->start; p < trace.answer->end; ++p) out.push_back(p);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double attn_approx(const Trace& trace, const chain::AttentionChain& chain) {
    return joint_over_positions(trace, with_answer(trace, chain.positions));
}

double sim_approx(const Trace& trace, const chain::AttentionChain& filtered) {
    return joint_over_positions(trace, with_answer(trace, filtered.positions));
}

ReducedSpace build_reduced_space(const Trace& trace, const chain::AttentionChain& filtered) {
    ReducedSpace space;
    ReducedEntry orig;
    orig.original = true;
    space.entries.push_back(orig);
    for (std::size_t pos : filtered.positions) {
        const TokenId chosen = trace.tokens[pos];
        for (const auto& c : trace.candidates_at(pos)) {
            if (c.token == chosen || !(c.prob > trace.candidate_floor)) continue;
            ReducedEntry e;
            e.position = pos;
            e.token = c.token;
            e.candidate_prob = c.prob;
            space.entries.push_back(e);
        }
    }
    return space;
}

namespace {

// Joint of chain' ∪ answer with `e.position` substituted: original
// conditionals before it, the candidate's own probability at it, re-scored
// conditionals after it.
double score_entry(const Trace& trace, const std::vector<std::size_t>& eval_set, const ReducedEntry& e,
                   const runtime::RuntimeAdapter& adapter) {
    std::vector<std::size_t> later;
    double prefix = 1.0;
    for (std::size_t p : eval_set) {
        if (p < e.position) {
            prefix *= trace.prob_at(p);
        } else if (p > e.position) {
            later.push_back(p);
        }
    }
    double suffix = 1.0;
    if (!later.empty()) {
        const auto probs = adapter.score_with_substitution(trace, e.position, e.token, later);
        for (std::size_t p : later) suffix *= probs.at(p);
    }
    return prefix * e.candidate_prob * suffix;
}

}  // namespace

MarginalResult marginalized_confidence(const Trace& trace, const chain::AttentionChain& filtered, ReducedSpace space,
                                       const runtime::RuntimeAdapter& adapter, std::size_t threads) {
    const auto eval_set = with_answer(trace, filtered.positions);
    const double p_sim = joint_over_positions(trace, eval_set);

    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < space.entries.size(); ++i) {
        auto& e = space.entries[i];
        if (e.original) {
            e.joint = p_sim;
            e.scored = true;
        } else {
            pending.push_back(i);
        }
    }

    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (std::size_t k = next++; k < pending.size(); k = next++) {
            {
                std::lock_guard lock(err_mu);
                if (first_error) return;
            }
            auto& e = space.entries[pending[k]];
            try {
                e.joint = score_entry(trace, eval_set, e, adapter);
                e.scored = true;
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    const std::size_t n_workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(pending.size(), 1));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) {
        std::string what = "scoring a reduced-space entry failed";
        try {
            std::rethrow_exception(first_error);
        } catch (const std::exception& ex) {
            what += std::string(": ") + ex.what();
        } catch (...) {
        }
        ReducedSpace partial;
        for (const auto& e : space.entries) {
            if (e.scored) partial.entries.push_back(e);
        }
        throw PartialSpaceError(what, std::move(partial));
    }

    MarginalResult r;
    for (const auto& e : space.entries) r.raw_sum += e.joint;  // fixed order keeps the sum deterministic
    if (r.raw_sum > 1.0 + 1e-3) {
        spdlog::warn("{}: reduced-space mass {:.6f} exceeds 1; clamping", trace.instance_id, r.raw_sum);
    }
    r.value = std::clamp(r.raw_sum, 0.0, 1.0);
    r.space = std::move(space);
    return r;
}

AveragedVariants averaged_variants(const Trace& trace, const chain::AttentionChain& chain,
                                   const chain::AttentionChain& filtered) {
    return {mean_over_positions(trace, with_answer(trace, chain.positions)),
            mean_over_positions(trace, with_answer(trace, filtered.positions))};
}

}  // namespace uqac::confidence
