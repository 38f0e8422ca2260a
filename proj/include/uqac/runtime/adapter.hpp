#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "uqac/runtime/model.hpp"
#include "uqac/trace.hpp"

namespace uqac::runtime {

// Generate/score front end over a LanguageModel. Counts every forward pass it
// issues so callers can check the per-instance cost of marginalization.
class RuntimeAdapter {
public:
    explicit RuntimeAdapter(const LanguageModel& model) : model_(model) {}

    [[nodiscard]] const LanguageModel& model() const noexcept { return model_; }

    // Greedy when cfg.temperature == 0. Captures per-position conditional
    // probabilities, full-vocabulary entropy, candidates above the 0.01 floor,
    // every layer/head attention row and last-layer hidden states. Full
    // distributions are discarded after capture.
    [[nodiscard]] Trace generate_with_trace(std::span<const TokenId> instr, const GenerationConfig& cfg) const;

    // Teacher-forced conditionals at `eval_positions` for the trace's sequence
    // with tokens[position] replaced by `new_token`. The substituted position
    // itself reports the original distribution's probability of `new_token`.
    [[nodiscard]] std::map<std::size_t, double> score_with_substitution(const Trace& trace, std::size_t position,
                                                                      TokenId new_token,
                                                                      std::span<const std::size_t> eval_positions) const;

    // cfg.n_samples independent response token sequences (end-of-sequence dropped).
    [[nodiscard]] std::vector<std::vector<TokenId>> sample_answers(std::span<const TokenId> instr,
                                                                   const GenerationConfig& cfg) const;

    // One plain generation without capture.
    [[nodiscard]] std::vector<TokenId> generate(std::span<const TokenId> instr, const GenerationConfig& cfg,
                                                std::uint64_t seed) const;

    [[nodiscard]] std::size_t scoring_passes() const noexcept { return scoring_passes_.load(); }
    [[nodiscard]] std::size_t generation_passes() const noexcept { return generation_passes_.load(); }

private:
    const LanguageModel& model_;
    mutable std::atomic<std::size_t> scoring_passes_{0};
    mutable std::atomic<std::size_t> generation_passes_{0};
};

// Token choice rule shared by all generation paths: argmax (lowest id on ties)
// at temperature 0, otherwise temperature-scaled nucleus sampling with `u` in [0, 1).
[[nodiscard]] TokenId choose_token(std::span<const double> probs, double temperature, double top_p, double u);

// Seed of the k-th independent sample drawn from a base seed.
[[nodiscard]] std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t k);

// Deterministic [0, 1) stream used for sampling.
class SampleStream {
public:
    explicit SampleStream(std::uint64_t seed) : state_(seed) {}
    double next();

private:
    std::uint64_t state_;
};

}  // namespace uqac::runtime
