#include "uqac/runtime/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <string>

#include "uqac/errors.hpp"
#include "uqac/simd/kernels.hpp"

namespace uqac::runtime {

double SampleStream::next() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

TokenId choose_token(std::span<const double> probs, double temperature, double top_p, double u) {
    if (probs.empty()) throw DegenerateTraceError("empty next-token distribution");
    if (temperature <= 0.0) {
        return static_cast<TokenId>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    }
    double max_logp = -std::numeric_limits<double>::infinity();
    for (double p : probs) {
        if (p > 0.0) max_logp = std::max(max_logp, std::log(p));
    }
    std::vector<std::pair<double, TokenId>> weighted;
    weighted.reserve(probs.size());
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        const double w = std::exp((std::log(probs[i]) - max_logp) / temperature);
        weighted.emplace_back(w, static_cast<TokenId>(i));
        total += w;
    }
    std::stable_sort(weighted.begin(), weighted.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::size_t keep = weighted.size();
    if (top_p < 1.0) {
        double cum = 0.0;
        for (std::size_t i = 0; i < weighted.size(); ++i) {
            cum += weighted[i].first / total;
            if (cum >= top_p) {
                keep = i + 1;
                break;
            }
        }
    }
    double kept = 0.0;
    for (std::size_t i = 0; i < keep; ++i) kept += weighted[i].first;
    double target = u * kept;
    for (std::size_t i = 0; i < keep; ++i) {
        target -= weighted[i].first;
        if (target < 0.0) return weighted[i].second;
    }
    return weighted[keep - 1].second;
}

namespace {

void check_prompt(const LanguageModel& model, std::span<const TokenId> instr) {
    if (instr.empty()) throw ConfigError("instruction token sequence is empty");
    if (instr.size() + 1 > model.info().max_context) {
        throw TruncationError("prompt of " + std::to_string(instr.size()) + " tokens exceeds the context of " +
                              std::to_string(model.info().max_context));
    }
}

}  // namespace

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t k) {
    SampleStream s(seed ^ (0xD1B54A32D192ED03ull * (k + 1)));
    return static_cast<std::uint64_t>(s.next() * 0x1.0p53) ^ (seed << 1);
}

Trace RuntimeAdapter::generate_with_trace(std::span<const TokenId> instr, const GenerationConfig& cfg) const {
    cfg.validate();
    check_prompt(model_, instr);
    const auto& info = model_.info();
    const auto& k = simd::kernels();

    Trace t;
    t.model_name = info.name;
    t.tokens.assign(instr.begin(), instr.end());
    t.n_instr = instr.size();
    t.n_layers = info.n_layers;
    t.n_heads = info.n_heads;
    t.hidden_dim = info.hidden_dim;
    t.vocab_size = info.vocab_size;

    auto session = model_.open_session();
    ++generation_passes_;
    const StepOutput* out = nullptr;
    for (std::size_t i = 0; i < instr.size(); ++i) out = &session->append(instr[i], i + 1 == instr.size());

    SampleStream stream(cfg.seed);
    for (std::size_t step = 0; step < cfg.max_new_tokens; ++step) {
        if (session->length() >= info.max_context) {
            t.hit_context_limit = true;
            break;
        }
        const double u = cfg.temperature > 0.0 ? stream.next() : 0.0;
        const TokenId next = choose_token(out->probs, cfg.temperature, cfg.top_p, u);
        if (model_.is_eos(next)) break;

        const auto probs = out->probs;
        t.cond_prob.push_back(probs[static_cast<std::size_t>(next)]);
        const double h = k.entropy_f64(probs.data(), probs.size());
        t.entropy.push_back(std::clamp(h, 0.0, std::log(static_cast<double>(probs.size()))));
        std::vector<Candidate> cands;
        for (std::size_t v = 0; v < probs.size(); ++v) {
            if (probs[v] > t.candidate_floor || static_cast<TokenId>(v) == next) {
                cands.push_back({static_cast<TokenId>(v), probs[v]});
            }
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.prob > b.prob; });
        t.top_candidates.push_back(std::move(cands));
        t.attention.insert(t.attention.end(), out->attention.begin(), out->attention.end());
        t.hidden.insert(t.hidden.end(), out->hidden.begin(), out->hidden.end());
        t.tokens.push_back(next);

        const bool last = step + 1 == cfg.max_new_tokens;
        out = &session->append(next, !last);
    }
    if (t.n_resp() == 0) throw DegenerateTraceError("generation produced no tokens");
    t.response_text = model_.tokenizer().decode(std::span(t.tokens).subspan(t.n_instr));
    t.prompt_text = model_.tokenizer().decode(instr);
    return t;
}

std::map<std::size_t, double> RuntimeAdapter::score_with_substitution(const Trace& trace, std::size_t position,
                                                                      TokenId new_token,
                                                                      std::span<const std::size_t> eval_positions) const {
    if (!trace.is_generated(position)) {
        throw PositionError("substitution position " + std::to_string(position) + " is not a generated position");
    }
    std::map<std::size_t, double> result;
    if (eval_positions.empty()) return result;
    std::set<std::size_t> later;
    for (std::size_t e : eval_positions) {
        if (!trace.is_generated(e) || e < position) {
            throw PositionError("evaluation position " + std::to_string(e) + " must be generated and >= " +
                                std::to_string(position));
        }
        if (e > position) later.insert(e);
    }

    const bool wants_self = std::find(eval_positions.begin(), eval_positions.end(), position) != eval_positions.end();
    std::optional<double> self_prob;
    if (wants_self) {
        if (new_token == trace.tokens[position]) {
            self_prob = trace.prob_at(position);
        } else {
            for (const auto& c : trace.candidates_at(position)) {
                if (c.token == new_token) self_prob = c.prob;
            }
        }
    }

    if (later.empty() && self_prob) {
        result[position] = *self_prob;
        return result;
    }

    ++scoring_passes_;
    std::vector<TokenId> seq(trace.tokens.begin(), trace.tokens.end());
    seq[position] = new_token;
    const std::size_t last_query = later.empty() ? position - 1 : *later.rbegin() - 1;
    auto session = model_.open_session();
    for (std::size_t q = 0; q <= last_query; ++q) {
        const auto& out = session->append(seq[q], false);
        const std::size_t target = q + 1;
        if (target == position && wants_self && !self_prob) {
            self_prob = out.probs[static_cast<std::size_t>(new_token)];
        } else if (later.count(target)) {
            result[target] = out.probs[static_cast<std::size_t>(seq[target])];
        }
    }
    if (wants_self) result[position] = *self_prob;
    return result;
}

std::vector<TokenId> RuntimeAdapter::generate(std::span<const TokenId> instr, const GenerationConfig& cfg,
                                              std::uint64_t seed) const {
    cfg.validate();
    check_prompt(model_, instr);
    const auto& info = model_.info();
    auto session = model_.open_session();
    ++generation_passes_;
    const StepOutput* out = nullptr;
    for (TokenId t : instr) out = &session->append(t, false);
    SampleStream stream(seed);
    std::vector<TokenId> response;
    for (std::size_t step = 0; step < cfg.max_new_tokens && session->length() < info.max_context; ++step) {
        const double u = cfg.temperature > 0.0 ? stream.next() : 0.0;
        const TokenId next = choose_token(out->probs, cfg.temperature, cfg.top_p, u);
        if (model_.is_eos(next)) break;
        response.push_back(next);
        if (step + 1 < cfg.max_new_tokens) out = &session->append(next, false);
    }
    return response;
}

std::vector<std::vector<TokenId>> RuntimeAdapter::sample_answers(std::span<const TokenId> instr,
                                                                 const GenerationConfig& cfg) const {
    cfg.validate();
    std::vector<std::vector<TokenId>> samples;
    samples.reserve(cfg.n_samples);
    for (std::size_t k = 0; k < cfg.n_samples; ++k) samples.push_back(generate(instr, cfg, sample_seed(cfg.seed, k)));
    return samples;
}

}  // namespace uqac::runtime
