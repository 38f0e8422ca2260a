#include "uqac/trace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uqac/errors.hpp"

namespace uqac {

void GenerationConfig::validate() const {
    if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must lie in (0, 1]");
    if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
}

std::size_t Trace::gen_index(std::size_t pos) const {
    if (!is_generated(pos)) {
        throw PositionError("position " + std::to_string(pos) + " is not a generated position (range [" +
                            std::to_string(n_instr) + ", " + std::to_string(n_total()) + "))");
    }
    return pos - n_instr;
}

std::size_t Trace::n_cot() const {
    if (!answer) throw IncompleteTraceError("trace has no answer span");
    return answer->start - n_instr;
}

std::size_t Trace::n_ans() const {
    if (!answer) throw IncompleteTraceError("trace has no answer span");
    return answer->end - answer->start;
}

bool Trace::in_cot(std::size_t pos) const {
    if (!answer) throw IncompleteTraceError("trace has no answer span");
    return pos >= n_instr && pos < answer->start;
}

bool Trace::has_attention() const noexcept {
    return n_layers > 0 && n_heads > 0 && n_resp() > 0 && attention.size() == attention_floats();
}

bool Trace::has_hidden() const noexcept {
    return hidden_dim > 0 && hidden.size() == n_resp() * hidden_dim;
}

std::size_t Trace::attention_offset(std::size_t pos) const {
    // sum_{k<g} (n_instr + k) = g*n_instr + g(g-1)/2
    const std::size_t g = pos - n_instr;
    return n_layers * n_heads * (g * n_instr + g * (g - (g > 0 ? 1 : 0)) / 2);
}

std::size_t Trace::attention_floats() const {
    return attention_offset(n_total());
}

std::span<const float> Trace::attention_row(std::size_t pos, std::size_t layer, std::size_t head) const {
    if (!is_generated(pos)) {
        throw PositionError("no attention row for position " + std::to_string(pos));
    }
    if (!has_attention()) throw IncompleteTraceError("trace has no attention rows");
    if (layer >= n_layers || head >= n_heads) throw PositionError("layer/head out of range");
    const std::size_t base = attention_offset(pos) + (layer * n_heads + head) * pos;
    return {attention.data() + base, pos};
}

std::span<const float> Trace::hidden_at(std::size_t pos) const {
    const std::size_t g = gen_index(pos);
    if (!has_hidden()) throw IncompleteTraceError("trace has no hidden states");
    return {hidden.data() + g * hidden_dim, hidden_dim};
}

void validate_trace(const Trace& trace, double row_tol) {
    const std::size_t n = trace.n_resp();
    if (trace.n_instr == 0) throw FormatError("trace has an empty instruction");
    if (trace.tokens.size() < trace.n_instr) throw FormatError("token count smaller than instruction length");
    if (trace.cond_prob.size() != n || trace.entropy.size() != n || trace.top_candidates.size() != n) {
        throw FormatError("per-position arrays do not match response length");
    }
    for (std::size_t g = 0; g < n; ++g) {
        const double p = trace.cond_prob[g];
        if (!(p > 0.0 && p <= 1.0)) {
            throw FormatError("cond_prob out of (0,1] at generated index " + std::to_string(g));
        }
        if (!(trace.entropy[g] >= 0.0)) throw FormatError("negative entropy at generated index " + std::to_string(g));
        const TokenId chosen = trace.tokens[trace.n_instr + g];
        const auto& cands = trace.top_candidates[g];
        if (std::none_of(cands.begin(), cands.end(), [&](const Candidate& c) { return c.token == chosen; })) {
            throw FormatError("chosen token missing from its candidate list at generated index " + std::to_string(g));
        }
    }
    if (trace.answer) {
        const auto& a = *trace.answer;
        if (!(trace.n_instr <= a.start && a.start < a.end && a.end <= trace.n_total())) {
            throw FormatError("answer span outside the response");
        }
    }
    if (trace.has_attention()) {
        for (std::size_t pos = trace.n_instr; pos < trace.n_total(); ++pos) {
            for (std::size_t l = 0; l < trace.n_layers; ++l) {
                for (std::size_t h = 0; h < trace.n_heads; ++h) {
                    double s = 0.0;
                    for (float v : trace.attention_row(pos, l, h)) s += v;
                    if (std::abs(s - 1.0) > row_tol) {
                        throw FormatError("attention row at position " + std::to_string(pos) + " sums to " +
                                          std::to_string(s));
                    }
                }
            }
        }
    } else if (!trace.attention.empty()) {
        throw FormatError("attention buffer size does not match the trace shape");
    }
    if (!trace.hidden.empty() && !trace.has_hidden()) {
        throw FormatError("hidden buffer size does not match the trace shape");
    }
}

}  // namespace uqac
