#include "uqac/chain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "uqac/errors.hpp"
#include "uqac/simd/kernels.hpp"

namespace uqac::chain {

extern const char* const kEmbeddedStopwords;  // generated from data/stopwords.txt

void ReweightFactors::validate(bool require_monotone) const {
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        if (!(gamma[i] >= 0.0 && gamma[i] <= 1.0)) {
            throw ConfigError("gamma[" + std::to_string(i) + "] outside [0, 1]");
        }
        if (require_monotone && i > 0 && gamma[i] > gamma[i - 1]) {
            throw ConfigError("gamma must be non-increasing (entry " + std::to_string(i) + ")");
        }
    }
}

void ChainConfig::validate() const {
    if (top_heads < 1) throw ConfigError("K (top_heads) must be >= 1");
    if (target_buffer < 1) throw ConfigError("L_tgt (target_buffer) must be >= 1");
    if (!(theta >= 0.0)) throw ConfigError("theta must be >= 0");
}

std::size_t AttentionChain::productive_steps() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(steps.begin(), steps.end(), [](const ChainStep& s) { return !s.targets.empty(); }));
}

namespace {

std::vector<double> reweight_in_place(std::vector<double> out, const ReweightFactors& gamma) {
    const auto& k = simd::kernels();
    const std::size_t t = out.size();
    if (t == 0) throw DegenerateAttentionError("empty attention row");
    // The newest min(C, T-1) entries take the tail of gamma; BOS is never scaled,
    // it is masked below.
    const std::size_t c = gamma.size();
    const std::size_t n_scaled = std::min(c, t - 1);
    for (std::size_t j = 0; j < n_scaled; ++j) out[t - 1 - j] *= gamma.gamma[c - 1 - j];
    out[0] = 0.0;
    const double total = k.sum_f64(out.data(), t);
    if (!(total > 0.0)) throw DegenerateAttentionError("attention row has no mass after BOS masking");
    k.scale_f64(1.0 / total, out.data(), t);
    return out;
}

std::string strip_lower(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out(s.substr(b, e - b));
    for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

std::vector<std::string> parse_stopwords(std::istream& in) {
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::string w = strip_lower(line);
        if (!w.empty()) words.push_back(std::move(w));
    }
    return words;
}

}  // namespace

std::vector<double> reweight_attention(std::span<const double> alpha, const ReweightFactors& gamma) {
    return reweight_in_place(std::vector<double>(alpha.begin(), alpha.end()), gamma);
}

std::vector<double> reweight_attention(std::span<const float> alpha, const ReweightFactors& gamma) {
    return reweight_in_place(std::vector<double>(alpha.begin(), alpha.end()), gamma);
}

double attention_entropy(std::span<const double> row) {
    return simd::kernels().entropy_f64(row.data(), row.size());
}

std::vector<std::size_t> select_heads(std::span<const HeadRow> rows, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) scored.emplace_back(attention_entropy(rows[i].weights), i);
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        const auto& ra = rows[a.second];
        const auto& rb = rows[b.second];
        return std::tie(ra.layer, ra.head) < std::tie(rb.layer, rb.head);
    });
    const std::size_t n = std::min(k, scored.size());
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = scored[i].second;
    return out;
}

std::vector<double> aggregate_heads(std::span<const std::vector<double>> rows) {
    if (rows.empty()) return {};
    std::vector<double> out = rows.front();
    const auto& k = simd::kernels();
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != out.size()) throw FormatError("aggregated attention rows differ in length");
        k.max_inplace_f64(rows[i].data(), out.data(), out.size());
    }
    return out;
}

TargetSelection identify_targets(std::span<const std::vector<double>> alpha_stars, const ChainConfig& cfg,
                                 std::size_t chain_len, const TargetRegion& region) {
    TargetSelection sel;
    std::size_t width = 0;
    for (const auto& r : alpha_stars) width = std::max(width, r.size());
    if (width == 0) return sel;

    std::vector<double> phi(width, 0.0);
    const auto& k = simd::kernels();
    for (const auto& r : alpha_stars) k.add_f64(r.data(), phi.data(), r.size());

    std::vector<std::size_t> order(width);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t n_rank = std::min(cfg.target_buffer, width);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_rank), order.end(),
                      [&](std::size_t a, std::size_t b) { return phi[a] != phi[b] ? phi[a] > phi[b] : a < b; });

    const bool theta_active = chain_len >= cfg.theta_delay;
    for (std::size_t i = 0; i < n_rank; ++i) {
        const std::size_t pos = order[i];
        sel.ranked.emplace_back(pos, phi[pos]);
        if (!(phi[pos] > 0.0)) continue;
        if (theta_active && !(phi[pos] > cfg.theta)) continue;
        if (pos < region.tokens.size() && cfg.stopwords.count(region.tokens[pos])) continue;
        if (pos < region.cot_begin) {
            sel.instruction_hits.push_back(pos);
            continue;
        }
        if (pos >= region.cot_end) continue;
        sel.targets.push_back(pos);
    }
    return sel;
}

std::vector<double> aggregated_source_row(const Trace& trace, std::size_t source, const ChainConfig& cfg,
                                          const ReweightFactors& gamma) {
    std::vector<HeadRow> rows;
    rows.reserve(trace.n_layers * trace.n_heads);
    for (std::size_t l = 0; l < trace.n_layers; ++l) {
        for (std::size_t h = 0; h < trace.n_heads; ++h) {
            try {
                rows.push_back({l, h, reweight_attention(trace.source_row(source, l, h), gamma)});
            } catch (const DegenerateAttentionError&) {
                // the head carries no usable mass at this source; skip it
            }
        }
    }
    if (rows.empty()) return {};
    const auto picked = select_heads(rows, cfg.top_heads);
    std::vector<std::vector<double>> selected;
    selected.reserve(picked.size());
    for (std::size_t i : picked) selected.push_back(std::move(rows[i].weights));
    return aggregate_heads(selected);
}

AttentionChain backtrack(const Trace& trace, const ChainConfig& cfg, const ReweightFactors& gamma) {
    cfg.validate();
    if (!trace.answer) throw IncompleteTraceError("trace has no answer span");
    if (!trace.has_attention()) throw IncompleteTraceError("trace has no attention rows");

    const TargetRegion region{trace.tokens, trace.n_instr, trace.answer->start};
    AttentionChain chain;
    std::set<std::size_t> visited;
    std::map<std::size_t, std::vector<double>> cache;

    std::vector<std::size_t> sources;
    for (std::size_t i = trace.answer->start; i < trace.answer->end; ++i) sources.push_back(i - 1);

    while (!sources.empty()) {
        std::vector<std::vector<double>> stars;
        stars.reserve(sources.size());
        for (std::size_t s : sources) {
            auto it = cache.find(s);
            if (it == cache.end()) it = cache.emplace(s, aggregated_source_row(trace, s, cfg, gamma)).first;
            if (!it->second.empty()) stars.push_back(it->second);
        }
        auto sel = identify_targets(stars, cfg, chain.discovery_order.size(), region);

        ChainStep step;
        step.sources = sources;
        step.ranked = std::move(sel.ranked);
        step.instruction_hits = std::move(sel.instruction_hits);
        for (std::size_t t : sel.targets) {
            if (visited.insert(t).second) step.targets.push_back(t);
        }
        const bool done = step.targets.empty();
        sources.clear();
        for (std::size_t t : step.targets) {
            chain.discovery_order.push_back(t);
            sources.push_back(t - 1);
        }
        chain.steps.push_back(std::move(step));
        if (done) break;
    }
    chain.positions.assign(visited.begin(), visited.end());
    return chain;
}

const std::vector<std::string>& default_stopword_list() {
    static const std::vector<std::string> words = [] {
        std::istringstream in(kEmbeddedStopwords);
        return parse_stopwords(in);
    }();
    return words;
}

std::vector<std::string> read_stopword_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot read stopword file " + path);
    return parse_stopwords(in);
}

bool is_stopword_text(std::string_view decoded, const std::unordered_set<std::string>& words) {
    const std::string s = strip_lower(decoded);
    if (s.empty()) return true;
    if (words.count(s)) return true;
    // Runs of listed punctuation (".\n\n", "),") are stopwords too.
    return std::all_of(s.begin(), s.end(), [&](char ch) {
        return std::ispunct(static_cast<unsigned char>(ch)) && words.count(std::string(1, ch));
    });
}

std::unordered_set<TokenId> stopword_ids(const runtime::Tokenizer& tokenizer, const std::vector<std::string>& words) {
    const std::unordered_set<std::string> set(words.begin(), words.end());
    std::unordered_set<TokenId> ids;
    for (std::size_t v = 0; v < tokenizer.vocab_size(); ++v) {
        const auto id = static_cast<TokenId>(v);
        if (is_stopword_text(tokenizer.token_bytes(id), set)) ids.insert(id);
    }
    return ids;
}

}  // namespace uqac::chain
