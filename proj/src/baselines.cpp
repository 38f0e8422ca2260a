#include "uqac/baselines.hpp"

#include <algorithm>
#include <cctype>

#include <spdlog/spdlog.h>

#include "uqac/errors.hpp"

namespace uqac::baselines {

extern const char* const kEmbeddedVerbalizedPrompt;  // generated from config/verbalized_prompt.txt

namespace {

AnswerSpan answer_of(const Trace& trace) {
    if (!trace.answer) throw IncompleteTraceError("trace has no answer span");
    return *trace.answer;
}

double product(const Trace& t, std::size_t b, std::size_t e) {
    double acc = 1.0;
    for (std::size_t p = b; p < e; ++p) acc *= t.prob_at(p);
    return acc;
}

double mean(const Trace& t, std::size_t b, std::size_t e) {
    if (e <= b) return 0.0;
    double acc = 0.0;
    for (std::size_t p = b; p < e; ++p) acc += t.prob_at(p);
    return acc / static_cast<double>(e - b);
}

double entropy_sum(const Trace& t, std::size_t b, std::size_t e) {
    double acc = 0.0;
    for (std::size_t p = b; p < e; ++p) acc += t.entropy_at(p);
    return acc;
}

}  // namespace

double ans_joint(const Trace& trace) {
    const auto a = answer_of(trace);
    return product(trace, a.start, a.end);
}

double resp_joint(const Trace& trace) { return product(trace, trace.n_instr, trace.n_total()); }

double ans_mean(const Trace& trace) {
    const auto a = answer_of(trace);
    return mean(trace, a.start, a.end);
}

double resp_mean(const Trace& trace) { return mean(trace, trace.n_instr, trace.n_total()); }

double predictive_entropy(const Trace& trace) { return entropy_sum(trace, trace.n_instr, trace.n_total()); }

double normalized_entropy(const Trace& trace) {
    return trace.n_resp() == 0 ? 0.0 : predictive_entropy(trace) / static_cast<double>(trace.n_resp());
}

double answer_entropy(const Trace& trace) {
    const auto a = answer_of(trace);
    return entropy_sum(trace, a.start, a.end);
}

double normalized_answer_entropy(const Trace& trace) {
    const auto a = answer_of(trace);
    return a.end > a.start ? answer_entropy(trace) / static_cast<double>(a.end - a.start) : 0.0;
}

BaselineScores trace_baselines(const Trace& trace) {
    BaselineScores s;
    s.p_ans_joint = ans_joint(trace);
    s.p_resp_joint = resp_joint(trace);
    s.p_ans_mean = ans_mean(trace);
    s.p_resp_mean = resp_mean(trace);
    s.entropy_resp = predictive_entropy(trace);
    s.entropy_ans = answer_entropy(trace);
    s.entropy_resp_norm = normalized_entropy(trace);
    s.entropy_ans_norm = normalized_answer_entropy(trace);
    return s;
}

double agreement_fraction(std::span<const std::optional<std::string>> sample_answers, std::string_view main_answer,
                          datasets::DatasetTag tag, std::size_t n_expected) {
    if (n_expected == 0) throw ConfigError("self-consistency needs at least one sample");
    std::size_t agree = 0;
    for (const auto& a : sample_answers) {
        if (a && datasets::judge(*a, main_answer, tag)) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(n_expected);
}

SelfConsistencyResult self_consistency(std::span<const TokenId> instr, std::string_view main_answer,
                                       datasets::DatasetTag tag, const runtime::RuntimeAdapter& adapter,
                                       const SelfConsistencyConfig& cfg) {
    GenerationConfig gen;
    gen.max_new_tokens = cfg.max_new_tokens;
    gen.temperature = cfg.temperature;
    gen.top_p = cfg.top_p;
    gen.n_samples = cfg.n_samples;
    gen.seed = cfg.seed;
    gen.validate();

    SelfConsistencyResult r;
    const auto& tok = adapter.model().tokenizer();
    for (std::size_t k = 0; k < cfg.n_samples; ++k) {
        try {
            const auto seq = adapter.generate(instr, gen, runtime::sample_seed(cfg.seed, k));
            ++r.generated;
            const auto ex = datasets::extract_answer(tok.decode(seq), tag);
            r.answers.push_back(ex.success ? std::optional<std::string>(ex.canonical) : std::nullopt);
        } catch (const Error& e) {
            spdlog::warn("self-consistency sample {} failed: {}", k, e.what());
            r.answers.emplace_back(std::nullopt);
        }
    }
    r.score = agreement_fraction(r.answers, main_answer, tag, cfg.n_samples);
    return r;
}

VerbalizedResult parse_verbalized(std::string_view reply) {
    VerbalizedResult r;
    r.reply = std::string(reply);
    std::size_t i = 0;
    while (i < reply.size() && !std::isdigit(static_cast<unsigned char>(reply[i]))) ++i;
    if (i == reply.size()) return r;
    long long v = 0;
    while (i < reply.size() && std::isdigit(static_cast<unsigned char>(reply[i]))) {
        v = std::min<long long>(v * 10 + (reply[i] - '0'), 1000000);
        ++i;
    }
    r.value = std::clamp(static_cast<double>(v) / 100.0, 0.0, 1.0);
    r.parse_failed = false;
    return r;
}

const std::string& default_verbalized_template() {
    static const std::string tmpl = [] {
        std::string s = kEmbeddedVerbalizedPrompt;
        while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
        return s;
    }();
    return tmpl;
}

std::string render_verbalized_prompt(std::string_view tmpl, std::string_view prompt, std::string_view response) {
    std::string out;
    for (std::size_t i = 0; i < tmpl.size();) {
        if (tmpl.substr(i, 8) == "{prompt}") {
            out += prompt;
            i += 8;
        } else if (tmpl.substr(i, 10) == "{response}") {
            out += response;
            i += 10;
        } else {
            out += tmpl[i++];
        }
    }
    return out;
}

VerbalizedResult verbalized(std::string_view prompt_text, std::string_view response_text,
                            const runtime::RuntimeAdapter& adapter, std::string_view tmpl,
                            std::size_t max_new_tokens) {
    const auto& tok = adapter.model().tokenizer();
    const auto ids = tok.encode(render_verbalized_prompt(tmpl, prompt_text, response_text));
    GenerationConfig gen;
    gen.max_new_tokens = max_new_tokens;
    gen.temperature = 0.0;
    const auto reply = adapter.generate(ids, gen, 0);
    auto r = parse_verbalized(tok.decode(reply));
    if (r.parse_failed) spdlog::debug("verbalized confidence reply has no integer: '{}'", r.reply);
    return r;
}

}  // namespace uqac::baselines
