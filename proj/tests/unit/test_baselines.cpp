#include <doctest.h>

#include <cmath>
#include <random>

#include "support/synthetic.hpp"
#include "uqac/baselines.hpp"
#include "uqac/errors.hpp"
#include "uqac/runtime/adapter.hpp"

using namespace uqac;
using namespace uqac::baselines;

TEST_CASE("probability baselines on hand values") {
    Trace t = testing::blank_trace(2, 4);
    t.answer = AnswerSpan{4, 6};
    t.cond_prob = {0.5, 0.8, 0.9, 0.9};
    CHECK(ans_joint(t) == doctest::Approx(0.81).epsilon(1e-15));
    CHECK(resp_joint(t) == doctest::Approx(0.5 * 0.8 * 0.81).epsilon(1e-15));
    CHECK(ans_mean(t) == doctest::Approx(0.9));
    CHECK(resp_mean(t) == doctest::Approx((0.5 + 0.8 + 0.9 + 0.9) / 4));

    t.answer = AnswerSpan{2, 6};  // answer covers the whole response
    CHECK(resp_joint(t) == ans_joint(t));
    t.answer = AnswerSpan{5, 6};
    t.cond_prob = {0.2, 0.8, 0.3, 0.7};
    CHECK(ans_joint(t) == 0.7);
    CHECK(resp_mean(t) == doctest::Approx(0.5));

    Trace none = testing::blank_trace(2, 2);
    CHECK_THROWS_AS((void)ans_joint(none), IncompleteTraceError);
}

TEST_CASE("entropy baselines: deterministic, uniform and a hand-computed row") {
    Trace t = testing::blank_trace(1, 2);
    t.answer = AnswerSpan{2, 3};
    t.entropy = {0.0, 0.0};
    CHECK(predictive_entropy(t) == 0.0);
    t.entropy = {std::log(4.0), std::log(4.0)};
    CHECK(predictive_entropy(t) == doctest::Approx(2 * std::log(4.0)));
    CHECK(normalized_entropy(t) == doctest::Approx(std::log(4.0)));
    CHECK(answer_entropy(t) == doctest::Approx(std::log(4.0)));
    CHECK(normalized_answer_entropy(t) == doctest::Approx(std::log(4.0)));

    // entropies stored by the runtime for a hand-built table
    runtime::TableModelSpec s;
    s.pieces = {"a", "b", "c"};
    s.rows[{0}] = {0.1, 0.6, 0.3};
    s.rows[{1}] = {0.5, 0.2, 0.3};
    const runtime::TableModel m(s);
    const runtime::RuntimeAdapter ad(m);
    GenerationConfig gc;
    gc.max_new_tokens = 2;
    Trace g = ad.generate_with_trace(std::vector<TokenId>{0}, gc);  // a -> b -> a
    g.answer = AnswerSpan{2, 3};
    const double h_a = -(0.1 * std::log(0.1) + 0.6 * std::log(0.6) + 0.3 * std::log(0.3));
    const double h_b = -(0.5 * std::log(0.5) + 0.2 * std::log(0.2) + 0.3 * std::log(0.3));
    CHECK(predictive_entropy(g) == doctest::Approx(h_a + h_b).epsilon(1e-12));
    CHECK(normalized_entropy(g) == doctest::Approx((h_a + h_b) / 2).epsilon(1e-12));
    CHECK(answer_entropy(g) == doctest::Approx(h_b).epsilon(1e-12));
}

TEST_CASE("baseline invariants on random traces") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 500; ++rep) {
        const Trace t = testing::random_trace(rng);
        const auto b = trace_baselines(t);
        CHECK(b.p_resp_joint <= b.p_ans_joint);
        CHECK(b.entropy_ans <= b.entropy_resp + 1e-12);
        CHECK(b.p_ans_joint <= b.p_ans_mean + 1e-12);
        CHECK(b.entropy_resp_norm == doctest::Approx(b.entropy_resp / static_cast<double>(t.n_resp())));
        CHECK(b.entropy_ans_norm == doctest::Approx(b.entropy_ans / static_cast<double>(t.n_ans())));
        for (double v : {b.p_ans_joint, b.p_resp_joint, b.p_ans_mean, b.p_resp_mean}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK_FALSE(b.self_consistency.has_value());
        CHECK_FALSE(b.verbalized.has_value());
    }
}

TEST_CASE("agreement fraction counts judged matches over the expected sample count") {
    using datasets::DatasetTag;
    const std::vector<std::optional<std::string>> all = {"18", "18", "18.0", "18", "18"};
    CHECK(agreement_fraction(all, "18", DatasetTag::gsm8k, 5) == 1.0);
    const std::vector<std::optional<std::string>> three = {"18", std::nullopt, "7", "18", "18"};
    CHECK(agreement_fraction(three, "18", DatasetTag::gsm8k, 5) == 0.6);
    CHECK(agreement_fraction(three, "9", DatasetTag::gsm8k, 5) == 0.0);
    const std::vector<std::optional<std::string>> short_run = {"18", "18"};  // three samples failed
    CHECK(agreement_fraction(short_run, "18", DatasetTag::gsm8k, 5) == 0.4);
    CHECK_THROWS_AS((void)agreement_fraction(all, "18", DatasetTag::gsm8k, 0), ConfigError);
}

TEST_CASE("self-consistency on a table model") {
    runtime::TableModelSpec s;
    s.pieces = {"<eos>", "Q", " 7", " 8"};
    s.eos = {0};
    s.rows[{1}] = {0.0, 0.0, 0.5, 0.5};
    s.rows[{2}] = {1.0, 0.0, 0.0, 0.0};
    s.rows[{3}] = {1.0, 0.0, 0.0, 0.0};
    const runtime::TableModel m(s);
    const runtime::RuntimeAdapter ad(m);
    const std::vector<TokenId> instr = {1};
    SelfConsistencyConfig cfg;
    cfg.max_new_tokens = 4;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        cfg.seed = seed;
        const auto r = self_consistency(instr, "7", datasets::DatasetTag::gsm8k, ad, cfg);
        CHECK(r.generated == 5);
        REQUIRE(r.answers.size() == 5);
        const double fifths = r.score * 5.0;
        CHECK(fifths == std::round(fifths));
        const auto again = self_consistency(instr, "7", datasets::DatasetTag::gsm8k, ad, cfg);
        CHECK(again.score == r.score);
        const auto other = self_consistency(instr, "8", datasets::DatasetTag::gsm8k, ad, cfg);
        CHECK(other.score + r.score == doctest::Approx(1.0));
    }

    s.rows[{1}] = {0.0, 0.0, 1.0, 0.0};
    const runtime::TableModel sure(s);
    const runtime::RuntimeAdapter ad2(sure);
    CHECK(self_consistency(instr, "7", datasets::DatasetTag::gsm8k, ad2, cfg).score == 1.0);
    CHECK(self_consistency(instr, "9", datasets::DatasetTag::gsm8k, ad2, cfg).score == 0.0);
}

TEST_CASE("verbalized confidence parsing and prompting") {
    CHECK(parse_verbalized("90").value == 0.9);
    CHECK_FALSE(parse_verbalized("90").parse_failed);
    CHECK(parse_verbalized("I am 75% sure").value == 0.75);
    CHECK(parse_verbalized("250").value == 1.0);
    const auto none = parse_verbalized("very sure");
    CHECK(none.value == 0.5);
    CHECK(none.parse_failed);

    CHECK(render_verbalized_prompt("[{prompt}|{response}]{x}", "P", "R") == "[P|R]{x}");
    const auto& tmpl = default_verbalized_template();
    CHECK(tmpl.find("{prompt}") != std::string::npos);
    CHECK(tmpl.find("{response}") != std::string::npos);

    runtime::TableModelSpec s;
    s.pieces = {"<eos>", "Q", "A", "?", "8", "5"};
    s.eos = {0};
    s.rows[{3}] = {0, 0, 0, 0, 1, 0};
    s.rows[{4}] = {0, 0, 0, 0, 0, 1};
    s.rows[{5}] = {1, 0, 0, 0, 0, 0};
    const runtime::TableModel m(s);
    const runtime::RuntimeAdapter ad(m);
    const auto r = verbalized("Q", "A", ad, "{prompt}{response}?", 8);
    CHECK(r.reply == "85");
    CHECK(r.value == 0.85);
    CHECK_FALSE(r.parse_failed);
}
