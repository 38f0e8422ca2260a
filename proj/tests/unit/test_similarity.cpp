#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "support/synthetic.hpp"
#include "uqac/errors.hpp"
#include "uqac/similarity.hpp"

using namespace uqac;
using namespace uqac::similarity;

namespace {

chain::AttentionChain chain_of(std::vector<std::size_t> positions) {
    chain::AttentionChain c;
    c.discovery_order = positions;
    c.positions = std::move(positions);
    std::sort(c.positions.begin(), c.positions.end());
    return c;
}

}  // namespace

TEST_CASE("cosine: parallel, orthogonal, zero-norm") {
    const std::vector<float> a = {1, 2, 3}, b = {2, 4, 6}, o = {0, 0, 0}, x = {1, 0, 0}, y = {0, 1, 0};
    CHECK(cosine(a, b) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine(x, y) == 0.0);
    CHECK(cosine(a, o) == 0.0);
    const std::vector<float> short_vec = {1, 0};
    CHECK_THROWS_AS((void)cosine(a, short_vec), FormatError);
}

TEST_CASE("similarity_weights: sums of cosines over answer states") {
    const float r = static_cast<float>(1.0 / std::sqrt(2.0));
    const std::vector<float> e1 = {1, 0}, e2 = {0, 1}, diag = {r, r};
    const std::vector<std::span<const float>> ans = {e1, e2};
    const std::vector<std::span<const float>> chain = {diag, e1};
    const auto w = similarity_weights(ans, chain);
    CHECK(w[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-7));
    CHECK(w[1] == doctest::Approx(1.0).epsilon(1e-12));

    // identical states everywhere: w = L_ans
    const std::vector<std::span<const float>> same = {diag, diag, diag};
    CHECK(similarity_weights(same, std::vector<std::span<const float>>{diag})[0] == doctest::Approx(3.0));
}

TEST_CASE("similarity_weights on a trace reads the answer and chain states") {
    Trace t = testing::blank_trace(2, 5, 1, 1, 3);
    t.answer = AnswerSpan{5, 7};
    std::copy_n(std::begin({1.0f, 0.0f, 0.0f}), 3, testing::hidden_mut(t, 5).begin());
    std::copy_n(std::begin({0.0f, 1.0f, 0.0f}), 3, testing::hidden_mut(t, 6).begin());
    std::copy_n(std::begin({1.0f, 1.0f, 0.0f}), 3, testing::hidden_mut(t, 3).begin());
    std::copy_n(std::begin({0.0f, 0.0f, -2.0f}), 3, testing::hidden_mut(t, 2).begin());
    const auto w = similarity_weights(t, chain_of({2, 3}));
    CHECK(w[0] == 0.0);
    CHECK(w[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-7));

    Trace no_hidden = t;
    no_hidden.hidden.clear();
    CHECK_THROWS_AS((void)similarity_weights(no_hidden, chain_of({2})), IncompleteTraceError);
}

TEST_CASE("filter_chain: worked example and threshold contract") {
    const auto c = chain_of({2, 4, 6, 8});
    SimilarityFilterConfig cfg;
    cfg.max_positions = 2;
    const std::vector<double> w = {3.0, -0.1, 2.0, 0.5};
    CHECK(filter_chain(c, w, cfg).positions == std::vector<std::size_t>{2, 6});

    cfg.max_positions = 10;
    CHECK(filter_chain(c, std::vector<double>{1, 2, 3, 4}, cfg).positions == c.positions);
    CHECK(filter_chain(c, std::vector<double>{0, -1, 0, -2}, cfg).empty());
    CHECK(filter_chain(c, w, cfg).positions == std::vector<std::size_t>{2, 6, 8});

    // ties at the cut: the earlier position wins
    cfg.max_positions = 1;
    CHECK(filter_chain(c, std::vector<double>{0.5, 0.5, 0.5, 0.5}, cfg).positions == std::vector<std::size_t>{2});

    cfg.tau = 0.6;
    cfg.max_positions = 10;
    CHECK(filter_chain(c, w, cfg).positions == std::vector<std::size_t>{2, 6});
    CHECK_THROWS_AS((void)filter_chain(c, std::vector<double>{1.0}, cfg), FormatError);
    cfg.max_positions = 0;
    CHECK_THROWS_AS((void)filter_chain(c, w, cfg), ConfigError);
}

TEST_CASE("filter_chain keeps discovery order for the surviving positions") {
    chain::AttentionChain c;
    c.positions = {3, 5, 9};
    c.discovery_order = {9, 3, 5};
    const auto f = filter_chain(c, std::vector<double>{1.0, -1.0, 2.0}, {});
    CHECK(f.positions == std::vector<std::size_t>{3, 9});
    CHECK(f.discovery_order == std::vector<std::size_t>{9, 3});
}

TEST_CASE("filter properties on random traces: subset, bound, threshold, scale invariance") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    for (int rep = 0; rep < 300; ++rep) {
        Trace t = testing::random_trace(rng);
        std::vector<std::size_t> cot;
        for (std::size_t p = t.n_instr; p < t.answer->start; ++p) cot.push_back(p);
        std::shuffle(cot.begin(), cot.end(), rng);
        cot.resize(std::min<std::size_t>(cot.size(), 1 + rep % 15));
        const auto c = chain_of(cot);
        const SimilarityFilterConfig cfg;
        const auto w = similarity_weights(t, c);
        const auto f = filter_chain(c, w, cfg);
        CHECK(f.size() <= cfg.max_positions);
        CHECK(std::includes(c.positions.begin(), c.positions.end(), f.positions.begin(), f.positions.end()));
        for (std::size_t i = 0; i < c.size(); ++i) {
            CHECK(std::abs(w[i]) <= static_cast<double>(t.n_ans()) + 1e-9);
            if (std::binary_search(f.positions.begin(), f.positions.end(), c.positions[i])) CHECK(w[i] > cfg.tau);
        }

        // arbitrary positive scale: weights agree to rounding
        Trace scaled = t;
        const auto k = static_cast<float>(scale(rng));
        for (auto& x : scaled.hidden) x *= k;
        const auto ws = similarity_weights(scaled, c);
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(ws[i] == doctest::Approx(w[i]).epsilon(1e-5));
        // power-of-two scale is exact in floating point, so the filtered chain is identical
        Trace pow2 = t;
        const float k2 = std::ldexp(1.0f, static_cast<int>(rep % 13) - 6);
        for (auto& x : pow2.hidden) x *= k2;
        const auto w2 = similarity_weights(pow2, c);
        CHECK(w2 == w);
        CHECK(filter_chain(c, w2, cfg).positions == f.positions);
    }
}
