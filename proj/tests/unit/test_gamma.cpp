#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "support/oracles.hpp"
#include "support/synthetic.hpp"
#include "uqac/errors.hpp"
#include "uqac/gamma.hpp"

using namespace uqac;
using namespace uqac::gamma;

TEST_CASE("default gamma is the published vector, bit for bit") {
    const std::vector<double> published = {0.93925344, 0.87378443, 0.81274293, 0.73914525, 0.67549127,
                                           0.59304059, 0.46061748, 0.32959151, 0.20938152, 0.16644488};
    const auto g = default_gamma();
    REQUIRE(g.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(g.gamma[i] == published[i]);
    CHECK_NOTHROW(g.validate(true));
}

TEST_CASE("fit_gamma: constructed ratio oracle gives 0.5 everywhere") {
    const std::size_t n = 50, c = 10;
    // line g(i) = 0.05 - 0.0004 i; curve is 2 g on the first C entries, g beyond
    auto line = [](double i) { return 0.05 - 0.0004 * i; };
    std::vector<double> curve(n);
    for (std::size_t i = 1; i <= n; ++i) curve[i - 1] = (i <= c ? 2.0 : 1.0) * line(static_cast<double>(i));
    const auto fit = fit_gamma(curve, c);
    CHECK(fit.anchor_near == 11);
    CHECK(fit.anchor_far == 20);
    CHECK(fit.slope == doctest::Approx(-0.0004).epsilon(1e-12));
    CHECK(fit.clamped == 0);
    for (double v : fit.gamma) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("fit_gamma: linear curve recovers unit ratios; clamping") {
    std::vector<double> curve(50);
    for (std::size_t i = 1; i <= 50; ++i) curve[i - 1] = 0.06 - 0.001 * static_cast<double>(i);
    for (double v : fit_gamma(curve).gamma) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    // a dip at recency 1 pushes the ratio above 1
    curve[0] = 0.01;
    const auto fit = fit_gamma(curve);
    CHECK(fit.gamma.back() == 1.0);
    CHECK(fit.clamped == 1);

    std::vector<double> zero_anchor(50, 0.02);
    zero_anchor[10] = 0.0;
    CHECK_THROWS_AS((void)fit_gamma(zero_anchor), DerivationError);
    std::vector<double> zero_denom(50, 0.02);
    zero_denom[3] = 0.0;
    CHECK_THROWS_AS((void)fit_gamma(zero_denom), DerivationError);
    CHECK_THROWS_AS((void)fit_gamma(std::vector<double>(8, 0.1)), DerivationError);
}

TEST_CASE("fit_gamma: agrees with the reference and is scale-covariant on random curves") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.001, 0.2), k(0.01, 100.0);
    for (int rep = 0; rep < 1000; ++rep) {
        std::vector<double> curve(50);
        for (auto& x : curve) x = u(rng);
        const std::size_t c = 1 + rep % 12;
        const auto fit = fit_gamma(curve, c);
        const auto ref = testing::reference_fit(curve, c);
        for (std::size_t i = 0; i < c; ++i) {
            CHECK(fit.gamma[i] == doctest::Approx(ref[i]).epsilon(1e-12));
            CHECK(fit.gamma[i] >= 0.0);
            CHECK(fit.gamma[i] <= 1.0);
        }
        const double s = k(rng);
        std::vector<double> scaled(curve);
        for (auto& x : scaled) x *= s;
        const auto fs = fit_gamma(scaled, c);
        for (std::size_t i = 0; i < c; ++i) CHECK(std::abs(fs.gamma[i] - fit.gamma[i]) <= 1e-9);
    }
}

TEST_CASE("attention curve: window slice on a hand-built 60-token trace") {
    // instruction 2 tokens, 58 generated; rows hold 1000 p + j so every entry is identifiable
    Trace t = testing::blank_trace(2, 58);
    for (std::size_t p = 2; p < 60; ++p) {
        auto row = testing::row_at(t, p);
        for (std::size_t j = 0; j < p; ++j) row[j] = static_cast<float>(1000 * p + j);
    }
    const Trace* corpus[] = {&t};
    const auto curve = mean_attention_curve(corpus, 50);
    // only rows p = 50..59 cover 50 entries; entry i sits at j = p - 1 - i; mean p = 54.5
    CHECK(curve.rows_used == 10);
    CHECK(curve.traces_used == 1);
    REQUIRE(curve.curve.size() == 50);
    for (std::size_t i = 0; i < 50; ++i) CHECK(curve.curve[i] == doctest::Approx(54500.0 + 53.5 - i).epsilon(1e-12));
}

TEST_CASE("attention curve: constant rows, linearity, short responses") {
    Trace a = testing::blank_trace(1, 60, 2, 2);
    Trace b = testing::blank_trace(1, 60, 2, 2);
    for (std::size_t p = 1; p < 61; ++p) {
        for (std::size_t l = 0; l < 2; ++l) {
            for (std::size_t h = 0; h < 2; ++h) {
                for (auto& x : testing::row_at(a, p, l, h)) x = 0.25f;
                for (auto& x : testing::row_at(b, p, l, h)) x = 0.75f;
            }
        }
    }
    const Trace* just_a[] = {&a};
    for (double v : mean_attention_curve(just_a, 50).curve) CHECK(v == 0.25);
    const Trace short_trace = testing::blank_trace(1, 20);
    const Trace* both[] = {&a, &b, &short_trace};
    const auto curve = mean_attention_curve(both, 50);
    for (double v : curve.curve) CHECK(v == doctest::Approx(0.5));
    CHECK(curve.traces_skipped == 1);
    CHECK(curve.traces_used == 2);

    const Trace* only_short[] = {&short_trace};
    CHECK_THROWS_AS((void)mean_attention_curve(only_short, 50), DerivationError);
    CHECK_THROWS_AS(CurveAccumulator(0), ConfigError);
}

TEST_CASE("gamma file round trip") {
    std::vector<double> curve(50);
    for (std::size_t i = 1; i <= 50; ++i) curve[i - 1] = 0.08 / static_cast<double>(i);
    const auto fit = fit_gamma(curve);
    AttentionCurve ac;
    ac.curve = curve;
    ac.traces_used = 3;
    const auto path = std::filesystem::temp_directory_path() / "uqac-test-gamma.json";
    write_gamma_file(path, fit, ac);
    const auto back = read_gamma_file(path);
    CHECK(back.gamma == fit.gamma);
    std::ifstream in(path);
    const auto j = nlohmann::json::parse(in);
    CHECK(j["c"] == 10);
    CHECK(j["traces_used"] == 3);

    // non-monotone but in range: accepted; out of range: rejected
    std::ofstream(path) << R"({"gamma": [0.2, 0.9, 0.5]})";
    CHECK(read_gamma_file(path).size() == 3);
    std::ofstream(path) << R"({"gamma": [0.2, 1.5]})";
    CHECK_THROWS_AS((void)read_gamma_file(path), ConfigError);
    std::ofstream(path) << R"({"g": []})";
    CHECK_THROWS_AS((void)read_gamma_file(path), ConfigError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS((void)read_gamma_file(path), ConfigError);
}
