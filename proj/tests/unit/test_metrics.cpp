#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "support/oracles.hpp"
#include "uqac/errors.hpp"
#include "uqac/metrics.hpp"

using namespace uqac;
using namespace uqac::metrics;

namespace {

std::vector<EvalRecord> records_from(const testing::CalibratedSample& s) {
    std::vector<EvalRecord> out;
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
        EvalRecord r;
        r.instance_id = "r" + std::to_string(i);
        r.dataset = "gsm8k";
        r.correct = s.labels[i];
        r.scores["uqac_sim"] = s.scores[i];
        r.scores["resp_joint"] = s.scores[i] * s.scores[i];
        r.scores["entropy_resp"] = 3.0 * (1.0 - s.scores[i]);
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST_CASE("auroc oracles") {
    CHECK(auroc(std::vector<double>{1, 1, 0, 0}, {true, true, false, false}) == 1.0);
    CHECK(auroc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, {true, false, true, false}) == 0.5);
    CHECK(auroc(std::vector<double>{0.9, 0.5, 0.1}, {true, true, false}) == 1.0);
    CHECK(auroc(std::vector<double>{0.1, 0.9}, {true, false}) == 0.0);
    CHECK_THROWS_AS((void)auroc(std::vector<double>{0.1, 0.9}, {true, true}), DegenerateEvaluationError);

    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> coarse(0, 9);  // many ties
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t n = 2 + rep % 60;
        std::vector<double> s(n);
        std::vector<bool> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = coarse(rng) / 10.0;
            y[i] = rng() % 2;
        }
        y[0] = true;
        y[1] = false;
        const double a = auroc(s, y);
        CHECK(a == doctest::Approx(testing::pairwise_auroc(s, y)).epsilon(1e-12));
        // invariant under a strictly increasing transform
        std::vector<double> t(n);
        for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
        CHECK(auroc(t, y) == a);
    }
}

TEST_CASE("bin edges: right-closed bins, zero in the first") {
    CHECK(bin_index(0.0, 20) == 0);
    CHECK(bin_index(0.05, 20) == 0);
    CHECK(bin_index(0.050000001, 20) == 1);
    CHECK(bin_index(1.0, 20) == 19);
    CHECK(bin_index(0.95, 20) == 18);
    CHECK(bin_index(0.7, 10) == 6);
    for (std::size_t s = 0; s < 20; ++s) {
        const double upper = static_cast<double>(s + 1) / 20.0;
        CHECK(bin_index(upper, 20) == s);
        CHECK(bin_index(std::nextafter(upper, 2.0), 20) == std::min<std::size_t>(s + 1, 19));
    }
}

TEST_CASE("ece oracles") {
    CHECK(ece(std::vector<double>{1, 0, 1, 0}, {true, false, true, false}) == 0.0);
    std::vector<double> seventy(10, 0.7);
    std::vector<bool> seven = {true, true, true, true, true, true, true, false, false, false};
    CHECK(ece(seventy, seven) == 0.0);
    std::vector<double> ninety(1000, 0.9);
    std::vector<bool> half(1000);
    for (std::size_t i = 0; i < half.size(); ++i) half[i] = i % 2;
    CHECK(ece(ninety, half) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK_THROWS_AS((void)ece(std::vector<double>{}, {}), DegenerateEvaluationError);

    const auto table = ece_table(std::vector<double>{-0.5, 1.5, 0.3}, {true, false, true});
    CHECK(table.clamped == 2);
    CHECK(table.bins[0].count == 1);
    CHECK(table.bins[19].count == 1);

    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 1 + rep % 100;
        std::vector<double> s(n);
        std::vector<bool> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = rep % 3 == 0 ? std::round(u(rng) * 20.0) / 20.0 : u(rng);  // include exact edges
            y[i] = u(rng) < 0.5;
        }
        const auto t = ece_table(s, y);
        CHECK(t.ece == doctest::Approx(testing::scan_ece(s, y, 20)).epsilon(1e-12));
        double mass = 0.0;
        std::size_t count = 0;
        for (const auto& b : t.bins) {
            mass += b.mass;
            count += b.count;
        }
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(count == n);
        CHECK(t.ece >= 0.0);
        CHECK(t.ece <= 1.0);
    }
}

TEST_CASE("calibrated generator yields small ECE") {
    const auto s = testing::calibrated_generator(10000, 2024);
    CHECK(ece(s.scores, s.labels) <= 0.03);
}

TEST_CASE("balanced subsampling: sizes, determinism, class balance") {
    std::vector<bool> y;
    for (int i = 0; i < 600; ++i) y.push_back(true);
    for (int i = 0; i < 400; ++i) y.push_back(false);
    const auto a = balanced_subsample(y, 0);
    CHECK(a.size() == 800);
    CHECK(std::is_sorted(a.begin(), a.end()));
    CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == a.size());
    CHECK(std::count_if(a.begin(), a.end(), [&](std::size_t i) { return y[i]; }) == 400);
    CHECK(balanced_subsample(y, 0) == a);
    CHECK(balanced_subsample(y, 1) != a);

    std::vector<bool> big(1800);
    for (std::size_t i = 0; i < big.size(); ++i) big[i] = i < 900;
    const auto b = balanced_subsample(big, 3);
    CHECK(b.size() == 1000);
    CHECK(std::count_if(b.begin(), b.end(), [&](std::size_t i) { return big[i]; }) == 500);
    CHECK_THROWS_AS((void)balanced_subsample(std::vector<bool>(5, true), 0), DegenerateEvaluationError);

    // each element of the larger class is drawn with probability n / size
    std::vector<int> hits(600, 0);
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        for (std::size_t i : balanced_subsample(y, seed)) {
            if (i < 600) ++hits[i];
        }
    }
    for (int h : hits) CHECK(std::abs(h / 2000.0 - 400.0 / 600.0) < 0.06);
}

TEST_CASE("method registry") {
    CHECK(all_method_names().size() == 15);
    CHECK(method_spec("entropy_resp").invert);
    CHECK_FALSE(method_spec("entropy_resp").ece_applicable);
    CHECK(method_spec("entropy_resp_norm").ece_applicable);
    CHECK_THROWS_AS((void)method_spec("bogus"), ConfigError);
}

TEST_CASE("evaluation records: JSON round trip and malformed lines") {
    EvalRecord r;
    r.instance_id = "gsm8k-00001";
    r.dataset = "gsm8k";
    r.extracted_answer = "18";
    r.gold_answer = "18";
    r.correct = true;
    r.scores = {{"uqac_sim", 0.125}, {"resp_joint", 1e-30}};
    r.diagnostics = {{"S_size", 4}};
    const auto back = record_from_json(nlohmann::json::parse(to_json(r).dump()));
    CHECK(back.instance_id == r.instance_id);
    CHECK(back.scores == r.scores);
    CHECK(back.diagnostics == r.diagnostics);
    CHECK_THROWS_AS((void)record_from_json(nlohmann::json{{"instance_id", 1}}), FormatError);

    const auto path = std::filesystem::temp_directory_path() / "uqac-test-records.jsonl";
    {
        std::ofstream out(path);
        out << to_json(r).dump() << "\n\n" << to_json(r).dump() << "\n";
    }
    CHECK(read_records(path.string()).size() == 2);
    {
        std::ofstream out(path, std::ios::app);
        out << "{not json\n";
    }
    CHECK_THROWS_AS((void)read_records(path.string()), FormatError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS((void)read_records("/nonexistent/records.jsonl"), LoadError);
}

TEST_CASE("evaluate: matches direct metric calls per seed and aggregates") {
    const auto sample = testing::calibrated_generator(3000, 5);
    const auto recs = records_from(sample);
    const std::vector<std::string> methods = {"uqac_sim", "entropy_resp", "self_consistency"};
    const std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    const auto reps = evaluate(recs, methods, seeds);
    REQUIRE(reps.size() == 3);

    std::vector<double> aurocs;
    for (std::uint64_t seed : seeds) {
        const auto idx = balanced_subsample(sample.labels, seed);
        std::vector<double> s;
        std::vector<bool> y;
        for (std::size_t i : idx) {
            s.push_back(sample.scores[i]);
            y.push_back(sample.labels[i]);
        }
        aurocs.push_back(testing::pairwise_auroc(s, y));
        CHECK(reps[0].seeds[seed].auroc == doctest::Approx(aurocs.back()).epsilon(1e-12));
        CHECK(*reps[0].seeds[seed].ece == doctest::Approx(testing::scan_ece(s, y, 20)).epsilon(1e-12));
        CHECK(reps[0].seeds[seed].n_per_class == 500);
    }
    double m = 0, ss = 0;
    for (double a : aurocs) m += a / 5.0;
    for (double a : aurocs) ss += (a - m) * (a - m) / 5.0;
    CHECK(reps[0].auroc_mean == doctest::Approx(m).epsilon(1e-12));
    CHECK(reps[0].auroc_std == doctest::Approx(std::sqrt(ss)).epsilon(1e-9));
    CHECK(reps[0].bins.size() == 20);

    // entropy: inverted, no ECE, same ranking as the score it was derived from
    CHECK_FALSE(reps[1].ece_mean.has_value());
    CHECK(reps[1].auroc_mean == doctest::Approx(reps[0].auroc_mean).epsilon(1e-12));
    // missing score: error for that method only
    CHECK(reps[2].error.has_value());
    CHECK_FALSE(reps[0].error.has_value());

    const auto j = report_to_json(reps[0]);
    CHECK(j["seeds"].size() == 5);
    CHECK(j["bins"].size() == 20);
    CHECK(report_to_json(reps[2]).contains("error"));
    const auto csv = bins_csv(reps[0]);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);
    const auto table = render_table(reps, "toy / gsm8k");
    CHECK(table.find("UQAC P_sim") != std::string::npos);
    CHECK(table.find("n/a") != std::string::npos);
}

TEST_CASE("evaluate: identical subsets across seeds give zero spread") {
    testing::CalibratedSample s;
    for (int i = 0; i < 200; ++i) {
        s.scores.push_back((i % 17) / 17.0);
        s.labels.push_back(i % 2 == 0);
    }
    const auto recs = records_from(s);
    const std::vector<std::string> methods = {"uqac_sim"};
    const std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    const auto rep = evaluate(recs, methods, seeds).at(0);
    CHECK(rep.auroc_std == 0.0);
    CHECK(*rep.ece_std == 0.0);

    std::vector<EvalRecord> one_class(recs.begin(), recs.begin() + 1);
    const auto bad = evaluate(one_class, methods, seeds).at(0);
    CHECK(bad.error.has_value());
}
