#include "uqac/gamma.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "uqac/errors.hpp"

namespace uqac::gamma {

chain::ReweightFactors default_gamma() {
    return chain::ReweightFactors{std::vector<double>(kDefaultGamma.begin(), kDefaultGamma.end())};
}

CurveAccumulator::CurveAccumulator(std::size_t window) : window_(window), acc_(window, 0.0) {
    if (window == 0) throw ConfigError("attention curve window must be positive");
}

void CurveAccumulator::add(const Trace& t) {
    if (!t.has_attention()) throw IncompleteTraceError("trace " + t.instance_id + " has no attention rows");
    if (t.n_resp() < window_) {
        ++stats_.traces_skipped;
        return;
    }
    ++stats_.traces_used;
    for (std::size_t p = std::max(t.n_instr, window_); p < t.n_total(); ++p) {
        for (std::size_t l = 0; l < t.n_layers; ++l) {
            for (std::size_t h = 0; h < t.n_heads; ++h) {
                const auto row = t.attention_row(p, l, h);
                const std::size_t n = row.size();
                for (std::size_t i = 0; i < window_; ++i) acc_[i] += row[n - 1 - i];
                ++stats_.rows_used;
            }
        }
    }
}

AttentionCurve CurveAccumulator::finish() const {
    if (stats_.traces_skipped) {
        spdlog::warn("attention curve: skipped {} response(s) shorter than {} tokens", stats_.traces_skipped, window_);
    }
    if (stats_.rows_used == 0) throw DerivationError("no trace long enough for the attention window");
    AttentionCurve out = stats_;
    out.curve.resize(window_);
    for (std::size_t i = 0; i < window_; ++i) out.curve[i] = acc_[i] / static_cast<double>(stats_.rows_used);
    return out;
}

AttentionCurve mean_attention_curve(std::span<const Trace* const> traces, std::size_t window) {
    CurveAccumulator acc(window);
    for (const Trace* t : traces) acc.add(*t);
    return acc.finish();
}

GammaFit fit_gamma(std::span<const double> curve, std::size_t c) {
    const std::size_t n = curve.size();
    if (c == 0) throw DerivationError("C must be positive");
    if (n < c + 1) throw DerivationError("attention curve shorter than C + 1");
    GammaFit fit;
    fit.anchor_near = c + 1;
    fit.anchor_far = (n - c) / 2;
    if (fit.anchor_far < 1 || fit.anchor_far > n || fit.anchor_far == fit.anchor_near) {
        throw DerivationError("curve of length " + std::to_string(n) + " gives no distinct second anchor for C = " +
                              std::to_string(c));
    }
    auto a = [&](std::size_t i) { return curve[i - 1]; };  // 1-based view
    const double y1 = a(fit.anchor_near), y2 = a(fit.anchor_far);
    if (!(y1 > 0.0) || !(y2 > 0.0)) throw DerivationError("fit anchors must be positive");
    const double x1 = static_cast<double>(fit.anchor_near), x2 = static_cast<double>(fit.anchor_far);
    fit.slope = (y2 - y1) / (x2 - x1);
    fit.intercept = y1 - fit.slope * x1;
    fit.gamma.assign(c, 0.0);
    for (std::size_t i = 1; i <= c; ++i) {
        const double denom = a(i);
        if (!(denom > 0.0)) throw DerivationError("zero mean attention at recency " + std::to_string(i));
        const double g = fit.intercept + fit.slope * static_cast<double>(i);
        const double ratio = g / denom;
        // rounding-level overshoot is clamped silently; only real excursions are counted
        if (ratio < -1e-12 || ratio > 1.0 + 1e-12) ++fit.clamped;
        fit.gamma[c - i] = std::clamp(ratio, 0.0, 1.0);
    }
    return fit;
}

void write_gamma_file(const std::filesystem::path& path, const GammaFit& fit, const AttentionCurve& curve) {
    nlohmann::json j;
    j["gamma"] = fit.gamma;
    j["c"] = fit.gamma.size();
    j["fit"] = {{"anchor_near", fit.anchor_near},
                {"anchor_far", fit.anchor_far},
                {"slope", fit.slope},
                {"intercept", fit.intercept},
                {"clamped", fit.clamped}};
    j["curve"] = curve.curve;
    j["traces_used"] = curve.traces_used;
    j["traces_skipped"] = curve.traces_skipped;
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

chain::ReweightFactors read_gamma_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read gamma file " + path.string());
    chain::ReweightFactors f;
    try {
        const auto j = nlohmann::json::parse(in);
        f.gamma = j.at("gamma").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed gamma file " + path.string() + ": " + e.what());
    }
    f.validate(false);
    return f;
}

}  // namespace uqac::gamma
