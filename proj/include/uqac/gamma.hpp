#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "uqac/chain.hpp"
#include "uqac/trace.hpp"

namespace uqac::gamma {

// Factors derived once from GSM8k traces of a 1B Llama model and used for
// every model and dataset by default.
inline constexpr std::array<double, 10> kDefaultGamma = {0.93925344, 0.87378443, 0.81274293, 0.73914525,
                                                         0.67549127, 0.59304059, 0.46061748, 0.32959151,
                                                         0.20938152, 0.16644488};

[[nodiscard]] chain::ReweightFactors default_gamma();

struct AttentionCurve {
    // curve[i] is the mean weight on the token i+1 places back from the
    // query (curve[0] = the query token itself), averaged over layers, heads
    // and every generated position whose row covers the window.
    std::vector<double> curve;
    std::size_t traces_used = 0;
    std::size_t traces_skipped = 0;  // responses shorter than the window
    std::size_t rows_used = 0;       // (position, layer, head) rows averaged
};

// Streaming form of mean_attention_curve for corpora that do not fit in memory.
class CurveAccumulator {
public:
    explicit CurveAccumulator(std::size_t window = 50);
    void add(const Trace& trace);
    // Throws DerivationError when no trace covered the window.
    [[nodiscard]] AttentionCurve finish() const;

private:
    std::size_t window_;
    std::vector<double> acc_;
    AttentionCurve stats_;
};

[[nodiscard]] AttentionCurve mean_attention_curve(std::span<const Trace* const> traces, std::size_t window = 50);

struct GammaFit {
    std::vector<double> gamma;  // gamma.back() multiplies the newest entry
    // 1-based anchor indices into the curve and the line through them
    std::size_t anchor_near = 0;
    std::size_t anchor_far = 0;
    double slope = 0.0;
    double intercept = 0.0;
    std::size_t clamped = 0;  // ratios pulled back into [0, 1]
};

// Line g through (C+1, a[C+1]) and (floor((N-C)/2), a[floor((N-C)/2)]) with
// a the 1-based curve of length N; gamma[C-i] = g(i) / a[i] for i = 1..C,
// clamped to [0, 1]. Throws DerivationError on non-positive anchors or a zero
// denominator.
[[nodiscard]] GammaFit fit_gamma(std::span<const double> curve, std::size_t c = 10);

// {"gamma": [...], "c": C, plus optional provenance fields}.
void write_gamma_file(const std::filesystem::path& path, const GammaFit& fit, const AttentionCurve& curve);
// Reads a gamma file; entries must lie in [0, 1] (monotonicity is not required).
[[nodiscard]] chain::ReweightFactors read_gamma_file(const std::filesystem::path& path);

}  // namespace uqac::gamma
