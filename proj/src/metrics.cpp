#include "uqac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "uqac/errors.hpp"
#include "uqac/runtime/adapter.hpp"

namespace uqac::metrics {

using nlohmann::json;

double auroc(std::span<const double> scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw DegenerateEvaluationError("scores and labels differ in length");
    const std::size_t n = scores.size();
    const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DegenerateEvaluationError("AUROC needs both correct and incorrect instances");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Mann-Whitney U with mid-ranks; ranks are kept doubled to stay integral.
    std::uint64_t rank2_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const std::uint64_t mid2 = i + 1 + j;  // 2 * average of ranks i+1 .. j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) rank2_pos += mid2;
        }
        i = j;
    }
    const double u2 = static_cast<double>(rank2_pos) - static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u2 / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::size_t bin_index(double p, std::size_t n_bins) {
    const double s_d = static_cast<double>(n_bins);
    if (!(p > 0.0)) return 0;
    if (p >= 1.0) return n_bins - 1;
    auto s = static_cast<std::size_t>(std::ceil(p * s_d));
    s = s == 0 ? 0 : s - 1;
    // settle floating-point rounding at the edges: p must satisfy s/S < p <= (s+1)/S
    while (s > 0 && p <= static_cast<double>(s) / s_d) --s;
    while (s + 1 < n_bins && p > static_cast<double>(s + 1) / s_d) ++s;
    return s;
}

EceResult ece_table(std::span<const double> scores, const std::vector<bool>& labels, std::size_t n_bins) {
    if (scores.empty()) throw DegenerateEvaluationError("ECE of an empty score set");
    if (scores.size() != labels.size()) throw DegenerateEvaluationError("scores and labels differ in length");
    if (n_bins == 0) throw ConfigError("ECE needs at least one bin");

    EceResult r;
    std::vector<std::vector<double>> members(n_bins);
    std::vector<std::size_t> hits(n_bins, 0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        double p = scores[i];
        if (!(p >= 0.0 && p <= 1.0)) {
            p = std::isnan(p) ? 0.0 : std::clamp(p, 0.0, 1.0);
            ++r.clamped;
        }
        const std::size_t s = bin_index(p, n_bins);
        members[s].push_back(p);
        if (labels[i]) ++hits[s];
    }
    if (r.clamped) spdlog::warn("ECE: clamped {} score(s) into [0, 1]", r.clamped);

    const double n = static_cast<double>(scores.size());
    for (std::size_t s = 0; s < n_bins; ++s) {
        BinRow b;
        b.index = s;
        b.lower = static_cast<double>(s) / static_cast<double>(n_bins);
        b.upper = static_cast<double>(s + 1) / static_cast<double>(n_bins);
        b.center = (static_cast<double>(s) + 0.5) / static_cast<double>(n_bins);
        b.count = members[s].size();
        if (b.count > 0) {
            const double c = static_cast<double>(b.count);
            // offset from the first member so a single-valued bin is exact
            const double v0 = members[s].front();
            double dev = 0.0;
            for (double p : members[s]) dev += p - v0;
            b.confidence = v0 + dev / c;
            b.accuracy = static_cast<double>(hits[s]) / c;
            b.mass = c / n;
            r.ece += b.mass * std::fabs(b.accuracy - b.confidence);
        }
        r.bins.push_back(b);
    }
    return r;
}

double ece(std::span<const double> scores, const std::vector<bool>& labels, std::size_t n_bins) {
    return ece_table(scores, labels, n_bins).ece;
}

std::vector<std::size_t> balanced_subsample(const std::vector<bool>& labels, std::uint64_t seed, std::size_t cap) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) {
        throw DegenerateEvaluationError("balanced subsampling needs both correct and incorrect records");
    }
    const std::size_t n = std::min({pos.size(), neg.size(), cap});
    runtime::SampleStream rng(seed);
    auto draw = [&](std::vector<std::size_t>& v) {
        // partial Fisher-Yates: the first n slots become a uniform sample
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t span = v.size() - i;
            const auto j = i + std::min(span - 1, static_cast<std::size_t>(rng.next() * static_cast<double>(span)));
            std::swap(v[i], v[j]);
        }
        v.resize(n);
    };
    draw(pos);
    draw(neg);
    std::vector<std::size_t> out;
    out.reserve(2 * n);
    out.insert(out.end(), pos.begin(), pos.end());
    out.insert(out.end(), neg.begin(), neg.end());
    std::sort(out.begin(), out.end());
    return out;
}

const std::vector<MethodSpec>& method_registry() {
    static const std::vector<MethodSpec> reg = {
        {"uqac_attn", "UQAC P_attn", false, true},
        {"uqac_sim", "UQAC P_sim", false, true},
        {"uqac_marg", "UQAC P_M", false, true},
        {"uqac_attn_avg", "UQAC avg P_attn", false, true},
        {"uqac_sim_avg", "UQAC avg P_sim", false, true},
        {"ans_joint", "P(x_ans|x_cot,x_instr)", false, true},
        {"resp_joint", "P(x_resp|x_instr)", false, true},
        {"ans_mean", "mean P(x_ans)", false, true},
        {"resp_mean", "mean P(x_resp)", false, true},
        {"entropy_resp", "1 - H(resp)", true, false},
        {"entropy_resp_norm", "1 - H(resp)/L", true, true},
        {"entropy_ans", "1 - H(ans)", true, false},
        {"entropy_ans_norm", "1 - H(ans)/L", true, true},
        {"self_consistency", "self-consistency", false, true},
        {"verbalized", "verbalized", false, true},
    };
    return reg;
}

const MethodSpec& method_spec(std::string_view name) {
    for (const auto& m : method_registry()) {
        if (m.name == name) return m;
    }
    throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::vector<std::string> all_method_names() {
    std::vector<std::string> out;
    for (const auto& m : method_registry()) out.push_back(m.name);
    return out;
}

json to_json(const EvalRecord& r) {
    return json{{"instance_id", r.instance_id},
                {"dataset", r.dataset},
                {"extracted_answer", r.extracted_answer},
                {"gold_answer", r.gold_answer},
                {"correct", r.correct},
                {"scores", r.scores},
                {"diagnostics", r.diagnostics}};
}

EvalRecord record_from_json(const json& j) {
    try {
        EvalRecord r;
        r.instance_id = j.at("instance_id").get<std::string>();
        r.dataset = j.at("dataset").get<std::string>();
        r.extracted_answer = j.at("extracted_answer").get<std::string>();
        r.gold_answer = j.at("gold_answer").get<std::string>();
        r.correct = j.at("correct").get<bool>();
        r.scores = j.at("scores").get<std::map<std::string, double>>();
        if (j.contains("diagnostics")) r.diagnostics = j["diagnostics"];
        return r;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed evaluation record: ") + e.what());
    }
}

std::vector<EvalRecord> read_records(const std::string& jsonl_path) {
    std::ifstream in(jsonl_path);
    if (!in) throw LoadError("cannot open " + jsonl_path);
    std::vector<EvalRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw FormatError(jsonl_path + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError(jsonl_path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size()))};
}

double method_value(const EvalRecord& r, const MethodSpec& m) {
    const auto it = r.scores.find(m.name);
    if (it == r.scores.end()) {
        throw DegenerateEvaluationError("record " + r.instance_id + " has no '" + m.name + "' score");
    }
    return m.invert ? 1.0 - it->second : it->second;
}

}  // namespace

std::vector<CalibrationReport> evaluate(std::span<const EvalRecord> records, std::span<const std::string> methods,
                                        std::span<const std::uint64_t> seeds, std::size_t cap, std::size_t n_bins) {
    std::vector<bool> labels;
    for (const auto& r : records) labels.push_back(r.correct);

    std::vector<std::vector<std::size_t>> subsets;
    std::optional<std::string> subsample_error;
    try {
        for (std::uint64_t seed : seeds) subsets.push_back(balanced_subsample(labels, seed, cap));
    } catch (const DegenerateEvaluationError& e) {
        subsample_error = e.what();
    }
    std::set<std::size_t> union_idx;
    for (const auto& s : subsets) union_idx.insert(s.begin(), s.end());

    std::vector<CalibrationReport> out;
    for (const auto& name : methods) {
        const MethodSpec& spec = method_spec(name);
        CalibrationReport rep;
        rep.method = spec.name;
        rep.ece_applicable = spec.ece_applicable;
        if (subsample_error) {
            rep.error = *subsample_error;
            out.push_back(std::move(rep));
            continue;
        }
        try {
            std::vector<double> aurocs, eces;
            for (std::size_t k = 0; k < subsets.size(); ++k) {
                std::vector<double> sc;
                std::vector<bool> lbs;
                for (std::size_t i : subsets[k]) {
                    sc.push_back(method_value(records[i], spec));
                    lbs.push_back(labels[i]);
                }
                SeedResult sr;
                sr.seed = seeds[k];
                sr.n_per_class = subsets[k].size() / 2;
                sr.auroc = auroc(sc, lbs);
                aurocs.push_back(sr.auroc);
                if (spec.ece_applicable) {
                    sr.ece = ece(sc, lbs, n_bins);
                    eces.push_back(*sr.ece);
                }
                rep.seeds.push_back(sr);
            }
            std::tie(rep.auroc_mean, rep.auroc_std) = mean_std(aurocs);
            if (spec.ece_applicable) {
                const auto [m, s] = mean_std(eces);
                rep.ece_mean = m;
                rep.ece_std = s;
                std::vector<double> sc;
                std::vector<bool> lbs;
                for (std::size_t i : union_idx) {
                    sc.push_back(method_value(records[i], spec));
                    lbs.push_back(labels[i]);
                }
                rep.bins = ece_table(sc, lbs, n_bins).bins;
            }
        } catch (const Error& e) {
            rep = CalibrationReport{};
            rep.method = spec.name;
            rep.ece_applicable = spec.ece_applicable;
            rep.error = e.what();
        }
        out.push_back(std::move(rep));
    }
    return out;
}

json report_to_json(const CalibrationReport& r) {
    json j;
    j["method"] = r.method;
    j["display"] = method_spec(r.method).display;
    j["ece_applicable"] = r.ece_applicable;
    if (r.error) {
        j["error"] = *r.error;
        return j;
    }
    j["auroc"] = {{"mean", r.auroc_mean}, {"std", r.auroc_std}};
    j["ece"] = r.ece_mean ? json{{"mean", *r.ece_mean}, {"std", *r.ece_std}} : json(nullptr);
    json seeds = json::array();
    for (const auto& s : r.seeds) {
        seeds.push_back({{"seed", s.seed},
                         {"n_per_class", s.n_per_class},
                         {"auroc", s.auroc},
                         {"ece", s.ece ? json(*s.ece) : json(nullptr)}});
    }
    j["seeds"] = seeds;
    json bins = json::array();
    for (const auto& b : r.bins) {
        bins.push_back({{"index", b.index},
                        {"lower", b.lower},
                        {"upper", b.upper},
                        {"center", b.center},
                        {"count", b.count},
                        {"accuracy", b.accuracy},
                        {"confidence", b.confidence},
                        {"mass", b.mass}});
    }
    j["bins"] = bins;
    return j;
}

std::string bins_csv(const CalibrationReport& r) {
    std::ostringstream os;
    os << "bin,lower,upper,center,count,accuracy,confidence,mass\n";
    char line[256];
    for (const auto& b : r.bins) {
        std::snprintf(line, sizeof line, "%zu,%.4f,%.4f,%.4f,%zu,%.10g,%.10g,%.10g\n", b.index, b.lower, b.upper,
                      b.center, b.count, b.accuracy, b.confidence, b.mass);
        os << line;
    }
    return os.str();
}

std::string render_table(std::span<const CalibrationReport> reports, std::string_view title) {
    std::size_t w = 6;
    for (const auto& r : reports) w = std::max(w, method_spec(r.method).display.size());
    std::ostringstream os;
    char buf[256];
    os << title << "\n";
    std::snprintf(buf, sizeof buf, "%-*s | %-14s | %-14s\n", static_cast<int>(w), "Method", "AUROC (%)", "ECE (%)");
    os << buf << std::string(w, '-') << "-+-" << std::string(14, '-') << "-+-" << std::string(14, '-') << "\n";
    for (const auto& r : reports) {
        const std::string& label = method_spec(r.method).display;
        if (r.error) {
            std::snprintf(buf, sizeof buf, "%-*s | %s\n", static_cast<int>(w), label.c_str(),
                          ("n/a (" + *r.error + ")").c_str());
            os << buf;
            continue;
        }
        char au[32], ec[32];
        std::snprintf(au, sizeof au, "%.1f ± %.1f", 100.0 * r.auroc_mean, 100.0 * r.auroc_std);
        if (r.ece_mean) {
            std::snprintf(ec, sizeof ec, "%.1f ± %.1f", 100.0 * *r.ece_mean, 100.0 * *r.ece_std);
        } else {
            std::snprintf(ec, sizeof ec, "-");
        }
        std::snprintf(buf, sizeof buf, "%-*s | %-15s | %-15s\n", static_cast<int>(w), label.c_str(), au, ec);
        os << buf;
    }
    return os.str();
}

}  // namespace uqac::metrics
