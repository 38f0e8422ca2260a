#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace uqac::metrics {

// Probability that a positive (correct) instance outranks a negative one,
// ties counting one half. Throws DegenerateEvaluationError without both classes.
[[nodiscard]] double auroc(std::span<const double> scores, const std::vector<bool>& labels);

// Bin s covers (s/S, (s+1)/S]; a score of exactly 0 goes to bin 0.
[[nodiscard]] std::size_t bin_index(double p, std::size_t n_bins);

struct BinRow {
    std::size_t index = 0;
    double lower = 0.0;
    double upper = 0.0;
    double center = 0.0;
    std::size_t count = 0;
    double accuracy = 0.0;    // 0 for empty bins
    double confidence = 0.0;  // 0 for empty bins
    double mass = 0.0;
};

struct EceResult {
    double ece = 0.0;
    std::vector<BinRow> bins;
    std::size_t clamped = 0;  // scores moved into [0, 1] before binning
};

[[nodiscard]] EceResult ece_table(std::span<const double> scores, const std::vector<bool>& labels,
                                  std::size_t n_bins = 20);
[[nodiscard]] double ece(std::span<const double> scores, const std::vector<bool>& labels, std::size_t n_bins = 20);

// Indices (ascending) of a class-balanced subset: min(#correct, #incorrect,
// cap) drawn from each class without replacement.
[[nodiscard]] std::vector<std::size_t> balanced_subsample(const std::vector<bool>& labels, std::uint64_t seed,
                                                          std::size_t cap = 500);

// How a stored score enters evaluation.
struct MethodSpec {
    std::string name;         // key in EvalRecord::scores
    std::string display;      // row label in the text table
    bool invert = false;      // evaluated as 1 - value (entropies)
    bool ece_applicable = true;
};

[[nodiscard]] const std::vector<MethodSpec>& method_registry();
// Throws ConfigError for names outside the registry.
[[nodiscard]] const MethodSpec& method_spec(std::string_view name);
[[nodiscard]] std::vector<std::string> all_method_names();

struct EvalRecord {
    std::string instance_id;
    std::string dataset;
    std::string extracted_answer;
    std::string gold_answer;
    bool correct = false;
    std::map<std::string, double> scores;
    nlohmann::json diagnostics = nlohmann::json::object();
};

[[nodiscard]] nlohmann::json to_json(const EvalRecord& r);
// Throws FormatError on missing or mistyped fields.
[[nodiscard]] EvalRecord record_from_json(const nlohmann::json& j);
[[nodiscard]] std::vector<EvalRecord> read_records(const std::string& jsonl_path);

struct SeedResult {
    std::uint64_t seed = 0;
    std::size_t n_per_class = 0;
    double auroc = 0.0;
    std::optional<double> ece;
};

struct CalibrationReport {
    std::string method;
    bool ece_applicable = true;
    std::vector<SeedResult> seeds;
    double auroc_mean = 0.0;
    double auroc_std = 0.0;  // population standard deviation
    std::optional<double> ece_mean;
    std::optional<double> ece_std;
    std::vector<BinRow> bins;  // over the union of all seeds' subsets
    std::optional<std::string> error;
};

// Per seed: balanced subsample, then AUROC and ECE per method. A method that
// cannot be evaluated gets `error` set; the others still run.
[[nodiscard]] std::vector<CalibrationReport> evaluate(std::span<const EvalRecord> records,
                                                      std::span<const std::string> methods,
                                                      std::span<const std::uint64_t> seeds, std::size_t cap = 500,
                                                      std::size_t n_bins = 20);

[[nodiscard]] nlohmann::json report_to_json(const CalibrationReport& r);
[[nodiscard]] std::string bins_csv(const CalibrationReport& r);
// Method | AUROC | ECE table in percent, mean ± std.
[[nodiscard]] std::string render_table(std::span<const CalibrationReport> reports, std::string_view title);

}  // namespace uqac::metrics
