#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqac/baselines.hpp"
#include "uqac/chain.hpp"
#include "uqac/confidence.hpp"
#include "uqac/datasets.hpp"
#include "uqac/harness/config.hpp"
#include "uqac/metrics.hpp"
#include "uqac/runtime/model.hpp"
#include "uqac/similarity.hpp"
#include "uqac/trace.hpp"

namespace uqac::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPartial = 3;

// Everything the per-instance scorer needs besides the trace.
struct ScoreOptions {
    chain::ChainConfig chain;
    chain::ReweightFactors gamma;
    similarity::SimilarityFilterConfig similarity;
    std::vector<std::string> methods;
    baselines::SelfConsistencyConfig self_consistency;
    std::string verbalized_template;
    std::size_t verbalized_max_new_tokens = 16;
    std::size_t marg_threads = 1;

    [[nodiscard]] bool wants(std::string_view method) const;
};

// Chain, filtered chain and reduced space of one trace with its answer span set.
struct InstanceAnalysis {
    chain::AttentionChain chain;
    std::vector<double> weights;  // similarity per chain position
    chain::AttentionChain filtered;
    confidence::ReducedSpace space;
};

[[nodiscard]] InstanceAnalysis analyze(const Trace& trace, const ScoreOptions& opt);

struct ScoredInstance {
    std::optional<metrics::EvalRecord> record;
    std::optional<std::string> excluded_reason;  // set when the answer cannot be extracted
    nlohmann::json timings = nlohmann::json::object();
};

// Extracts and locates the answer (setting trace.answer), judges it against
// `gold`, and computes every requested score. `model` may be null when no
// requested method needs extra forward passes.
[[nodiscard]] ScoredInstance score_trace(Trace& trace, const std::string& gold, datasets::DatasetTag tag,
                                         const runtime::LanguageModel* model, const ScoreOptions& opt);
// Same, with an explicit tokenizer so trace-only methods need no model.
[[nodiscard]] ScoredInstance score_trace(Trace& trace, const std::string& gold, datasets::DatasetTag tag,
                                         const runtime::LanguageModel* model, const ScoreOptions& opt,
                                         const runtime::Tokenizer& tokenizer);

// Options built from a run config; stopword ids come from `tokenizer`.
[[nodiscard]] ScoreOptions score_options(const RunConfig& cfg, const runtime::Tokenizer& tokenizer);

// Debug dump of the chain with decoded tokens, phi per step, similarity
// weights and the reduced space.
[[nodiscard]] nlohmann::json chain_dump(const Trace& trace, const InstanceAnalysis& a,
                                        const runtime::Tokenizer& tokenizer);

// Run layout under cfg.output_dir.
struct RunPaths {
    std::filesystem::path root;
    [[nodiscard]] std::filesystem::path traces() const { return root / "traces"; }
    [[nodiscard]] std::filesystem::path trace_dir(const std::string& id) const { return traces() / id; }
    [[nodiscard]] std::filesystem::path records() const { return root / "records.jsonl"; }
    [[nodiscard]] std::filesystem::path excluded() const { return root / "excluded.jsonl"; }
    [[nodiscard]] std::filesystem::path failures() const { return root / "failures.jsonl"; }
    [[nodiscard]] std::filesystem::path timings() const { return root / "timings.jsonl"; }
    [[nodiscard]] std::filesystem::path responses() const { return root / "responses.jsonl"; }
    [[nodiscard]] std::filesystem::path report_dir() const { return root / "report"; }
};

// Each command returns an exit code (kExitOk or kExitPartial) and throws
// ConfigError / LoadError for configuration problems.
int cmd_generate(const RunConfig& cfg);
int cmd_score(const RunConfig& cfg);
int cmd_report(const RunConfig& cfg, std::ostream& out);
int cmd_inspect(const RunConfig& cfg, const std::string& instance_id, std::ostream& out);
int cmd_calibrate_gamma(const RunConfig& cfg, const std::filesystem::path& traces_dir,
                        const std::filesystem::path& out_path, std::size_t c = 10, std::size_t window = 50);

}  // namespace uqac::harness
