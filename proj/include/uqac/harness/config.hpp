#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "uqac/baselines.hpp"
#include "uqac/chain.hpp"
#include "uqac/datasets.hpp"
#include "uqac/similarity.hpp"
#include "uqac/trace.hpp"

namespace uqac::harness {

// Name of the environment variable holding the dataset root directory.
inline constexpr const char* kDataRootEnv = "UQAC_DATA_ROOT";

struct RunConfig {
    std::string model_path;
    std::string profile = "auto";  // "auto" picks by model name

    datasets::DatasetTag dataset = datasets::DatasetTag::gsm8k;
    std::string dataset_path;  // empty: default location under the data root
    std::size_t offset = 0;
    std::size_t limit = 0;  // 0: every instance
    bool strict_counts = false;

    GenerationConfig generation;          // max_new_tokens 0: dataset/profile default
    chain::ChainConfig chain;             // stopwords filled from `stopwords_file` or the built-in list
    std::string stopwords_file;
    similarity::SimilarityFilterConfig similarity;
    std::string gamma_file;  // empty: built-in factors

    std::vector<std::string> methods;  // empty: every registered method
    std::size_t sc_samples = 5;
    double sc_temperature = 0.5;
    std::string verbalized_template_file;
    std::size_t verbalized_max_new_tokens = 16;
    std::string prompts_file;  // empty: built-in prompt profiles

    std::string output_dir = "uqac-run";
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::size_t subsample_cap = 500;
    std::size_t workers = 1;
    std::size_t marg_threads = 1;

    // Throws ConfigError on invalid values or unknown method names.
    void validate() const;

    [[nodiscard]] std::vector<std::string> effective_methods() const;
    [[nodiscard]] std::filesystem::path resolved_dataset_path() const;
    [[nodiscard]] bool wants(std::string_view method) const;
};

[[nodiscard]] RunConfig config_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json config_to_json(const RunConfig& c);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

// Data root from the environment, else "data".
[[nodiscard]] std::filesystem::path data_root();

}  // namespace uqac::harness
