#include "uqac/harness/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "uqac/errors.hpp"
#include "uqac/metrics.hpp"

namespace uqac::harness {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
    generation.validate();
    chain.validate();
    similarity.validate();
    for (const auto& m : methods) (void)metrics::method_spec(m);
    if (seeds.empty()) throw ConfigError("at least one evaluation seed is required");
    if (subsample_cap == 0) throw ConfigError("subsample_cap must be positive");
    if (workers == 0) throw ConfigError("workers must be positive");
    if (sc_samples == 0) throw ConfigError("self-consistency needs at least one sample");
    if (!(sc_temperature >= 0.0)) throw ConfigError("self-consistency temperature must be >= 0");
    if (output_dir.empty()) throw ConfigError("output_dir is empty");
    for (const auto* p : {&gamma_file, &stopwords_file, &verbalized_template_file, &prompts_file}) {
        if (!p->empty() && !fs::exists(*p)) throw ConfigError("file not found: " + *p);
    }
}

std::vector<std::string> RunConfig::effective_methods() const {
    return methods.empty() ? metrics::all_method_names() : methods;
}

bool RunConfig::wants(std::string_view method) const {
    const auto m = effective_methods();
    return std::find(m.begin(), m.end(), method) != m.end();
}

fs::path RunConfig::resolved_dataset_path() const {
    return dataset_path.empty() ? datasets::default_path(dataset, data_root()) : fs::path(dataset_path);
}

fs::path data_root() {
    if (const char* env = std::getenv(kDataRootEnv); env && *env) return env;
    return "data";
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    try {
        if (j.contains("model")) {
            const auto& m = j["model"];
            c.model_path = m.value("path", c.model_path);
            c.profile = m.value("profile", c.profile);
        }
        if (j.contains("dataset")) {
            const auto& d = j["dataset"];
            c.dataset = datasets::parse_tag(d.value("tag", std::string("gsm8k")));
            c.dataset_path = d.value("path", c.dataset_path);
            c.offset = d.value("offset", c.offset);
            c.limit = d.value("limit", c.limit);
            c.strict_counts = d.value("strict_counts", c.strict_counts);
        }
        if (j.contains("generation")) {
            const auto& g = j["generation"];
            c.generation.max_new_tokens = g.value("max_new_tokens", std::size_t{0});
            c.generation.temperature = g.value("temperature", c.generation.temperature);
            c.generation.top_p = g.value("top_p", c.generation.top_p);
            c.generation.seed = g.value("seed", c.generation.seed);
        } else {
            c.generation.max_new_tokens = 0;
        }
        if (j.contains("chain")) {
            const auto& ch = j["chain"];
            c.chain.top_heads = ch.value("K", c.chain.top_heads);
            c.chain.target_buffer = ch.value("L_tgt", c.chain.target_buffer);
            c.chain.theta = ch.value("theta", c.chain.theta);
            c.chain.theta_delay = ch.value("theta_delay", c.chain.theta_delay);
            c.stopwords_file = ch.value("stopwords_file", c.stopwords_file);
        }
        if (j.contains("similarity")) {
            const auto& s = j["similarity"];
            c.similarity.max_positions = s.value("L_attn_max", c.similarity.max_positions);
            c.similarity.tau = s.value("tau", c.similarity.tau);
        }
        if (j.contains("gamma")) {
            const auto& g = j["gamma"];
            const std::string source = g.value("source", std::string("default"));
            if (source == "file") {
                c.gamma_file = g.at("file").get<std::string>();
            } else if (source != "default") {
                throw ConfigError("gamma.source must be 'default' or 'file'");
            }
        }
        c.methods = j.value("methods", c.methods);
        if (j.contains("self_consistency")) {
            c.sc_samples = j["self_consistency"].value("n_samples", c.sc_samples);
            c.sc_temperature = j["self_consistency"].value("temperature", c.sc_temperature);
        }
        if (j.contains("verbalized")) {
            c.verbalized_template_file = j["verbalized"].value("template_file", c.verbalized_template_file);
            c.verbalized_max_new_tokens = j["verbalized"].value("max_new_tokens", c.verbalized_max_new_tokens);
        }
        c.prompts_file = j.value("prompts_file", c.prompts_file);
        c.output_dir = j.value("output_dir", c.output_dir);
        c.seeds = j.value("seeds", c.seeds);
        c.subsample_cap = j.value("subsample_cap", c.subsample_cap);
        c.workers = j.value("workers", c.workers);
        c.marg_threads = j.value("marg_threads", c.marg_threads);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed run config: ") + e.what());
    }
    return c;
}

json config_to_json(const RunConfig& c) {
    return json{
        {"model", {{"path", c.model_path}, {"profile", c.profile}}},
        {"dataset",
         {{"tag", std::string(datasets::tag_name(c.dataset))},
          {"path", c.dataset_path},
          {"offset", c.offset},
          {"limit", c.limit},
          {"strict_counts", c.strict_counts}}},
        {"generation",
         {{"max_new_tokens", c.generation.max_new_tokens},
          {"temperature", c.generation.temperature},
          {"top_p", c.generation.top_p},
          {"seed", c.generation.seed}}},
        {"chain",
         {{"K", c.chain.top_heads},
          {"L_tgt", c.chain.target_buffer},
          {"theta", c.chain.theta},
          {"theta_delay", c.chain.theta_delay},
          {"stopwords_file", c.stopwords_file}}},
        {"similarity", {{"L_attn_max", c.similarity.max_positions}, {"tau", c.similarity.tau}}},
        {"gamma", c.gamma_file.empty() ? json{{"source", "default"}}
                                       : json{{"source", "file"}, {"file", c.gamma_file}}},
        {"methods", c.methods},
        {"self_consistency", {{"n_samples", c.sc_samples}, {"temperature", c.sc_temperature}}},
        {"verbalized",
         {{"template_file", c.verbalized_template_file}, {"max_new_tokens", c.verbalized_max_new_tokens}}},
        {"prompts_file", c.prompts_file},
        {"output_dir", c.output_dir},
        {"seeds", c.seeds},
        {"subsample_cap", c.subsample_cap},
        {"workers", c.workers},
        {"marg_threads", c.marg_threads},
    };
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    try {
        return config_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
}

}  // namespace uqac::harness
