// uqac command line: generate traces, score them, report calibration, inspect
// one chain, or fit re-weighting factors from stored traces.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "uqac/errors.hpp"
#include "uqac/harness/config.hpp"
#include "uqac/harness/pipeline.hpp"

namespace {

using namespace uqac;
using namespace uqac::harness;

struct Overrides {
    std::string config;
    std::string model;
    std::string profile;
    std::string dataset;
    std::string data_path;
    std::string out;
    std::optional<std::size_t> limit;
    std::optional<std::size_t> offset;
    std::optional<std::size_t> workers;
    std::optional<std::size_t> marg_threads;
    std::optional<std::size_t> max_new_tokens;
    std::string methods;
    std::string seeds;
    std::string gamma_file;
    std::string log_level = "info";
};

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

RunConfig resolve(const Overrides& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (o.config.empty()) c.generation.max_new_tokens = 0;
    if (!o.model.empty()) c.model_path = o.model;
    if (!o.profile.empty()) c.profile = o.profile;
    if (!o.dataset.empty()) c.dataset = datasets::parse_tag(o.dataset);
    if (!o.data_path.empty()) c.dataset_path = o.data_path;
    if (!o.out.empty()) c.output_dir = o.out;
    if (o.limit) c.limit = *o.limit;
    if (o.offset) c.offset = *o.offset;
    if (o.workers) c.workers = *o.workers;
    if (o.marg_threads) c.marg_threads = *o.marg_threads;
    if (o.max_new_tokens) c.generation.max_new_tokens = *o.max_new_tokens;
    if (!o.methods.empty()) c.methods = split_csv(o.methods);
    if (!o.seeds.empty()) {
        c.seeds.clear();
        for (const auto& s : split_csv(o.seeds)) {
            try {
                c.seeds.push_back(std::stoull(s));
            } catch (const std::exception&) {
                throw ConfigError("bad seed '" + s + "'");
            }
        }
    }
    if (!o.gamma_file.empty()) c.gamma_file = o.gamma_file;
    return c;
}

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("-c,--config", o.config, "run configuration JSON");
    sub->add_option("--model", o.model, "model directory");
    sub->add_option("--profile", o.profile, "prompt profile name (default: auto)");
    sub->add_option("--dataset", o.dataset, "gsm8k | math | bbh");
    sub->add_option("--data-path", o.data_path, "dataset file or directory (default: under $UQAC_DATA_ROOT)");
    sub->add_option("-o,--out", o.out, "run directory");
    sub->add_option("--limit", o.limit, "number of instances");
    sub->add_option("--offset", o.offset, "first instance index");
    sub->add_option("-j,--workers", o.workers, "parallel instances");
    sub->add_option("--marg-threads", o.marg_threads, "threads per marginalization");
    sub->add_option("--max-new-tokens", o.max_new_tokens, "generation budget (default: per dataset)");
    sub->add_option("--methods", o.methods, "comma-separated method names");
    sub->add_option("--seeds", o.seeds, "comma-separated evaluation seeds");
    sub->add_option("--gamma-file", o.gamma_file, "re-weighting factors JSON");
    sub->add_option("--log-level", o.log_level, "trace | debug | info | warn | error | off");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Uncertainty of LLM answers by attention-chain backtracking"};
    app.require_subcommand(1);
    Overrides o;

    auto* gen = app.add_subcommand("generate", "run the model over a dataset and store traces");
    add_common(gen, o);
    auto* score = app.add_subcommand("score", "score stored traces into records.jsonl");
    add_common(score, o);
    auto* report = app.add_subcommand("report", "AUROC / ECE over records.jsonl");
    add_common(report, o);
    auto* inspect = app.add_subcommand("inspect", "dump the attention chain of one instance");
    add_common(inspect, o);
    std::string id;
    inspect->add_option("--id", id, "instance id")->required();
    auto* calib = app.add_subcommand("calibrate-gamma", "fit re-weighting factors from stored traces");
    add_common(calib, o);
    std::string traces_dir, gamma_out;
    std::size_t c = 10, window = 50;
    calib->add_option("--traces", traces_dir, "trace directory (default: <out>/traces)");
    calib->add_option("--output", gamma_out, "gamma JSON to write")->required();
    calib->add_option("--factors", c, "number of factors")->check(CLI::PositiveNumber);
    calib->add_option("--window", window, "curve length")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    // stdout carries the report table and inspect dumps; logs go to stderr
    spdlog::set_default_logger(spdlog::stderr_color_mt("uqac"));
    spdlog::set_level(spdlog::level::from_str(o.log_level));
    try {
        const RunConfig cfg = resolve(o);
        if (*gen) return cmd_generate(cfg);
        if (*score) return cmd_score(cfg);
        if (*report) return cmd_report(cfg, std::cout);
        if (*inspect) return cmd_inspect(cfg, id, std::cout);
        if (*calib) return cmd_calibrate_gamma(cfg, traces_dir, gamma_out, c, window);
    } catch (const ConfigError& e) {
        spdlog::error("configuration error: {}", e.what());
        return kExitConfig;
    } catch (const LoadError& e) {
        spdlog::error("load error: {}", e.what());
        return kExitConfig;
    } catch (const FormatError& e) {
        spdlog::error("format error: {}", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return kExitOk;
}
