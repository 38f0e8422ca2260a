#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "support/synthetic.hpp"

#include "support/toy_task.hpp"
#include "uqac/errors.hpp"
#include "uqac/gamma.hpp"
#include "uqac/harness/config.hpp"
#include "uqac/harness/pipeline.hpp"
#include "uqac/metrics.hpp"
#include "uqac/trace_io.hpp"

using namespace uqac;
using namespace uqac::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("uqac-harness-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const fs::path& p) {
    if (!fs::exists(p)) return 0;
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) n += !line.empty();
    return n;
}

// Every method except the verbalized one, whose prompt text the toy vocabulary
// cannot encode.
std::vector<std::string> toy_methods() {
    std::vector<std::string> out;
    for (const auto& m : metrics::all_method_names()) {
        if (m != "verbalized") out.push_back(m);
    }
    return out;
}

RunConfig toy_config(const fs::path& root) {
    const auto task = testing::write_toy_task(root / "task");
    RunConfig c;
    c.model_path = task.model.string();
    c.dataset_path = task.dataset.string();
    c.output_dir = (root / "run").string();
    c.generation.max_new_tokens = 12;
    c.methods = toy_methods();
    c.seeds = {0, 1};
    return c;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(UQAC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("generate, score, report and inspect on the toy task") {
    const auto root = scratch("pipeline");
    RunConfig cfg = toy_config(root);
    const RunPaths paths{cfg.output_dir};

    REQUIRE(cmd_generate(cfg) == kExitOk);
    for (const char* id : {"gsm8k-00000", "gsm8k-00001", "gsm8k-00002"}) {
        CHECK(fs::exists(paths.trace_dir(id) / "manifest.json"));
        CHECK(fs::exists(paths.trace_dir(id) / "instance.json"));
    }
    CHECK(count_lines(paths.responses()) == 3);
    CHECK(fs::exists(paths.root / "config.generate.json"));
    {
        std::ifstream in(paths.responses());
        std::string line;
        std::getline(in, line);
        CHECK(nlohmann::json::parse(line)["response"] == " so4 \\boxed{4}");
    }
    // a rerun finds every trace in place
    const auto before = fs::last_write_time(paths.trace_dir("gsm8k-00000") / "tensors.bin");
    CHECK(cmd_generate(cfg) == kExitOk);
    CHECK(fs::last_write_time(paths.trace_dir("gsm8k-00000") / "tensors.bin") == before);

    REQUIRE(cmd_score(cfg) == kExitOk);
    const auto records = metrics::read_records(paths.records().string());
    REQUIRE(records.size() == 3);
    std::size_t correct = 0;
    for (const auto& r : records) {
        correct += r.correct;
        for (const auto& m : toy_methods()) {
            REQUIRE(r.scores.count(m) == 1);
            if (!metrics::method_spec(m).invert) {
                CHECK(r.scores.at(m) >= 0.0);
                CHECK(r.scores.at(m) <= 1.0);
            }
        }
        CHECK(r.scores.at("uqac_attn") <= r.scores.at("uqac_sim") + 1e-12);
        CHECK(r.scores.at("uqac_sim") <= r.scores.at("uqac_marg") + 1e-12);
    }
    CHECK(correct == 2);

    // scoring is resumable and deterministic
    const std::string first = slurp(paths.records());
    CHECK(cmd_score(cfg) == kExitOk);
    CHECK(slurp(paths.records()) == first);
    fs::remove(paths.records());
    fs::remove(paths.timings());
    cfg.workers = 2;
    CHECK(cmd_score(cfg) == kExitOk);
    CHECK(slurp(paths.records()) == first);

    std::ostringstream table;
    CHECK(cmd_report(cfg, table) == kExitOk);
    CHECK(table.str().find("UQAC P_sim") != std::string::npos);
    CHECK(fs::exists(paths.report_dir() / "report.json"));
    CHECK(fs::exists(paths.report_dir() / "summary.txt"));
    CHECK(fs::exists(paths.report_dir() / "uqac_sim.json"));
    CHECK(fs::exists(paths.report_dir() / "uqac_sim_bins.csv"));
    const std::string report = slurp(paths.report_dir() / "report.json");
    std::ostringstream again;
    CHECK(cmd_report(cfg, again) == kExitOk);
    CHECK(slurp(paths.report_dir() / "report.json") == report);
    CHECK(again.str() == table.str());
    const auto rj = nlohmann::json::parse(report);
    CHECK(rj["methods"].size() == toy_methods().size());

    std::ostringstream dump;
    CHECK(cmd_inspect(cfg, "gsm8k-00002", dump) == kExitOk);
    const auto dj = nlohmann::json::parse(dump.str());
    CHECK(dj["correct"] == false);
    CHECK(dj["extracted_answer"] == "8");
    CHECK(dj.contains("steps"));
    CHECK(dj["reduced_space"]["size"].get<std::size_t>() >= 1);
    std::ostringstream none;
    CHECK_THROWS_AS((void)cmd_inspect(cfg, "gsm8k-99999", none), ConfigError);

    // toy responses are five tokens, shorter than any usable window
    const auto gamma_path = root / "gamma.json";
    CHECK_THROWS_AS((void)cmd_calibrate_gamma(cfg, {}, gamma_path, 1, 7), DerivationError);
    CHECK_THROWS_AS((void)cmd_calibrate_gamma(cfg, root / "nowhere", gamma_path, 2, 3), ConfigError);
    fs::remove_all(root);
}

TEST_CASE("calibrate-gamma over a stored trace directory") {
    const auto root = scratch("gamma");
    std::mt19937_64 rng(21);
    testing::RandomTraceShape shape;
    shape.min_resp = 30;
    shape.max_resp = 40;
    std::vector<Trace> traces;
    for (int i = 0; i < 6; ++i) {
        traces.push_back(testing::random_trace(rng, shape));
        traces.back().instance_id = "t" + std::to_string(i);
        write_trace(root / "traces" / traces.back().instance_id, traces.back());
    }
    RunConfig cfg;
    cfg.output_dir = root.string();
    const auto out = root / "fit" / "gamma.json";
    REQUIRE(cmd_calibrate_gamma(cfg, {}, out, 2, 12) == kExitOk);

    std::vector<const Trace*> ptrs;
    for (const auto& t : traces) ptrs.push_back(&t);
    const auto curve = gamma::mean_attention_curve(ptrs, 12);
    const auto fit = gamma::fit_gamma(curve.curve, 2);
    const auto written = gamma::read_gamma_file(out);
    REQUIRE(written.gamma.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) CHECK(written.gamma[i] == doctest::Approx(fit.gamma[i]).epsilon(1e-12));
    const auto gj = nlohmann::json::parse(slurp(out));
    CHECK(gj["traces_used"] == 6);
    fs::remove_all(root);
}

TEST_CASE("commands reject missing inputs") {
    const auto root = scratch("missing");
    RunConfig cfg = toy_config(root);
    std::ostringstream out;
    CHECK_THROWS_AS((void)cmd_score(cfg), ConfigError);
    CHECK_THROWS_AS((void)cmd_report(cfg, out), ConfigError);
    cfg.model_path = (root / "absent.json").string();
    CHECK_THROWS_AS((void)cmd_generate(cfg), ConfigError);
    cfg = toy_config(root);
    cfg.dataset_path = (root / "absent.jsonl").string();
    CHECK_THROWS_AS((void)cmd_generate(cfg), ConfigError);
    fs::remove_all(root);
}

TEST_CASE("run config: JSON round trip, validation and the data root") {
    RunConfig c;
    c.model_path = "m";
    c.dataset = datasets::DatasetTag::math;
    c.limit = 7;
    c.generation.max_new_tokens = 99;
    c.chain.theta = 0.2;
    c.similarity.tau = 0.05;
    c.methods = {"uqac", "resp_joint"};
    c.seeds = {3, 4};
    c.workers = 3;
    const RunConfig r = config_from_json(config_to_json(c));
    CHECK(config_to_json(r) == config_to_json(c));
    CHECK(r.dataset == datasets::DatasetTag::math);
    CHECK(r.generation.max_new_tokens == 99);

    RunConfig bad = c;
    bad.methods = {"no_such_method"};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.seeds.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.workers = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS((void)config_from_json(nlohmann::json::parse(R"({"gamma": {"source": "magic"}})")), ConfigError);
    CHECK_THROWS_AS((void)config_from_json(nlohmann::json::parse(R"({"workers": "many"})")), ConfigError);
    CHECK(config_from_json(nlohmann::json::object()).effective_methods() == metrics::all_method_names());

    const char* old = std::getenv(kDataRootEnv);
    const std::string saved = old ? old : "";
    setenv(kDataRootEnv, "/srv/uqac-data", 1);
    CHECK(data_root() == fs::path("/srv/uqac-data"));
    RunConfig d;
    CHECK(d.resolved_dataset_path() == fs::path("/srv/uqac-data/gsm8k/test.jsonl"));
    unsetenv(kDataRootEnv);
    CHECK(data_root() == fs::path("data"));
    if (old) setenv(kDataRootEnv, saved.c_str(), 1);
}

TEST_CASE("command line exit codes") {
    const auto root = scratch("cli");
    const auto task = testing::write_toy_task(root / "task");
    CHECK(run_cli("") == kExitConfig);
    CHECK(run_cli("frobnicate") == kExitConfig);
    CHECK(run_cli("score -c " + (root / "absent.json").string()) == kExitConfig);
    CHECK(run_cli("generate --model " + (root / "absent.json").string()) == kExitConfig);

    // one question outside the toy vocabulary fails; the other two succeed
    {
        std::ofstream ds(task.dataset, std::ios::app);
        ds << R"({"question": "x?", "answer": "#### 1"})" << "\n";
    }
    const std::string common = "--model " + task.model.string() + " --data-path " + task.dataset.string() +
                               " -o " + (root / "run").string() + " --max-new-tokens 12";
    CHECK(run_cli("generate " + common) == kExitPartial);
    CHECK(count_lines(root / "run" / "failures.jsonl") == 1);
    CHECK(count_lines(root / "run" / "responses.jsonl") == 3);
    CHECK(run_cli("score " + common + " --methods uqac_marg,uqac_sim,resp_joint") == kExitOk);
    CHECK(run_cli("report " + common + " --methods uqac_marg,uqac_sim,resp_joint") == kExitOk);
    CHECK(run_cli("inspect " + common + " --id gsm8k-00000") == kExitOk);
    CHECK(run_cli("inspect " + common + " --id nope") == kExitConfig);
    CHECK(run_cli("score " + common + " --methods bogus") == kExitConfig);
    fs::remove_all(root);
}
