#include "uqac/harness/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "uqac/errors.hpp"
#include "uqac/gamma.hpp"
#include "uqac/runtime/adapter.hpp"
#include "uqac/runtime/transformer.hpp"
#include "uqac/trace_io.hpp"

namespace uqac::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr auto kJsonReplace = json::error_handler_t::replace;

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
    std::atomic<std::size_t> next{0};
    auto loop = [&] {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
    };
    const std::size_t k = std::min(workers, n);
    if (k <= 1) {
        loop();
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < k; ++t) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
}

void append_lines(const fs::path& path, const std::vector<json>& lines) {
    if (lines.empty()) return;
    std::ofstream out(path, std::ios::app);
    if (!out) throw LoadError("cannot append to " + path.string());
    for (const auto& l : lines) out << l.dump(-1, ' ', false, kJsonReplace) << "\n";
}

std::set<std::string> ids_in(const fs::path& jsonl) {
    std::set<std::string> ids;
    std::ifstream in(jsonl);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            ids.insert(json::parse(line).at("instance_id").get<std::string>());
        } catch (const json::exception& e) {
            throw FormatError(jsonl.string() + ": " + e.what());
        }
    }
    return ids;
}

json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw LoadError("cannot read " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(p.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& p, const json& j) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw LoadError("cannot write " + p.string());
    out << j.dump(2, ' ', false, kJsonReplace) << "\n";
}

std::vector<std::string> trace_ids(const RunPaths& paths) {
    std::vector<std::string> ids;
    if (!fs::is_directory(paths.traces())) return ids;
    for (const auto& e : fs::directory_iterator(paths.traces())) {
        if (e.is_directory() && fs::exists(e.path() / "manifest.json")) ids.push_back(e.path().filename().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

const datasets::PromptAssets& prompt_assets(const RunConfig& cfg, std::optional<datasets::PromptAssets>& storage) {
    if (cfg.prompts_file.empty()) return datasets::PromptAssets::builtin();
    storage = datasets::PromptAssets::from_file(cfg.prompts_file);
    return *storage;
}

const datasets::ModelProfile& pick_profile(const RunConfig& cfg, const datasets::PromptAssets& assets,
                                           const std::string& model_name) {
    return cfg.profile == "auto" ? assets.profile_for(model_name) : assets.profile_named(cfg.profile);
}

std::unique_ptr<runtime::LanguageModel> open_model(const RunConfig& cfg) {
    if (cfg.model_path.empty()) throw ConfigError("no model path configured");
    if (!fs::exists(cfg.model_path)) throw ConfigError("model path does not exist: " + cfg.model_path);
    return runtime::load_model(cfg.model_path);
}

std::size_t resolved_max_new_tokens(const RunConfig& cfg, const datasets::ModelProfile& profile) {
    return cfg.generation.max_new_tokens > 0 ? cfg.generation.max_new_tokens
                                             : datasets::max_new_tokens_for(cfg.dataset, profile);
}

void persist_config(const RunConfig& cfg, const RunPaths& paths, const char* stage) {
    fs::create_directories(paths.root);
    json j = config_to_json(cfg);
    j["stage"] = stage;
    write_json_file(paths.root / (std::string("config.") + stage + ".json"), j);
}

}  // namespace

bool ScoreOptions::wants(std::string_view method) const {
    return std::find(methods.begin(), methods.end(), method) != methods.end();
}

InstanceAnalysis analyze(const Trace& trace, const ScoreOptions& opt) {
    InstanceAnalysis a;
    a.chain = chain::backtrack(trace, opt.chain, opt.gamma);
    a.weights = similarity::similarity_weights(trace, a.chain);
    a.filtered = similarity::filter_chain(a.chain, a.weights, opt.similarity);
    a.space = confidence::build_reduced_space(trace, a.filtered);
    return a;
}

ScoredInstance score_trace(Trace& trace, const std::string& gold, datasets::DatasetTag tag,
                           const runtime::LanguageModel* model, const ScoreOptions& opt) {
    if (!model) throw ConfigError("scoring needs the model tokenizer");
    return score_trace(trace, gold, tag, model, opt, model->tokenizer());
}

ScoredInstance score_trace(Trace& trace, const std::string& gold, datasets::DatasetTag tag,
                           const runtime::LanguageModel* model, const ScoreOptions& opt,
                           const runtime::Tokenizer& tokenizer) {
    ScoredInstance out;
    // Byte offsets must agree with the tokens, so extract from a fresh decode.
    const std::span<const TokenId> resp(trace.tokens.data() + trace.n_instr, trace.n_resp());
    const std::string response = tokenizer.decode(resp);
    const auto ex = datasets::extract_answer(response, tag);
    if (!ex.success) {
        out.excluded_reason = "no extractable answer";
        return out;
    }
    const auto span = datasets::answer_span_from_bytes(tokenizer, trace.tokens, trace.n_instr, ex.begin, ex.end);
    if (!span) {
        out.excluded_reason = "answer text does not map to generated tokens";
        return out;
    }
    trace.answer = span;

    metrics::EvalRecord rec;
    rec.instance_id = trace.instance_id;
    rec.dataset = std::string(datasets::tag_name(tag));
    rec.extracted_answer = ex.canonical;
    rec.gold_answer = gold;
    rec.correct = datasets::judge(ex.canonical, gold, tag);

    auto t0 = std::chrono::steady_clock::now();
    const InstanceAnalysis a = analyze(trace, opt);
    const double p_attn = confidence::attn_approx(trace, a.chain);
    const double p_sim = confidence::sim_approx(trace, a.filtered);
    const auto avg = confidence::averaged_variants(trace, a.chain, a.filtered);
    out.timings["chain_ms"] = elapsed_ms(t0);

    auto put = [&](const char* name, double v) {
        if (opt.wants(name)) rec.scores[name] = v;
    };
    put("uqac_attn", p_attn);
    put("uqac_sim", p_sim);
    put("uqac_attn_avg", avg.p_attn_avg);
    put("uqac_sim_avg", avg.p_sim_avg);

    json diag;
    diag["L_resp"] = trace.n_resp();
    diag["L_cot"] = trace.n_cot();
    diag["L_ans"] = trace.n_ans();
    diag["L_attn"] = a.chain.size();
    diag["L_attn_filtered"] = a.filtered.size();
    diag["Z"] = a.chain.productive_steps();
    diag["S_size"] = a.space.size();
    diag["answer_span"] = {span->start, span->end};
    diag["extraction_method"] = std::string(datasets::method_name(ex.method));
    diag["hit_context_limit"] = trace.hit_context_limit;

    if (opt.wants("uqac_marg")) {
        if (!model) throw ConfigError("uqac_marg needs a model for re-scoring");
        runtime::RuntimeAdapter adapter(*model);
        t0 = std::chrono::steady_clock::now();
        const auto m = confidence::marginalized_confidence(trace, a.filtered, a.space, adapter, opt.marg_threads);
        out.timings["marg_ms"] = elapsed_ms(t0);
        rec.scores["uqac_marg"] = m.value;
        diag["marg_raw_sum"] = m.raw_sum;
        diag["extra_passes"] = adapter.scoring_passes();
    }

    const auto b = baselines::trace_baselines(trace);
    put("ans_joint", b.p_ans_joint);
    put("resp_joint", b.p_resp_joint);
    put("ans_mean", b.p_ans_mean);
    put("resp_mean", b.p_resp_mean);
    put("entropy_resp", b.entropy_resp);
    put("entropy_ans", b.entropy_ans);
    put("entropy_resp_norm", b.entropy_resp_norm);
    put("entropy_ans_norm", b.entropy_ans_norm);

    if (opt.wants("self_consistency")) {
        if (!model) throw ConfigError("self_consistency needs a model for sampling");
        runtime::RuntimeAdapter adapter(*model);
        t0 = std::chrono::steady_clock::now();
        const std::span<const TokenId> instr(trace.tokens.data(), trace.n_instr);
        const auto sc = baselines::self_consistency(instr, ex.canonical, tag, adapter, opt.self_consistency);
        out.timings["self_consistency_ms"] = elapsed_ms(t0);
        rec.scores["self_consistency"] = sc.score;
        diag["sc_generated"] = sc.generated;
    }
    if (opt.wants("verbalized")) {
        if (!model) throw ConfigError("verbalized needs a model for prompting");
        runtime::RuntimeAdapter adapter(*model);
        t0 = std::chrono::steady_clock::now();
        const auto v = baselines::verbalized(tokenizer.decode(std::span(trace.tokens.data(), trace.n_instr)),
                                             response, adapter, opt.verbalized_template,
                                             opt.verbalized_max_new_tokens);
        out.timings["verbalized_ms"] = elapsed_ms(t0);
        rec.scores["verbalized"] = v.value;
        diag["verbalized_parse_failed"] = v.parse_failed;
    }
    rec.diagnostics = std::move(diag);
    out.record = std::move(rec);
    return out;
}

ScoreOptions score_options(const RunConfig& cfg, const runtime::Tokenizer& tokenizer) {
    ScoreOptions o;
    o.chain = cfg.chain;
    const auto words =
        cfg.stopwords_file.empty() ? chain::default_stopword_list() : chain::read_stopword_file(cfg.stopwords_file);
    o.chain.stopwords = chain::stopword_ids(tokenizer, words);
    o.gamma = cfg.gamma_file.empty() ? gamma::default_gamma() : gamma::read_gamma_file(cfg.gamma_file);
    o.similarity = cfg.similarity;
    o.methods = cfg.effective_methods();
    o.self_consistency.n_samples = cfg.sc_samples;
    o.self_consistency.temperature = cfg.sc_temperature;
    o.self_consistency.seed = cfg.generation.seed;
    if (cfg.verbalized_template_file.empty()) {
        o.verbalized_template = baselines::default_verbalized_template();
    } else {
        std::ifstream in(cfg.verbalized_template_file);
        o.verbalized_template.assign(std::istreambuf_iterator<char>(in), {});
        while (!o.verbalized_template.empty() && o.verbalized_template.back() == '\n') o.verbalized_template.pop_back();
    }
    o.verbalized_max_new_tokens = cfg.verbalized_max_new_tokens;
    o.marg_threads = cfg.marg_threads;
    return o;
}

json chain_dump(const Trace& trace, const InstanceAnalysis& a, const runtime::Tokenizer& tokenizer) {
    auto text = [&](std::size_t pos) { return tokenizer.token_bytes(trace.tokens[pos]); };
    json j;
    j["instance_id"] = trace.instance_id;
    j["n_instr"] = trace.n_instr;
    j["n_total"] = trace.n_total();
    if (trace.answer) {
        j["answer"] = {{"start", trace.answer->start}, {"end", trace.answer->end}};
        std::string ans;
        for (std::size_t p = trace.answer->start; p < trace.answer->end; ++p) ans += text(p);
        j["answer_text"] = ans;
    }
    const std::set<std::size_t> kept(a.filtered.positions.begin(), a.filtered.positions.end());
    json positions = json::array();
    for (std::size_t i = 0; i < a.chain.positions.size(); ++i) {
        const std::size_t p = a.chain.positions[i];
        positions.push_back({{"position", p},
                             {"token", trace.tokens[p]},
                             {"text", text(p)},
                             {"cond_prob", trace.prob_at(p)},
                             {"w", a.weights[i]},
                             {"kept", kept.count(p) > 0}});
    }
    j["chain"] = positions;
    j["discovery_order"] = a.chain.discovery_order;
    json steps = json::array();
    for (const auto& s : a.chain.steps) {
        json ranked = json::array();
        for (const auto& [pos, phi] : s.ranked) {
            ranked.push_back({{"position", pos}, {"phi", phi}, {"text", text(pos)}});
        }
        steps.push_back({{"sources", s.sources},
                         {"ranked", ranked},
                         {"targets", s.targets},
                         {"instruction_hits", s.instruction_hits}});
    }
    j["steps"] = steps;
    j["filtered"] = a.filtered.positions;
    json entries = json::array();
    for (const auto& e : a.space.entries) {
        if (e.original) {
            entries.push_back({{"original", true}});
        } else {
            entries.push_back({{"position", e.position},
                               {"token", e.token},
                               {"text", tokenizer.token_bytes(e.token)},
                               {"candidate_prob", e.candidate_prob}});
        }
    }
    j["reduced_space"] = {{"size", a.space.size()}, {"entries", entries}};
    return j;
}

// --- commands ---------------------------------------------------------------

int cmd_generate(const RunConfig& cfg) {
    cfg.validate();
    const RunPaths paths{cfg.output_dir};
    const auto model = open_model(cfg);
    std::optional<datasets::PromptAssets> storage;
    const auto& assets = prompt_assets(cfg, storage);
    const auto& profile = pick_profile(cfg, assets, model->info().name);

    const auto data_path = cfg.resolved_dataset_path();
    if (!fs::exists(data_path)) throw ConfigError("dataset path does not exist: " + data_path.string());
    auto all = datasets::load(cfg.dataset, data_path, {cfg.strict_counts});
    const std::size_t begin = std::min(cfg.offset, all.size());
    const std::size_t end = cfg.limit ? std::min(all.size(), begin + cfg.limit) : all.size();
    const std::vector<datasets::TaskInstance> todo(all.begin() + static_cast<std::ptrdiff_t>(begin),
                                                   all.begin() + static_cast<std::ptrdiff_t>(end));

    GenerationConfig gen = cfg.generation;
    gen.max_new_tokens = resolved_max_new_tokens(cfg, profile);
    gen.n_samples = 1;
    persist_config(cfg, paths, "generate");
    fs::create_directories(paths.traces());

    std::mutex mu;
    std::vector<json> failures;
    std::atomic<std::size_t> done{0}, skipped{0};
    parallel_for(todo.size(), cfg.workers, [&](std::size_t i) {
        const auto& inst = todo[i];
        const auto dir = paths.trace_dir(inst.instance_id);
        if (fs::exists(dir / "manifest.json")) {
            ++skipped;
            return;
        }
        try {
            const std::string user = datasets::build_prompt(inst, profile, assets);
            const auto ids = model->tokenizer().encode(datasets::apply_chat_template(profile, user));
            runtime::RuntimeAdapter adapter(*model);
            Trace t = adapter.generate_with_trace(ids, gen);
            t.instance_id = inst.instance_id;
            fs::create_directories(dir);
            write_json_file(dir / "instance.json", {{"instance_id", inst.instance_id},
                                                    {"dataset", std::string(datasets::tag_name(inst.dataset))},
                                                    {"subtask", inst.subtask},
                                                    {"question", inst.question},
                                                    {"gold", inst.gold},
                                                    {"profile", profile.name},
                                                    {"user_prompt", user}});
            write_trace(dir, t);
            ++done;
        } catch (const Error& e) {
            std::lock_guard lock(mu);
            spdlog::error("{}: generation failed: {}", inst.instance_id, e.what());
            failures.push_back({{"instance_id", inst.instance_id}, {"stage", "generate"}, {"error", e.what()}});
        }
    });
    std::sort(failures.begin(), failures.end(),
              [](const json& a, const json& b) { return a["instance_id"] < b["instance_id"]; });
    append_lines(paths.failures(), failures);

    // responses.jsonl mirrors the trace store in id order
    std::vector<json> responses;
    for (const auto& id : trace_ids(paths)) {
        const Trace t = read_trace(paths.trace_dir(id), false);
        responses.push_back({{"instance_id", id}, {"response", t.response_text}});
    }
    {
        std::ofstream out(paths.responses(), std::ios::trunc);
        for (const auto& r : responses) out << r.dump(-1, ' ', false, kJsonReplace) << "\n";
    }
    spdlog::info("generate: {} new trace(s), {} already present, {} failure(s)", done.load(), skipped.load(),
                 failures.size());
    return failures.empty() ? kExitOk : kExitPartial;
}

int cmd_score(const RunConfig& cfg) {
    cfg.validate();
    const RunPaths paths{cfg.output_dir};
    if (!fs::is_directory(paths.traces())) throw ConfigError("no trace store under " + paths.root.string());
    const auto model = open_model(cfg);
    std::optional<datasets::PromptAssets> storage;
    const auto& assets = prompt_assets(cfg, storage);
    const auto& profile = pick_profile(cfg, assets, model->info().name);
    ScoreOptions opt = score_options(cfg, model->tokenizer());
    opt.self_consistency.max_new_tokens = resolved_max_new_tokens(cfg, profile);
    persist_config(cfg, paths, "score");

    std::set<std::string> seen = ids_in(paths.records());
    for (const auto& id : ids_in(paths.excluded())) seen.insert(id);
    std::vector<std::string> pending;
    for (const auto& id : trace_ids(paths)) {
        if (!seen.count(id)) pending.push_back(id);
    }

    std::size_t n_records = 0, n_excluded = 0, n_failed = 0;
    const std::size_t chunk = std::max<std::size_t>(cfg.workers * 4, 8);
    for (std::size_t c0 = 0; c0 < pending.size(); c0 += chunk) {
        const std::size_t c1 = std::min(pending.size(), c0 + chunk);
        std::vector<ScoredInstance> results(c1 - c0);
        std::vector<std::optional<std::string>> errors(c1 - c0);
        parallel_for(c1 - c0, cfg.workers, [&](std::size_t k) {
            const auto& id = pending[c0 + k];
            try {
                const auto dir = paths.trace_dir(id);
                Trace t = read_trace(dir);
                const json inst = read_json_file(dir / "instance.json");
                const auto tag = datasets::parse_tag(inst.value("dataset", std::string(tag_name(cfg.dataset))));
                results[k] = score_trace(t, inst.at("gold").get<std::string>(), tag, model.get(), opt);
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                errors[k] = e.what();
            }
        });
        std::vector<json> recs, excl, fails, times;
        for (std::size_t k = 0; k < results.size(); ++k) {
            const auto& id = pending[c0 + k];
            if (errors[k]) {
                spdlog::error("{}: scoring failed: {}", id, *errors[k]);
                fails.push_back({{"instance_id", id}, {"stage", "score"}, {"error", *errors[k]}});
                continue;
            }
            const auto& r = results[k];
            if (r.excluded_reason) {
                excl.push_back({{"instance_id", id}, {"reason", *r.excluded_reason}});
                continue;
            }
            recs.push_back(metrics::to_json(*r.record));
            json tm = r.timings;
            tm["instance_id"] = id;
            times.push_back(std::move(tm));
        }
        append_lines(paths.records(), recs);
        append_lines(paths.excluded(), excl);
        append_lines(paths.failures(), fails);
        append_lines(paths.timings(), times);
        n_records += recs.size();
        n_excluded += excl.size();
        n_failed += fails.size();
    }
    spdlog::info("score: {} record(s), {} excluded, {} failure(s), {} already scored", n_records, n_excluded, n_failed,
                 seen.size());
    return n_failed == 0 ? kExitOk : kExitPartial;
}

int cmd_report(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    const RunPaths paths{cfg.output_dir};
    if (!fs::exists(paths.records())) throw ConfigError("no records file " + paths.records().string());
    const auto records = metrics::read_records(paths.records().string());
    const auto methods = cfg.effective_methods();
    // only methods present in the records
    std::vector<std::string> present;
    for (const auto& m : methods) {
        if (std::any_of(records.begin(), records.end(), [&](const auto& r) { return r.scores.count(m) > 0; })) {
            present.push_back(m);
        }
    }
    const auto reports = metrics::evaluate(records, present, cfg.seeds, cfg.subsample_cap);

    fs::create_directories(paths.report_dir());
    json all = json::array();
    bool partial = false;
    for (const auto& r : reports) {
        const json j = metrics::report_to_json(r);
        all.push_back(j);
        write_json_file(paths.report_dir() / (r.method + ".json"), j);
        if (r.error) {
            partial = true;
            continue;
        }
        if (!r.bins.empty()) {
            std::ofstream csv(paths.report_dir() / (r.method + "_bins.csv"), std::ios::trunc);
            csv << metrics::bins_csv(r);
        }
    }
    const auto n_correct = static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const auto& r) { return r.correct; }));
    std::string model_name = fs::path(cfg.model_path).filename().string();
    if (model_name.empty()) model_name = "model";
    const std::string title = model_name + " / " + std::string(datasets::tag_name(cfg.dataset)) + ": " +
                              std::to_string(records.size()) + " records (" + std::to_string(n_correct) +
                              " correct, " + std::to_string(records.size() - n_correct) + " incorrect), " +
                              std::to_string(cfg.seeds.size()) + " seeds";
    const std::string table = metrics::render_table(reports, title);
    write_json_file(paths.report_dir() / "report.json", {{"title", title}, {"methods", all}});
    {
        std::ofstream txt(paths.report_dir() / "summary.txt", std::ios::trunc);
        txt << table;
    }
    out << table;
    return partial ? kExitPartial : kExitOk;
}

int cmd_inspect(const RunConfig& cfg, const std::string& instance_id, std::ostream& out) {
    cfg.validate();
    const RunPaths paths{cfg.output_dir};
    const auto dir = paths.trace_dir(instance_id);
    if (!fs::exists(dir / "manifest.json")) throw ConfigError("no trace for instance '" + instance_id + "'");
    const auto model = open_model(cfg);
    const auto& tok = model->tokenizer();
    const ScoreOptions opt = score_options(cfg, tok);

    Trace t = read_trace(dir);
    const json inst = read_json_file(dir / "instance.json");
    const auto tag = datasets::parse_tag(inst.value("dataset", std::string(tag_name(cfg.dataset))));
    const std::string response = tok.decode(std::span(t.tokens.data() + t.n_instr, t.n_resp()));
    const auto ex = datasets::extract_answer(response, tag);
    json dump;
    if (ex.success) {
        if (auto span = datasets::answer_span_from_bytes(tok, t.tokens, t.n_instr, ex.begin, ex.end)) t.answer = span;
    }
    if (!t.answer) {
        dump = {{"instance_id", instance_id}, {"excluded", "no extractable answer"}};
    } else {
        dump = chain_dump(t, analyze(t, opt), tok);
        dump["extracted_answer"] = ex.canonical;
        dump["gold_answer"] = inst.value("gold", std::string());
        dump["correct"] = datasets::judge(ex.canonical, inst.value("gold", std::string()), tag);
    }
    out << dump.dump(2, ' ', false, kJsonReplace) << "\n";
    return kExitOk;
}

int cmd_calibrate_gamma(const RunConfig& cfg, const fs::path& traces_dir, const fs::path& out_path, std::size_t c,
                        std::size_t window) {
    const fs::path dir = traces_dir.empty() ? RunPaths{cfg.output_dir}.traces() : traces_dir;
    if (!fs::is_directory(dir)) throw ConfigError("trace directory does not exist: " + dir.string());
    if (out_path.empty()) throw ConfigError("no output path for the gamma file");
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory() && fs::exists(e.path() / "manifest.json")) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw ConfigError("no traces under " + dir.string());
    gamma::CurveAccumulator acc(window);
    for (const auto& d : dirs) acc.add(read_trace(d));
    const auto curve = acc.finish();
    const auto fit = gamma::fit_gamma(curve.curve, c);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    gamma::write_gamma_file(out_path, fit, curve);
    spdlog::info("calibrate-gamma: {} trace(s) used, {} skipped; wrote {}", curve.traces_used, curve.traces_skipped,
                 out_path.string());
    return kExitOk;
}

}  // namespace uqac::harness
