#include "uqac/trace_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "uqac/errors.hpp"

namespace uqac {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kTensors = "tensors.bin";

void write_f32(std::ofstream& out, const std::vector<float>& v) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    } else {
        for (float f : v) {
            const auto u = __builtin_bswap32(std::bit_cast<std::uint32_t>(f));
            out.write(reinterpret_cast<const char*>(&u), sizeof u);
        }
    }
}

void read_f32(std::ifstream& in, std::vector<float>& v, std::size_t count, const fs::path& path) {
    v.resize(count);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float)) {
        throw FormatError(path.string() + ": tensor file is truncated");
    }
    if constexpr (std::endian::native != std::endian::little) {
        for (float& f : v) f = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(f)));
    }
}

}  // namespace

json trace_manifest(const Trace& t) {
    json cands = json::array();
    for (const auto& list : t.top_candidates) {
        json row = json::array();
        for (const auto& c : list) row.push_back(json::array({c.token, c.prob}));
        cands.push_back(std::move(row));
    }
    json j;
    j["trace_format"] = kTraceFormat;
    j["instance_id"] = t.instance_id;
    j["model_name"] = t.model_name;
    j["prompt_text"] = t.prompt_text;
    j["response_text"] = t.response_text;
    j["tokens"] = t.tokens;
    j["n_instr"] = t.n_instr;
    j["answer"] = t.answer ? json{{"start", t.answer->start}, {"end", t.answer->end}} : json(nullptr);
    j["hit_context_limit"] = t.hit_context_limit;
    j["cond_prob"] = t.cond_prob;
    j["entropy"] = t.entropy;
    j["candidate_floor"] = t.candidate_floor;
    j["top_candidates"] = std::move(cands);
    j["n_layers"] = t.n_layers;
    j["n_heads"] = t.n_heads;
    j["hidden_dim"] = t.hidden_dim;
    j["vocab_size"] = t.vocab_size;
    j["tensors"] = {
        {"file", kTensors},
        {"dtype", "f32"},
        {"byte_order", "little"},
        {"attention", {{"offset", 0},
                       {"count", t.attention.size()},
                       {"layout", "per generated position p: [layer][head][p]"}}},
        {"hidden", {{"offset", t.attention.size() * sizeof(float)},
                    {"count", t.hidden.size()},
                    {"shape", {t.has_hidden() ? t.n_resp() : 0, t.has_hidden() ? t.hidden_dim : 0}}}},
    };
    return j;
}

void write_trace(const fs::path& dir, const Trace& trace) {
    fs::create_directories(dir);
    const auto tmp_bin = dir / (std::string(kTensors) + ".tmp");
    {
        std::ofstream out(tmp_bin, std::ios::binary | std::ios::trunc);
        if (!out) throw LoadError("cannot write " + tmp_bin.string());
        write_f32(out, trace.attention);
        write_f32(out, trace.hidden);
        if (!out) throw LoadError("failed writing " + tmp_bin.string());
    }
    const auto tmp_manifest = dir / (std::string(kManifest) + ".tmp");
    {
        std::ofstream out(tmp_manifest, std::ios::trunc);
        if (!out) throw LoadError("cannot write " + tmp_manifest.string());
        out << trace_manifest(trace).dump(-1, ' ', false, json::error_handler_t::replace) << "\n";
        if (!out) throw LoadError("failed writing " + tmp_manifest.string());
    }
    // the manifest lands last, so a directory with a manifest is complete
    fs::rename(tmp_bin, dir / kTensors);
    fs::rename(tmp_manifest, dir / kManifest);
}

Trace read_trace(const fs::path& dir, bool load_tensors) {
    const auto mpath = dir / kManifest;
    std::ifstream in(mpath);
    if (!in) throw LoadError("missing trace manifest " + mpath.string());
    Trace t;
    std::size_t att_count = 0, hid_count = 0, hid_offset = 0;
    try {
        const json j = json::parse(in);
        if (j.at("trace_format").get<int>() != kTraceFormat) {
            throw FormatError(mpath.string() + ": unsupported trace_format " + j.at("trace_format").dump());
        }
        t.instance_id = j.at("instance_id").get<std::string>();
        t.model_name = j.at("model_name").get<std::string>();
        t.prompt_text = j.at("prompt_text").get<std::string>();
        t.response_text = j.at("response_text").get<std::string>();
        t.tokens = j.at("tokens").get<std::vector<TokenId>>();
        t.n_instr = j.at("n_instr").get<std::size_t>();
        if (!j.at("answer").is_null()) {
            t.answer = AnswerSpan{j["answer"].at("start").get<std::size_t>(), j["answer"].at("end").get<std::size_t>()};
        }
        t.hit_context_limit = j.at("hit_context_limit").get<bool>();
        t.cond_prob = j.at("cond_prob").get<std::vector<double>>();
        t.entropy = j.at("entropy").get<std::vector<double>>();
        t.candidate_floor = j.at("candidate_floor").get<double>();
        for (const auto& row : j.at("top_candidates")) {
            std::vector<Candidate> list;
            for (const auto& c : row) list.push_back({c.at(0).get<TokenId>(), c.at(1).get<double>()});
            t.top_candidates.push_back(std::move(list));
        }
        t.n_layers = j.at("n_layers").get<std::size_t>();
        t.n_heads = j.at("n_heads").get<std::size_t>();
        t.hidden_dim = j.at("hidden_dim").get<std::size_t>();
        t.vocab_size = j.at("vocab_size").get<std::size_t>();
        const auto& tens = j.at("tensors");
        att_count = tens.at("attention").at("count").get<std::size_t>();
        hid_count = tens.at("hidden").at("count").get<std::size_t>();
        hid_offset = tens.at("hidden").at("offset").get<std::size_t>();
    } catch (const json::exception& e) {
        throw FormatError(mpath.string() + ": " + e.what());
    }
    if (t.tokens.size() < t.n_instr || t.cond_prob.size() != t.n_resp()) {
        throw FormatError(mpath.string() + ": inconsistent token and probability counts");
    }
    if (load_tensors) {
        const auto bpath = dir / kTensors;
        std::ifstream bin(bpath, std::ios::binary);
        if (!bin) throw LoadError("missing tensor file " + bpath.string());
        read_f32(bin, t.attention, att_count, bpath);
        if (hid_offset != att_count * sizeof(float)) throw FormatError(bpath.string() + ": unexpected hidden offset");
        read_f32(bin, t.hidden, hid_count, bpath);
        if (!t.attention.empty() && !t.has_attention()) {
            throw FormatError(bpath.string() + ": attention block does not match the manifest shape");
        }
        if (!t.hidden.empty() && !t.has_hidden()) {
            throw FormatError(bpath.string() + ": hidden block does not match the manifest shape");
        }
    }
    return t;
}

}  // namespace uqac
