#include "uqac/runtime/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "uqac/errors.hpp"
#include "uqac/runtime/safetensors.hpp"
#include "uqac/simd/kernels.hpp"

namespace uqac::runtime {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw LoadError("cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw LoadError("malformed JSON in " + p.string() + ": " + e.what());
    }
}

void collect_ids(const json& v, std::vector<TokenId>& out) {
    if (v.is_number_integer()) {
        out.push_back(v.get<TokenId>());
    } else if (v.is_array()) {
        for (const auto& e : v) out.push_back(e.get<TokenId>());
    }
}

}  // namespace

TransformerConfig TransformerConfig::from_directory(const fs::path& dir) {
    const json doc = read_json(dir / "config.json");
    TransformerConfig c;
    const auto archs = doc.value("architectures", std::vector<std::string>{"LlamaForCausalLM"});
    c.architecture = archs.empty() ? "LlamaForCausalLM" : archs.front();
    if (c.architecture != "LlamaForCausalLM" && c.architecture != "Qwen2ForCausalLM" &&
        c.architecture != "MistralForCausalLM") {
        throw LoadError("unsupported architecture " + c.architecture);
    }
    c.hidden_size = doc.at("hidden_size").get<std::size_t>();
    c.intermediate_size = doc.at("intermediate_size").get<std::size_t>();
    c.n_layers = doc.at("num_hidden_layers").get<std::size_t>();
    c.n_heads = doc.at("num_attention_heads").get<std::size_t>();
    c.n_kv_heads = doc.value("num_key_value_heads", c.n_heads);
    c.head_dim = c.hidden_size / c.n_heads;
    if (doc.contains("head_dim") && !doc.at("head_dim").is_null()) c.head_dim = doc.at("head_dim").get<std::size_t>();
    c.vocab_size = doc.at("vocab_size").get<std::size_t>();
    c.max_position = doc.value("max_position_embeddings", std::size_t{2048});
    c.rms_eps = doc.value("rms_norm_eps", 1e-5f);
    c.rope_theta = doc.value("rope_theta", 10000.0);
    c.tie_embeddings = doc.value("tie_word_embeddings", false);
    c.qkv_bias = c.architecture == "Qwen2ForCausalLM" || doc.value("attention_bias", false);
    if (doc.value("hidden_act", std::string("silu")) != "silu") throw LoadError("only silu activations are supported");
    // Newer checkpoints nest theta and the scaling rule under "rope_parameters".
    const json* rope = nullptr;
    if (doc.contains("rope_parameters") && doc.at("rope_parameters").is_object()) {
        rope = &doc.at("rope_parameters");
        c.rope_theta = rope->value("rope_theta", c.rope_theta);
    } else if (doc.contains("rope_scaling") && !doc.at("rope_scaling").is_null()) {
        rope = &doc.at("rope_scaling");
    }
    if (rope) {
        const auto& rs = *rope;
        const auto type = rs.value("rope_type", rs.value("type", std::string("default")));
        if (type == "llama3") {
            c.rope_scaling = RopeScaling::llama3;
            c.rope_factor = rs.at("factor").get<double>();
            c.rope_low_freq_factor = rs.value("low_freq_factor", 1.0);
            c.rope_high_freq_factor = rs.value("high_freq_factor", 4.0);
            c.rope_original_max_position = rs.value("original_max_position_embeddings", 8192.0);
        } else if (type == "linear") {
            c.rope_scaling = RopeScaling::linear;
            c.rope_factor = rs.at("factor").get<double>();
        } else if (type != "default") {
            throw LoadError("unsupported rope scaling " + type);
        }
    }
    if (doc.contains("eos_token_id")) collect_ids(doc.at("eos_token_id"), c.eos_tokens);
    if (fs::exists(dir / "generation_config.json")) {
        const json gen = read_json(dir / "generation_config.json");
        if (gen.contains("eos_token_id")) collect_ids(gen.at("eos_token_id"), c.eos_tokens);
    }
    std::sort(c.eos_tokens.begin(), c.eos_tokens.end());
    c.eos_tokens.erase(std::unique(c.eos_tokens.begin(), c.eos_tokens.end()), c.eos_tokens.end());
    if (c.n_heads % c.n_kv_heads != 0) throw LoadError("num_attention_heads must be a multiple of num_key_value_heads");
    return c;
}

std::unique_ptr<TransformerModel> TransformerModel::load(const fs::path& dir) {
    std::unique_ptr<TransformerModel> m(new TransformerModel());
    m->cfg_ = TransformerConfig::from_directory(dir);
    const auto& c = m->cfg_;
    m->tokenizer_ = BpeTokenizer::from_file(dir / "tokenizer.json");

    const auto archive = SafetensorsArchive::open(dir);
    const std::size_t d = c.hidden_size, hd = c.head_dim, ff = c.intermediate_size;
    const std::size_t qdim = c.n_heads * hd, kvdim = c.n_kv_heads * hd;
    m->embed_ = archive.read_f32("model.embed_tokens.weight", {c.vocab_size, d});
    m->final_norm_ = archive.read_f32("model.norm.weight", {d});
    m->tie_ = c.tie_embeddings || !archive.contains("lm_head.weight");
    if (!m->tie_) m->lm_head_ = archive.read_f32("lm_head.weight", {c.vocab_size, d});

    m->layers_.resize(c.n_layers);
    for (std::size_t i = 0; i < c.n_layers; ++i) {
        const std::string p = "model.layers." + std::to_string(i) + ".";
        auto& L = m->layers_[i];
        L.attn_norm = archive.read_f32(p + "input_layernorm.weight", {d});
        L.wq = archive.read_f32(p + "self_attn.q_proj.weight", {qdim, d});
        L.wk = archive.read_f32(p + "self_attn.k_proj.weight", {kvdim, d});
        L.wv = archive.read_f32(p + "self_attn.v_proj.weight", {kvdim, d});
        if (c.qkv_bias) {
            L.bq = archive.read_f32(p + "self_attn.q_proj.bias", {qdim});
            L.bk = archive.read_f32(p + "self_attn.k_proj.bias", {kvdim});
            L.bv = archive.read_f32(p + "self_attn.v_proj.bias", {kvdim});
        }
        L.wo = archive.read_f32(p + "self_attn.o_proj.weight", {d, qdim});
        L.ffn_norm = archive.read_f32(p + "post_attention_layernorm.weight", {d});
        L.w_gate = archive.read_f32(p + "mlp.gate_proj.weight", {ff, d});
        L.w_up = archive.read_f32(p + "mlp.up_proj.weight", {ff, d});
        L.w_down = archive.read_f32(p + "mlp.down_proj.weight", {d, ff});
    }

    // Rotary frequencies, including the llama3 / linear rescaling rules.
    m->inv_freq_.resize(hd / 2);
    for (std::size_t i = 0; i < hd / 2; ++i) {
        double f = 1.0 / std::pow(c.rope_theta, static_cast<double>(2 * i) / static_cast<double>(hd));
        if (c.rope_scaling == RopeScaling::linear) {
            f /= c.rope_factor;
        } else if (c.rope_scaling == RopeScaling::llama3) {
            const double low_wavelen = c.rope_original_max_position / c.rope_low_freq_factor;
            const double high_wavelen = c.rope_original_max_position / c.rope_high_freq_factor;
            const double wavelen = 2.0 * std::numbers::pi / f;
            if (wavelen > low_wavelen) {
                f /= c.rope_factor;
            } else if (wavelen >= high_wavelen) {
                const double smooth = (c.rope_original_max_position / wavelen - c.rope_low_freq_factor) /
                                      (c.rope_high_freq_factor - c.rope_low_freq_factor);
                f = (1.0 - smooth) * f / c.rope_factor + smooth * f;
            }
        }
        m->inv_freq_[i] = f;
    }

    m->info_.name = dir.filename().string().empty() ? dir.parent_path().filename().string() : dir.filename().string();
    m->info_.vocab_size = c.vocab_size;
    m->info_.n_layers = c.n_layers;
    m->info_.n_heads = c.n_heads;
    m->info_.hidden_dim = d;
    m->info_.max_context = c.max_position;
    m->info_.eos_tokens = c.eos_tokens;
    return m;
}

namespace {

class TransformerSession final : public DecodeSession {
public:
    explicit TransformerSession(const TransformerModel& model) : m_(model), c_(model.config()), k_(simd::kernels()) {
        const std::size_t d = c_.hidden_size;
        x_.resize(d);
        xn_.resize(d);
        q_.resize(c_.n_heads * c_.head_dim);
        kbuf_.resize(c_.n_kv_heads * c_.head_dim);
        vbuf_.resize(c_.n_kv_heads * c_.head_dim);
        att_out_.resize(c_.n_heads * c_.head_dim);
        proj_.resize(d);
        gate_.resize(c_.intermediate_size);
        up_.resize(c_.intermediate_size);
        hidden_.resize(d);
        logits_.resize(c_.vocab_size);
        probs_.resize(c_.vocab_size);
        kcache_.resize(c_.n_layers);
        vcache_.resize(c_.n_layers);
    }

    const StepOutput& append(TokenId token, bool capture_attention) override {
        if (token < 0 || static_cast<std::size_t>(token) >= c_.vocab_size) throw PositionError("token id out of range");
        if (pos_ >= c_.max_position) throw TruncationError("context length exceeded");
        const std::size_t d = c_.hidden_size, hd = c_.head_dim;
        const std::size_t kvdim = c_.n_kv_heads * hd;
        const std::size_t group = c_.n_heads / c_.n_kv_heads;
        const std::size_t len = pos_ + 1;
        const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(hd));

        std::copy_n(m_.embedding().begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(token) * d), d,
                    x_.begin());
        rope_tables();
        if (capture_attention) attention_.assign(c_.n_layers * c_.n_heads * len, 0.0f);
        scores_.resize(len);

        for (std::size_t l = 0; l < c_.n_layers; ++l) {
            const auto& L = m_.layers()[l];
            k_.rmsnorm(x_.data(), L.attn_norm.data(), xn_.data(), d, c_.rms_eps);
            k_.matvec(L.wq.data(), xn_.data(), q_.data(), q_.size(), d);
            k_.matvec(L.wk.data(), xn_.data(), kbuf_.data(), kvdim, d);
            k_.matvec(L.wv.data(), xn_.data(), vbuf_.data(), kvdim, d);
            if (c_.qkv_bias) {
                k_.add(L.bq.data(), q_.data(), q_.size());
                k_.add(L.bk.data(), kbuf_.data(), kvdim);
                k_.add(L.bv.data(), vbuf_.data(), kvdim);
            }
            for (std::size_t h = 0; h < c_.n_heads; ++h) rotate(q_.data() + h * hd);
            for (std::size_t h = 0; h < c_.n_kv_heads; ++h) rotate(kbuf_.data() + h * hd);
            kcache_[l].insert(kcache_[l].end(), kbuf_.begin(), kbuf_.end());
            vcache_[l].insert(vcache_[l].end(), vbuf_.begin(), vbuf_.end());

            std::fill(att_out_.begin(), att_out_.end(), 0.0f);
            for (std::size_t h = 0; h < c_.n_heads; ++h) {
                const std::size_t kvh = h / group;
                const float* qh = q_.data() + h * hd;
                for (std::size_t j = 0; j < len; ++j) {
                    scores_[j] = k_.dot(qh, kcache_[l].data() + j * kvdim + kvh * hd, hd) * inv_sqrt;
                }
                k_.softmax(scores_.data(), len);
                if (capture_attention) {
                    std::copy(scores_.begin(), scores_.end(),
                              attention_.begin() + static_cast<std::ptrdiff_t>((l * c_.n_heads + h) * len));
                }
                float* out = att_out_.data() + h * hd;
                for (std::size_t j = 0; j < len; ++j) {
                    k_.axpy(scores_[j], vcache_[l].data() + j * kvdim + kvh * hd, out, hd);
                }
            }
            k_.matvec(L.wo.data(), att_out_.data(), proj_.data(), d, att_out_.size());
            k_.add(proj_.data(), x_.data(), d);

            k_.rmsnorm(x_.data(), L.ffn_norm.data(), xn_.data(), d, c_.rms_eps);
            k_.matvec(L.w_gate.data(), xn_.data(), gate_.data(), gate_.size(), d);
            k_.matvec(L.w_up.data(), xn_.data(), up_.data(), up_.size(), d);
            k_.silu_mul(gate_.data(), up_.data(), gate_.data(), gate_.size());
            k_.matvec(L.w_down.data(), gate_.data(), proj_.data(), d, gate_.size());
            k_.add(proj_.data(), x_.data(), d);
        }
        k_.rmsnorm(x_.data(), m_.final_norm().data(), hidden_.data(), d, c_.rms_eps);
        k_.matvec(m_.lm_head().data(), hidden_.data(), logits_.data(), c_.vocab_size, d);

        // Next-token distribution in double precision.
        const float mx = *std::max_element(logits_.begin(), logits_.end());
        double total = 0.0;
        for (std::size_t i = 0; i < c_.vocab_size; ++i) {
            probs_[i] = std::exp(static_cast<double>(logits_[i]) - static_cast<double>(mx));
            total += probs_[i];
        }
        const double inv_total = 1.0 / total;
        for (auto& p : probs_) p *= inv_total;

        out_ = StepOutput{};
        out_.position = pos_;
        out_.probs = probs_;
        out_.hidden = hidden_;
        out_.n_layers = c_.n_layers;
        out_.n_heads = c_.n_heads;
        if (capture_attention) out_.attention = attention_;
        ++pos_;
        return out_;
    }

    std::size_t length() const override { return pos_; }

private:
    void rope_tables() {
        const auto& inv = m_.inv_freq();
        cos_.resize(inv.size());
        sin_.resize(inv.size());
        for (std::size_t i = 0; i < inv.size(); ++i) {
            const double angle = static_cast<double>(pos_) * inv[i];
            cos_[i] = static_cast<float>(std::cos(angle));
            sin_[i] = static_cast<float>(std::sin(angle));
        }
    }

    // rotate_half convention: pairs (i, i + hd/2)
    void rotate(float* v) const {
        const std::size_t half = c_.head_dim / 2;
        for (std::size_t i = 0; i < half; ++i) {
            const float a = v[i], b = v[i + half];
            v[i] = a * cos_[i] - b * sin_[i];
            v[i + half] = b * cos_[i] + a * sin_[i];
        }
    }

    const TransformerModel& m_;
    const TransformerConfig& c_;
    const simd::KernelTable& k_;
    std::size_t pos_ = 0;
    std::vector<float> x_, xn_, q_, kbuf_, vbuf_, att_out_, proj_, gate_, up_, hidden_, logits_, scores_;
    std::vector<float> cos_, sin_, attention_;
    std::vector<double> probs_;
    std::vector<std::vector<float>> kcache_, vcache_;
    StepOutput out_;
};

}  // namespace

std::unique_ptr<DecodeSession> TransformerModel::open_session() const {
    return std::make_unique<TransformerSession>(*this);
}

}  // namespace uqac::runtime
