#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "uqac/runtime/model.hpp"

namespace uqac::runtime {

enum class RopeScaling { none, linear, llama3 };

struct TransformerConfig {
    std::string architecture;  // LlamaForCausalLM | Qwen2ForCausalLM | MistralForCausalLM
    std::size_t hidden_size = 0;
    std::size_t intermediate_size = 0;
    std::size_t n_layers = 0;
    std::size_t n_heads = 0;
    std::size_t n_kv_heads = 0;
    std::size_t head_dim = 0;
    std::size_t vocab_size = 0;
    std::size_t max_position = 2048;
    float rms_eps = 1e-5f;
    double rope_theta = 10000.0;
    RopeScaling rope_scaling = RopeScaling::none;
    double rope_factor = 1.0;
    double rope_low_freq_factor = 1.0;
    double rope_high_freq_factor = 4.0;
    double rope_original_max_position = 8192.0;
    bool tie_embeddings = false;
    bool qkv_bias = false;
    std::vector<TokenId> eos_tokens;

    // Parses config.json (and generation_config.json for extra EOS ids).
    [[nodiscard]] static TransformerConfig from_directory(const std::filesystem::path& dir);
};

// Decoder-only Llama-family transformer (RMSNorm, RoPE, GQA, SwiGLU) in f32.
// Attention rows are the post-softmax weights of every head.
class TransformerModel final : public LanguageModel {
public:
    [[nodiscard]] static std::unique_ptr<TransformerModel> load(const std::filesystem::path& dir);

    [[nodiscard]] const ModelInfo& info() const override { return info_; }
    [[nodiscard]] std::unique_ptr<DecodeSession> open_session() const override;
    [[nodiscard]] const Tokenizer& tokenizer() const override { return *tokenizer_; }
    [[nodiscard]] const TransformerConfig& config() const noexcept { return cfg_; }

    struct Layer {
        std::vector<float> attn_norm, wq, wk, wv, bq, bk, bv, wo;
        std::vector<float> ffn_norm, w_gate, w_up, w_down;
    };

    [[nodiscard]] const std::vector<Layer>& layers() const noexcept { return layers_; }
    [[nodiscard]] const std::vector<float>& embedding() const noexcept { return embed_; }
    [[nodiscard]] const std::vector<float>& final_norm() const noexcept { return final_norm_; }
    [[nodiscard]] const std::vector<float>& lm_head() const noexcept { return tie_ ? embed_ : lm_head_; }
    [[nodiscard]] const std::vector<double>& inv_freq() const noexcept { return inv_freq_; }

private:
    TransformerModel() = default;

    TransformerConfig cfg_;
    ModelInfo info_;
    std::unique_ptr<Tokenizer> tokenizer_;
    std::vector<Layer> layers_;
    std::vector<float> embed_, final_norm_, lm_head_;
    std::vector<double> inv_freq_;
    bool tie_ = false;
};

}  // namespace uqac::runtime
