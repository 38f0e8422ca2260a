#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "uqac/runtime/tokenizer.hpp"
#include "uqac/trace.hpp"

namespace uqac::runtime {

struct ModelInfo {
    std::string name;
    std::size_t vocab_size = 0;
    std::size_t n_layers = 0;
    std::size_t n_heads = 0;
    std::size_t hidden_dim = 0;
    std::size_t max_context = 0;
    std::vector<TokenId> eos_tokens;
};

// Output of one decoding step. Views stay valid until the next append().
struct StepOutput {
    std::size_t position = 0;            // index of the token just appended
    std::span<const double> probs;       // next-token distribution, vocab_size entries
    std::span<const float> hidden;       // last-layer state at `position`
    // [layer][head][position + 1], present only when attention capture was requested
    std::span<const float> attention;
    std::size_t n_layers = 0;
    std::size_t n_heads = 0;

    [[nodiscard]] std::span<const float> attention_row(std::size_t layer, std::size_t head) const {
        const std::size_t len = position + 1;
        return attention.subspan((layer * n_heads + head) * len, len);
    }
};

// Incremental decoder state (KV cache or equivalent) for one sequence.
class DecodeSession {
public:
    virtual ~DecodeSession() = default;
    virtual const StepOutput& append(TokenId token, bool capture_attention) = 0;
    [[nodiscard]] virtual std::size_t length() const = 0;
};

// A white-box autoregressive LM. Implementations must allow concurrent
// sessions from multiple threads (the model itself is read-only).
class LanguageModel {
public:
    virtual ~LanguageModel() = default;
    [[nodiscard]] virtual const ModelInfo& info() const = 0;
    [[nodiscard]] virtual std::unique_ptr<DecodeSession> open_session() const = 0;
    [[nodiscard]] virtual const Tokenizer& tokenizer() const = 0;

    [[nodiscard]] bool is_eos(TokenId t) const;
};

// Loads a model directory: `table.json` selects the toy table model, otherwise
// a Hugging Face style directory (config.json, safetensors, tokenizer.json).
[[nodiscard]] std::unique_ptr<LanguageModel> load_model(const std::string& path);

}  // namespace uqac::runtime
