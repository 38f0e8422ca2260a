#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "uqac/runtime/model.hpp"

namespace uqac::runtime {

// Hand-specified Markov model: the next-token distribution depends on the last
// `order` tokens (fewer near the start of the sequence). Attention rows and
// hidden states are deterministic synthetic functions of the token history so
// that the full UQAC pipeline can run against it.
struct TableModelSpec {
    std::string name = "table";
    std::vector<std::string> pieces;
    std::size_t order = 1;
    std::map<std::vector<TokenId>, std::vector<double>> rows;
    std::vector<double> fallback;  // uniform when empty
    std::vector<TokenId> eos;
    std::size_t n_layers = 2;
    std::size_t n_heads = 2;
    std::size_t max_context = 4096;
};

class TableModel final : public LanguageModel {
public:
    explicit TableModel(TableModelSpec spec);

    // {"name", "pieces": [...], "order", "rows": [{"context": [...], "probs": [...]}],
    //  "fallback": [...], "eos": [...], "n_layers", "n_heads", "max_context"}
    [[nodiscard]] static std::unique_ptr<TableModel> from_json(const nlohmann::json& doc);

    [[nodiscard]] const ModelInfo& info() const override { return info_; }
    [[nodiscard]] std::unique_ptr<DecodeSession> open_session() const override;
    [[nodiscard]] const Tokenizer& tokenizer() const override { return tokenizer_; }

    [[nodiscard]] const std::vector<double>& distribution(std::span<const TokenId> prefix) const;
    [[nodiscard]] const TableModelSpec& spec() const noexcept { return spec_; }

    void synthetic_attention(std::span<const TokenId> history, std::size_t layer, std::size_t head,
                             std::span<float> row) const;
    void synthetic_hidden(std::span<const TokenId> history, std::span<float> out) const;

private:
    TableModelSpec spec_;
    std::vector<double> uniform_;
    ModelInfo info_;
    PieceTokenizer tokenizer_;
};

}  // namespace uqac::runtime
