#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uqac/trace.hpp"

namespace uqac::runtime {

class Tokenizer {
public:
    virtual ~Tokenizer() = default;

    [[nodiscard]] virtual std::vector<TokenId> encode(std::string_view text) const = 0;
    // Raw bytes this token contributes to decoded text (may be a partial UTF-8 sequence).
    [[nodiscard]] virtual std::string token_bytes(TokenId id) const = 0;
    [[nodiscard]] virtual std::size_t vocab_size() const = 0;
    [[nodiscard]] virtual std::optional<TokenId> find_token(std::string_view piece) const = 0;

    [[nodiscard]] std::string decode(std::span<const TokenId> ids) const;
};

// Fixed vocabulary of text pieces, greedy longest-match encoding. Backs the
// toy table models used in tests and small fixtures.
class PieceTokenizer final : public Tokenizer {
public:
    explicit PieceTokenizer(std::vector<std::string> pieces);

    [[nodiscard]] std::vector<TokenId> encode(std::string_view text) const override;
    [[nodiscard]] std::string token_bytes(TokenId id) const override;
    [[nodiscard]] std::size_t vocab_size() const override { return pieces_.size(); }
    [[nodiscard]] std::optional<TokenId> find_token(std::string_view piece) const override;

private:
    std::vector<std::string> pieces_;
    std::map<std::string, TokenId, std::less<>> index_;
    std::size_t longest_ = 0;
};

// How the text is cut into words before byte-level BPE.
enum class SplitPattern {
    gpt2,        // 's|'t|...| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
    llama3,      // case-insensitive contractions, [^\r\n\p{L}\p{N}]?\p{L}+, \p{N}{1,3}, ...
    qwen2,       // as llama3 with single-digit numbers
};

// Splits `text` into pre-tokens. Non-ASCII code points are classified with a
// small table (whitespace, punctuation blocks); everything else counts as a letter.
[[nodiscard]] std::vector<std::string_view> pre_tokenize(std::string_view text, SplitPattern pattern);

// Byte-level BPE as serialized in a Hugging Face tokenizer.json.
class BpeTokenizer final : public Tokenizer {
public:
    [[nodiscard]] static std::unique_ptr<BpeTokenizer> from_file(const std::filesystem::path& path);
    [[nodiscard]] static std::unique_ptr<BpeTokenizer> from_json_text(std::string_view json_text);

    [[nodiscard]] std::vector<TokenId> encode(std::string_view text) const override;
    [[nodiscard]] std::string token_bytes(TokenId id) const override;
    [[nodiscard]] std::size_t vocab_size() const override { return id_to_token_.size(); }
    [[nodiscard]] std::optional<TokenId> find_token(std::string_view piece) const override;

private:
    BpeTokenizer() = default;

    void encode_ordinary(std::string_view text, std::vector<TokenId>& out) const;
    void encode_word(std::string_view word, std::vector<TokenId>& out) const;

    std::unordered_map<std::string, TokenId> vocab_;       // byte-level-mapped piece -> id
    std::vector<std::string> id_to_token_;                  // id -> mapped piece
    std::vector<bool> is_added_;
    std::unordered_map<std::string, int> merge_rank_;       // "a b" -> rank
    std::vector<std::pair<std::string, TokenId>> added_;    // literal added tokens, longest first
    SplitPattern pattern_ = SplitPattern::gpt2;
    bool split_digits_ = false;
    bool use_regex_ = true;
    bool add_prefix_space_ = false;
    bool ignore_merges_ = false;
};

}  // namespace uqac::runtime
