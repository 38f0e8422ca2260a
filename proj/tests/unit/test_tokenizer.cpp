#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "uqac/errors.hpp"
#include "uqac/runtime/tokenizer.hpp"

using namespace uqac;
using namespace uqac::runtime;

namespace {

const std::string kHf = std::string(UQAC_SOURCE_DIR) + "/tests/data/hf/";

nlohmann::json expected(const std::string& name) {
    std::ifstream in(kHf + name + "/expected.json");
    REQUIRE(in);
    return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("byte-level BPE matches the reference tokenizer") {
    for (const char* name : {"gpt2-tok", "llama", "qwen2"}) {
        CAPTURE(name);
        const auto tok = BpeTokenizer::from_file(kHf + name + "/tokenizer.json");
        for (const auto& c : expected(name)["encode"]) {
            const auto text = c["text"].get<std::string>();
            CAPTURE(text);
            const auto ids = tok->encode(text);
            CHECK(ids == c["ids"].get<std::vector<TokenId>>());
            CHECK(tok->decode(ids) == text);  // byte-level BPE is lossless
        }
    }
}

TEST_CASE("added tokens are matched literally and decode to their content") {
    const auto tok = BpeTokenizer::from_file(kHf + "llama/tokenizer.json");
    const auto eos = tok->find_token("<|endoftext|>");
    REQUIRE(eos);
    const auto ids = tok->encode("a<|endoftext|>b");
    REQUIRE(ids.size() == 3);
    CHECK(ids[1] == *eos);
    CHECK(tok->token_bytes(*eos) == "<|endoftext|>");
}

TEST_CASE("pre-tokenization patterns") {
    auto words = [](std::string_view text, SplitPattern p) {
        std::vector<std::string> out;
        for (auto w : pre_tokenize(text, p)) out.emplace_back(w);
        return out;
    };
    CHECK(words("Hello world", SplitPattern::gpt2) == std::vector<std::string>{"Hello", " world"});
    CHECK(words("12345", SplitPattern::llama3) == std::vector<std::string>{"123", "45"});
    CHECK(words("12345", SplitPattern::qwen2) == std::vector<std::string>{"1", "2", "3", "4", "5"});
    CHECK(words("it's", SplitPattern::gpt2) == std::vector<std::string>{"it", "'s"});
    CHECK(words("IT'S", SplitPattern::llama3) == std::vector<std::string>{"IT", "'S"});
    CHECK(words("a  b", SplitPattern::gpt2) == std::vector<std::string>{"a", " ", " b"});
}

TEST_CASE("malformed tokenizer files are rejected") {
    CHECK_THROWS_AS((void)BpeTokenizer::from_file(kHf + "missing.json"), LoadError);
    CHECK_THROWS_AS((void)BpeTokenizer::from_json_text(
                        R"({"model": {"type": "Unigram", "vocab": {}, "merges": []}, "pre_tokenizer": null})"),
                    FormatError);
    CHECK_THROWS_AS((void)BpeTokenizer::from_json_text(
                        R"({"model": {"type": "BPE", "vocab": {"a": 0}, "merges": []},
                            "pre_tokenizer": {"type": "Whitespace"}})"),
                    FormatError);
}

TEST_CASE("piece tokenizer: greedy longest match") {
    const PieceTokenizer tok({"a", "ab", "abc", " ", "b"});
    CHECK(tok.encode("abcab b") == std::vector<TokenId>{2, 1, 3, 4});
    CHECK(tok.decode(std::vector<TokenId>{2, 3, 0}) == "abc a");
    CHECK(tok.find_token("ab") == TokenId{1});
    CHECK_FALSE(tok.find_token("zz"));
    CHECK_THROWS_AS((void)tok.encode("z"), FormatError);
    CHECK_THROWS_AS((void)tok.token_bytes(9), PositionError);
}
