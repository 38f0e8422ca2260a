#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "uqac/datasets.hpp"
#include "uqac/errors.hpp"
#include "uqac/runtime/tokenizer.hpp"

using namespace uqac;
using namespace uqac::datasets;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("uqac-test-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
}

// Canonical MATH forms, worked out by hand from the normalization rules.
const std::vector<std::pair<std::string, std::string>> kMathFixtures = {
    {"\\frac{1}{2}", "1/2"},
    {"\\dfrac{3}{4}", "3/4"},
    {"\\frac12", "1/2"},
    {"0.5", "1/2"},
    {"2/4", "1/2"},
    {"-\\frac{1}{3}", "-1/3"},
    {"3.0", "3"},
    {"1,000", "1000"},
    {"10.", "10"},
    {"\\sqrt{2}", "sqrt(2)"},
    {"2\\sqrt{3}", "2sqrt(3)"},
    {"\\frac{\\sqrt{3}}{2}", "(sqrt(3))/2"},
    {"x = 5", "5"},
    {"5\\text{ cm}", "5"},
    {"\\text{(A)}", "(A)"},
    {"90^\\circ", "90"},
    {"50\\%", "50"},
    {"\\$18.00", "18"},
    {"\\left( 1, 2 \\right)", "(1,2)"},
    {"\\pi", "pi"},
    {"\\infty", "inf"},
    {"\\boxed{7}", "7"},
};

}  // namespace

TEST_CASE("dataset tags") {
    CHECK(parse_tag("GSM8k") == DatasetTag::gsm8k);
    CHECK(parse_tag("math") == DatasetTag::math);
    CHECK(tag_name(DatasetTag::bbh) == "bbh");
    CHECK(published_size(DatasetTag::gsm8k) == 1319);
    CHECK(published_size(DatasetTag::math) == 5000);
    CHECK(published_size(DatasetTag::bbh) == 6511);
    CHECK_THROWS_AS((void)parse_tag("mmlu"), ConfigError);
}

TEST_CASE("MATH canonicalizer fixture list") {
    for (const auto& [in, want] : kMathFixtures) {
        CAPTURE(in);
        CHECK(canonical_math(in) == want);
        CHECK(canonical_math(canonical_math(in)) == want);  // idempotent
    }
}

TEST_CASE("number and label canonical forms") {
    CHECK(canonical_number("1,000") == "1000");
    CHECK(canonical_number("$18.00") == "18");
    CHECK(canonical_number("18 dollars") == "18");
    CHECK(canonical_number("-3") == "-3");
    CHECK(canonical_number("2.50") == "5/2");
    CHECK(canonical_number("no digits").empty());
    CHECK(canonical_label("(A)") == "a");
    CHECK(canonical_label("A") == "a");
    CHECK(canonical_label("B)") == "b");
    CHECK(canonical_label("  Valid. ") == "valid");
    CHECK(canonical_label("\\text{True}") == "true");
    CHECK(canonical_label("not  plausible") == "not plausible");
}

TEST_CASE("judge") {
    CHECK(judge("1,000", "1000", DatasetTag::gsm8k));
    CHECK(judge("18.0", "18", DatasetTag::gsm8k));
    CHECK(judge("18.0000001", "18", DatasetTag::gsm8k));
    CHECK_FALSE(judge("18.5", "18", DatasetTag::gsm8k));
    CHECK_FALSE(judge("17", "18", DatasetTag::gsm8k));
    CHECK_FALSE(judge("", "18", DatasetTag::gsm8k));
    CHECK(judge("0.5", "1/2", DatasetTag::math));
    CHECK(judge("\\frac{1}{2}", "\\dfrac12", DatasetTag::math));
    CHECK_FALSE(judge("\\frac{1}{3}", "1/2", DatasetTag::math));
    CHECK(judge("(A)", "A", DatasetTag::bbh));
    CHECK(judge("Yes", "yes", DatasetTag::bbh));
    CHECK_FALSE(judge("(B)", "A", DatasetTag::bbh));
}

TEST_CASE("answer extraction") {
    auto check_span = [](std::string_view text, const ExtractionResult& r) {
        CHECK(text.substr(r.begin, r.end - r.begin) == r.raw);
    };
    {
        const std::string t = "so 6 * 7 = 42 and \\boxed{42}.";
        const auto r = extract_answer(t, DatasetTag::gsm8k);
        CHECK(r.success);
        CHECK(r.method == ExtractionMethod::boxed);
        CHECK(r.canonical == "42");
        check_span(t, r);
    }
    {
        const std::string t = "first \\boxed{1} then \\boxed{\\frac{1}{2}}";
        const auto r = extract_answer(t, DatasetTag::math);
        CHECK(r.raw == "\\frac{1}{2}");
        CHECK(r.canonical == "1/2");
        check_span(t, r);
    }
    CHECK_FALSE(extract_answer("the answer is 3/4", DatasetTag::math).success);
    CHECK_FALSE(extract_answer("\\boxed{unclosed", DatasetTag::math).success);
    {
        const std::string t = "I have 3 apples and 1,045 pears in 2nd place";
        const auto r = extract_answer(t, DatasetTag::gsm8k);
        CHECK(r.method == ExtractionMethod::last_number);
        CHECK(r.canonical == "1045");
        check_span(t, r);
    }
    CHECK_FALSE(extract_answer("no numbers here", DatasetTag::gsm8k).success);
    {
        const std::string t = "Options (A) and (B). So the answer is (B).";
        const auto r = extract_answer(t, DatasetTag::bbh);
        CHECK(r.method == ExtractionMethod::choice_letter);
        CHECK(r.canonical == "b");
    }
    {
        const auto r = extract_answer("Let's think. So the answer is Yes.", DatasetTag::bbh);
        CHECK(r.method == ExtractionMethod::answer_phrase);
        CHECK(r.canonical == "yes");
    }
    CHECK(extract_answer("\\boxed 5 is it", DatasetTag::gsm8k).canonical == "5");
    const auto box = find_last_boxed("a \\fbox{x} b \\boxed{y{z}}");
    REQUIRE(box);
    CHECK(box->end - box->begin == 4);
}

TEST_CASE("extraction is stable on re-extraction") {
    for (const auto& [in, want] : kMathFixtures) {
        const std::string response = "reasoning... \\boxed{" + in + "}";
        const auto a = extract_answer(response, DatasetTag::math);
        const auto b = extract_answer(response, DatasetTag::math);
        CHECK(a.canonical == b.canonical);
        CHECK(judge(a.canonical, want, DatasetTag::math));
    }
}

TEST_CASE("answer span from byte offsets") {
    const runtime::PieceTokenizer tok({"Q", "The", " answer", " is", " \\boxed{", "4", "2", "}", ".", "{4", " \\boxed"});
    const std::vector<TokenId> toks = {0, 1, 2, 3, 4, 5, 6, 7, 8};  // instruction is "Q"
    const std::string text = "The answer is \\boxed{42}.";
    const auto r = extract_answer(text, DatasetTag::gsm8k);
    const auto span = answer_span_from_bytes(tok, toks, 1, r.begin, r.end);
    REQUIRE(span);
    CHECK(span->start == 5);
    CHECK(span->end == 7);

    // a token straddling the start of the range belongs to the span:
    // "The" " answer" " is" " \\boxed" "{4" "2" "}" puts "42" at bytes [21, 23)
    const std::vector<TokenId> straddle = {0, 1, 2, 3, 10, 9, 6, 7};
    const auto s2 = answer_span_from_bytes(tok, straddle, 1, 21, 23);
    REQUIRE(s2);
    CHECK(s2->start == 5);
    CHECK(s2->end == 7);
    CHECK_FALSE(answer_span_from_bytes(tok, toks, 1, 5, 5));
    CHECK_FALSE(answer_span_from_bytes(tok, toks, 1, 500, 510));
}

TEST_CASE("GSM8k loader") {
    const auto dir = scratch("gsm8k");
    write(dir / "test.jsonl",
          R"({"question": "Q1?", "answer": "work\n#### 1,234"})" "\n\n"
          R"({"question": "Q2?", "answer": "#### 5"})" "\n");
    const auto items = load(DatasetTag::gsm8k, dir / "test.jsonl");
    REQUIRE(items.size() == 2);
    CHECK(items[0].instance_id == "gsm8k-00000");
    CHECK(items[0].gold == "1234");
    CHECK(items[1].question == "Q2?");
    CHECK(items[1].few_shot.empty());
    CHECK_THROWS_AS((void)load(DatasetTag::gsm8k, dir / "test.jsonl", {true}), LoadError);

    write(dir / "bad.jsonl", R"({"question": "Q", "answer": "no marker"})");
    CHECK_THROWS_AS((void)load(DatasetTag::gsm8k, dir / "bad.jsonl"), LoadError);
    write(dir / "corrupt.jsonl", "{oops\n");
    CHECK_THROWS_AS((void)load(DatasetTag::gsm8k, dir / "corrupt.jsonl"), LoadError);
    CHECK_THROWS_AS((void)load(DatasetTag::gsm8k, dir / "missing.jsonl"), LoadError);
    CHECK(default_path(DatasetTag::gsm8k, "/data") == fs::path("/data/gsm8k/test.jsonl"));
    fs::remove_all(dir);
}

TEST_CASE("MATH loader: directory tree and JSONL") {
    const auto dir = scratch("math");
    write(dir / "test/algebra/2.json", R"({"problem": "P2", "solution": "so \\boxed{\\frac{1}{2}}", "type": "Algebra"})");
    write(dir / "test/algebra/10.json", R"({"problem": "P10", "solution": "\\boxed{3}", "type": "Algebra"})");
    write(dir / "test/geometry/1.json", R"({"problem": "P1", "solution": "\\boxed{\\pi}", "type": "Geometry"})");
    const auto items = load(DatasetTag::math, dir / "test");
    REQUIRE(items.size() == 3);
    // sorted by path
    CHECK(items[0].question == "P10");
    CHECK(items[1].gold == "1/2");
    CHECK(items[2].gold == "pi");
    CHECK(items[2].subtask == "Geometry");

    write(dir / "test.jsonl", R"({"problem": "P", "solution": "ignored", "answer": "0.25"})" "\n");
    CHECK(load(DatasetTag::math, dir / "test.jsonl").at(0).gold == "1/4");
    CHECK(default_path(DatasetTag::math, dir) == dir / "math" / "test");

    write(dir / "bad/x.json", R"({"problem": "P", "solution": "no box"})");
    CHECK_THROWS_AS((void)load(DatasetTag::math, dir / "bad"), LoadError);
    fs::remove_all(dir);
}

TEST_CASE("BBH loader and three-shot prompt") {
    const auto dir = scratch("bbh");
    write(dir / "bbh/navigate.json",
          R"J({"examples": [{"input": "Turn left. Options: (A) Yes (B) No", "target": "(B)"},
                             {"input": "Go on.", "target": "Yes"}]})J");
    write(dir / "cot-prompts/navigate.txt",
          "Navigation task.\n\n-----\n\nQ: e1\nA: Let's think. So the answer is (A).\n\n"
          "Q: e2\nA: a2\n\nQ: e3\nA: a3\n");
    const auto items = load(DatasetTag::bbh, dir);
    REQUIRE(items.size() == 2);
    CHECK(items[0].subtask == "navigate");
    CHECK(items[0].gold == "b");
    CHECK(items[1].gold == "yes");
    REQUIRE(items[0].few_shot.size() == 3);
    CHECK(items[0].few_shot[0].question == "e1");
    CHECK(items[0].few_shot[2].answer == "a3");

    const auto& assets = PromptAssets::builtin();
    const auto prompt = build_prompt(items[0], assets.profile_named("default"), assets);
    std::size_t qs = 0;
    for (std::size_t p = prompt.find("Q: "); p != std::string::npos; p = prompt.find("Q: ", p + 1)) ++qs;
    CHECK(qs == 4);  // three exemplars, then the question
    CHECK(prompt.find("Q: e3") < prompt.find("Q: Turn left."));
    CHECK(prompt.size() >= assets.bbh_instruction.size());
    CHECK(prompt.substr(prompt.size() - assets.bbh_instruction.size()) == assets.bbh_instruction);

    write(dir / "cot-prompts/navigate.txt", "-----\nQ: e1\nA: a1\n\nQ: e2\nA: a2\n");
    CHECK_THROWS_AS((void)load(DatasetTag::bbh, dir), LoadError);
    fs::remove(dir / "cot-prompts/navigate.txt");
    CHECK_THROWS_AS((void)load(DatasetTag::bbh, dir), LoadError);
    fs::remove_all(dir);
}

TEST_CASE("prompts, profiles and token budgets") {
    const auto& assets = PromptAssets::builtin();
    TaskInstance inst;
    inst.dataset = DatasetTag::gsm8k;
    inst.question = "Natalia sold 48 clips. How many?";
    const auto& plain = assets.profile_named("default");
    CHECK(build_prompt(inst, plain, assets) == inst.question);

    const auto& boxed = assets.profile_for("proxy-tiny-llama");
    CHECK(boxed.boxed_instruction);
    const auto p = build_prompt(inst, boxed, assets);
    CHECK(p.find(inst.question) == 0);
    CHECK(p.substr(p.size() - assets.boxed_instruction.size()) == assets.boxed_instruction);

    CHECK(assets.profile_for("Qwen2.5-0.5B-Instruct").name == "qwen2");
    CHECK(assets.profile_for("Meta-Llama-3.1-8B-Instruct").name == "llama-3");
    CHECK(assets.profile_for("something-else").name == "default");
    CHECK_THROWS_AS((void)assets.profile_named("nope"), ConfigError);

    const auto& q = assets.profile_named("qwen2");
    const auto chat = apply_chat_template(q, "hi");
    CHECK(chat == q.prompt_prefix + "hi" + q.prompt_suffix);

    CHECK(max_new_tokens_for(DatasetTag::gsm8k, plain) == 1024);
    CHECK(max_new_tokens_for(DatasetTag::bbh, plain) == 1536);
    CHECK(max_new_tokens_for(DatasetTag::math, assets.profile_named("deepseek-r1-distill")) == 1536);

    const auto custom = PromptAssets::from_json(nlohmann::json::parse(
        R"({"boxed_instruction": "Box it.", "bbh_instruction": "B", "profiles": {"mine": {"match": ["m"]}}})"));
    CHECK(custom.profile_for("xyz").name == "default");  // default is always present
    CHECK_THROWS_AS((void)PromptAssets::from_json(nlohmann::json::parse("{}")), ConfigError);
}
