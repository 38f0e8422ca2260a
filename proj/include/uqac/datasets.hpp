#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "uqac/runtime/tokenizer.hpp"
#include "uqac/trace.hpp"

namespace uqac::datasets {

enum class DatasetTag { gsm8k, math, bbh };

[[nodiscard]] std::string_view tag_name(DatasetTag tag) noexcept;
// Accepts "gsm8k", "math", "bbh" (case-insensitive); throws ConfigError otherwise.
[[nodiscard]] DatasetTag parse_tag(std::string_view name);
// Published test-split sizes: 1319, 5000, 6511.
[[nodiscard]] std::size_t published_size(DatasetTag tag) noexcept;

struct Exemplar {
    std::string question;
    std::string answer;
};

struct TaskInstance {
    std::string instance_id;
    DatasetTag dataset = DatasetTag::gsm8k;
    std::string subtask;  // MATH subject or BBH task name
    std::string question;
    std::string gold;  // canonical form
    std::vector<Exemplar> few_shot;
    std::string template_id;
};

struct LoadOptions {
    // Throw LoadError instead of warning when the instance count differs from
    // the published test size.
    bool strict_counts = false;
};

// GSM8k: test JSONL with "question" and "answer" ("... #### 42").
// MATH: a JSONL file or a directory tree of per-problem JSON files with
//       "problem" and "solution"; the gold answer is the solution's last \boxed{}.
// BBH: a directory holding <task>.json files ({"examples": [{"input", "target"}]})
//      and cot-prompts/<task>.txt with three exemplars each.
[[nodiscard]] std::vector<TaskInstance> load(DatasetTag tag, const std::filesystem::path& path,
                                             const LoadOptions& options = {});
// Default location of a dataset under a data root.
[[nodiscard]] std::filesystem::path default_path(DatasetTag tag, const std::filesystem::path& data_root);

struct ModelProfile {
    std::string name = "default";
    std::vector<std::string> match;  // substrings of the model name selecting this profile
    bool boxed_instruction = false;  // GSM8k/MATH prompts ask for a \boxed{} answer
    bool deep_thinking = false;      // +512 new tokens
    std::string prompt_prefix;       // chat framing around the user message
    std::string prompt_suffix;
};

struct PromptAssets {
    std::string boxed_instruction;
    std::string bbh_instruction;
    std::vector<ModelProfile> profiles;

    // Profile whose match list hits `model_name` (first wins), else "default".
    [[nodiscard]] const ModelProfile& profile_for(std::string_view model_name) const;
    [[nodiscard]] const ModelProfile& profile_named(std::string_view name) const;

    [[nodiscard]] static PromptAssets from_json(const nlohmann::json& doc);
    [[nodiscard]] static PromptAssets from_file(const std::filesystem::path& path);
    // Built-in copy of config/profiles.json.
    [[nodiscard]] static const PromptAssets& builtin();
};

// User-message text. GSM8k/MATH: the question, plus the boxed instruction for
// profiles that need it. BBH: three exemplars, the question, then the BBH
// boxed instruction.
[[nodiscard]] std::string build_prompt(const TaskInstance& instance, const ModelProfile& profile,
                                       const PromptAssets& assets);
// Model input text: profile prefix + user text + profile suffix.
[[nodiscard]] std::string apply_chat_template(const ModelProfile& profile, std::string_view user_text);

[[nodiscard]] std::size_t max_new_tokens_for(DatasetTag tag, const ModelProfile& profile) noexcept;

enum class ExtractionMethod { none, boxed, last_number, choice_letter, answer_phrase };
[[nodiscard]] std::string_view method_name(ExtractionMethod m) noexcept;

struct ExtractionResult {
    std::string raw;
    std::string canonical;
    ExtractionMethod method = ExtractionMethod::none;
    bool success = false;
    // Byte range of `raw` inside the response text.
    std::size_t begin = 0;
    std::size_t end = 0;
};

[[nodiscard]] ExtractionResult extract_answer(std::string_view response, DatasetTag tag);

// Content of the last \boxed{...} (or \fbox{...}) with balanced braces.
struct BoxedSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};
[[nodiscard]] std::optional<BoxedSpan> find_last_boxed(std::string_view text);

// Rule-based canonical forms used by the judge.
[[nodiscard]] std::string canonical_math(std::string_view expr);
[[nodiscard]] std::string canonical_number(std::string_view text);  // GSM8k; empty if no number
[[nodiscard]] std::string canonical_label(std::string_view text);   // BBH
[[nodiscard]] std::string canonicalize(std::string_view raw, DatasetTag tag);

// Compares an extracted canonical answer with a canonical gold answer.
[[nodiscard]] bool judge(std::string_view extracted, std::string_view gold, DatasetTag tag);

// Token positions (absolute, end exclusive) whose bytes overlap [begin, end) of
// the decoded response. Returns nullopt if the range maps to no token.
[[nodiscard]] std::optional<AnswerSpan> answer_span_from_bytes(const runtime::Tokenizer& tokenizer,
                                                               std::span<const TokenId> tokens, std::size_t n_instr,
                                                               std::size_t begin, std::size_t end);

}  // namespace uqac::datasets
