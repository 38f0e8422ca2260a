#pragma once

// A three-question GSM8k-format task and an order-3 table model that answers
// it. Question "d?" is answered " so" a " \boxed{" a "}" with a = d + 1 (mod 10)
// under greedy decoding; every step keeps a few alternatives above the
// candidate floor so the reduced space is non-trivial.

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace uqac::testing {

namespace toy {

inline constexpr int kEos = 0, kQ = 11, kSo = 12, kBoxed = 13, kClose = 14, kIs = 15, kVocab = 16;
inline int digit(int d) { return 1 + d; }

inline std::vector<double> row(const std::map<int, double>& spec) {
    double used = 0.0;
    for (const auto& [t, p] : spec) used += p;
    std::vector<double> r(kVocab, (1.0 - used) / static_cast<double>(kVocab - static_cast<int>(spec.size())));
    for (const auto& [t, p] : spec) r[static_cast<std::size_t>(t)] = p;
    return r;
}

}  // namespace toy

inline nlohmann::json toy_table_model_json() {
    using namespace toy;
    nlohmann::json rows = nlohmann::json::array();
    auto add = [&](std::vector<int> ctx, const std::map<int, double>& spec) {
        rows.push_back({{"context", ctx}, {"probs", row(spec)}});
    };
    for (int d = 0; d < 10; ++d) {
        add({digit(d), kQ}, {{kSo, 0.8}, {kIs, 0.1}});
        add({digit(d), kQ, kSo}, {{digit((d + 1) % 10), 0.6}, {digit((d + 2) % 10), 0.3}});
        add({kQ, kSo, digit(d)}, {{kBoxed, 0.9}});
        add({kSo, digit(d), kBoxed}, {{digit(d), 0.7}, {digit((d + 5) % 10), 0.2}});
        for (int y = 0; y < 10; ++y) add({digit(d), kBoxed, digit(y)}, {{kClose, 0.95}});
        add({kBoxed, digit(d), kClose}, {{kEos, 1.0}});
    }
    std::vector<std::string> pieces = {"<eos>"};
    for (int d = 0; d < 10; ++d) pieces.push_back(std::to_string(d));
    pieces.insert(pieces.end(), {"?", " so", " \\boxed{", "}", " is"});
    return {{"name", "toy-arith"},
            {"pieces", pieces},
            {"order", 3},
            {"rows", rows},
            {"fallback", row({{kEos, 0.9}})},
            {"eos", {kEos}},
            {"n_layers", 2},
            {"n_heads", 2},
            {"max_context", 256}};
}

struct ToyTask {
    std::filesystem::path model;
    std::filesystem::path dataset;
};

// Writes the model and a three-item test file (two answerable correctly, one
// with a gold the model misses) under `dir`.
inline ToyTask write_toy_task(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    ToyTask t{dir / "toy-arith.json", dir / "gsm8k-test.jsonl"};
    std::ofstream(t.model) << toy_table_model_json().dump();
    std::ofstream ds(t.dataset);
    ds << R"({"question": "3?", "answer": "3 + 1 = 4\n#### 4"})" << "\n";
    ds << R"({"question": "5?", "answer": "#### 6"})" << "\n";
    ds << R"({"question": "7?", "answer": "#### 1"})" << "\n";
    return t;
}

}  // namespace uqac::testing
