#pragma once

#include <filesystem>

#include <nlohmann/json_fwd.hpp>

#include "uqac/trace.hpp"

namespace uqac {

inline constexpr int kTraceFormat = 1;

// A trace directory holds manifest.json (token ids, spans, scalars, candidate
// lists, tensor shapes; "trace_format": 1) and tensors.bin (little-endian f32:
// the ragged attention block followed by the hidden states).
void write_trace(const std::filesystem::path& dir, const Trace& trace);

// With `load_tensors` false the attention and hidden buffers stay empty.
[[nodiscard]] Trace read_trace(const std::filesystem::path& dir, bool load_tensors = true);

[[nodiscard]] nlohmann::json trace_manifest(const Trace& trace);

}  // namespace uqac
