#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace uqac::runtime {

struct TensorInfo {
    std::string dtype;  // F32 | F16 | BF16
    std::vector<std::size_t> shape;
    std::size_t data_begin = 0;  // absolute file offsets
    std::size_t data_end = 0;
    std::filesystem::path file;

    [[nodiscard]] std::size_t numel() const;
};

// Read-only view over one or more .safetensors files (sharded checkpoints are
// resolved through model.safetensors.index.json).
class SafetensorsArchive {
public:
    [[nodiscard]] static SafetensorsArchive open(const std::filesystem::path& dir_or_file);

    [[nodiscard]] bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
    [[nodiscard]] const TensorInfo& info(const std::string& name) const;
    // Converts to f32; throws FormatError when the shape differs from `expected` (if non-empty).
    [[nodiscard]] std::vector<float> read_f32(const std::string& name,
                                              const std::vector<std::size_t>& expected = {}) const;
    [[nodiscard]] const std::map<std::string, TensorInfo>& tensors() const noexcept { return tensors_; }

private:
    void add_file(const std::filesystem::path& file);
    std::map<std::string, TensorInfo> tensors_;
};

[[nodiscard]] float half_to_float(std::uint16_t h) noexcept;
[[nodiscard]] float bfloat16_to_float(std::uint16_t h) noexcept;

}  // namespace uqac::runtime
