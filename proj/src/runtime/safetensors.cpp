#include "uqac/runtime/safetensors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "uqac/errors.hpp"

namespace uqac::runtime {

namespace fs = std::filesystem;

std::size_t TensorInfo::numel() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

float half_to_float(std::uint16_t h) noexcept {
    const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000) << 16;
    std::uint32_t exp = (h >> 10) & 0x1F;
    std::uint32_t mant = h & 0x3FF;
    std::uint32_t bits;
    if (exp == 0) {
        if (mant == 0) {
            bits = sign;
        } else {
            // subnormal: normalize
            exp = 127 - 15 + 1;
            while ((mant & 0x400) == 0) {
                mant <<= 1;
                --exp;
            }
            mant &= 0x3FF;
            bits = sign | (exp << 23) | (mant << 13);
        }
    } else if (exp == 0x1F) {
        bits = sign | 0x7F800000u | (mant << 13);
    } else {
        bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
    }
    return std::bit_cast<float>(bits);
}

float bfloat16_to_float(std::uint16_t h) noexcept {
    return std::bit_cast<float>(static_cast<std::uint32_t>(h) << 16);
}

namespace {

std::uint64_t read_le_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace

void SafetensorsArchive::add_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw LoadError("cannot open safetensors file " + file.string());
    unsigned char len_bytes[8];
    if (!in.read(reinterpret_cast<char*>(len_bytes), 8)) throw LoadError("truncated safetensors file " + file.string());
    const std::uint64_t header_len = read_le_u64(len_bytes);
    if (header_len > (std::uint64_t{1} << 31)) throw LoadError("implausible safetensors header in " + file.string());
    std::string header(header_len, '\0');
    if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) {
        throw LoadError("truncated safetensors header in " + file.string());
    }
    const std::size_t base = 8 + header_len;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("malformed safetensors header in " + file.string() + ": " + e.what());
    }
    for (const auto& [name, entry] : doc.items()) {
        if (name == "__metadata__") continue;
        TensorInfo t;
        t.dtype = entry.at("dtype").get<std::string>();
        t.shape = entry.at("shape").get<std::vector<std::size_t>>();
        const auto offsets = entry.at("data_offsets").get<std::vector<std::size_t>>();
        t.data_begin = base + offsets.at(0);
        t.data_end = base + offsets.at(1);
        t.file = file;
        tensors_[name] = std::move(t);
    }
}

SafetensorsArchive SafetensorsArchive::open(const fs::path& dir_or_file) {
    SafetensorsArchive archive;
    if (fs::is_regular_file(dir_or_file)) {
        archive.add_file(dir_or_file);
        return archive;
    }
    const fs::path index = dir_or_file / "model.safetensors.index.json";
    if (fs::exists(index)) {
        std::ifstream in(index);
        const auto doc = nlohmann::json::parse(in);
        std::set<std::string> files;
        for (const auto& [name, file] : doc.at("weight_map").items()) files.insert(file.get<std::string>());
        for (const auto& f : files) archive.add_file(dir_or_file / f);
        return archive;
    }
    const fs::path single = dir_or_file / "model.safetensors";
    if (!fs::exists(single)) throw LoadError("no safetensors weights in " + dir_or_file.string());
    archive.add_file(single);
    return archive;
}

const TensorInfo& SafetensorsArchive::info(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw LoadError("missing tensor " + name);
    return it->second;
}

std::vector<float> SafetensorsArchive::read_f32(const std::string& name, const std::vector<std::size_t>& expected) const {
    const auto& t = info(name);
    if (!expected.empty() && t.shape != expected) throw FormatError("unexpected shape for tensor " + name);
    const std::size_t n = t.numel();
    std::size_t width = 0;
    if (t.dtype == "F32") {
        width = 4;
    } else if (t.dtype == "F16" || t.dtype == "BF16") {
        width = 2;
    } else {
        throw FormatError("unsupported dtype " + t.dtype + " for tensor " + name);
    }
    if (t.data_end - t.data_begin != n * width) throw FormatError("byte size mismatch for tensor " + name);

    std::ifstream in(t.file, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(t.data_begin));
    std::vector<unsigned char> raw(n * width);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
        throw LoadError("truncated data for tensor " + name);
    }
    std::vector<float> out(n);
    if (width == 4) {
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned char* p = raw.data() + 4 * i;
            const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                                       (static_cast<std::uint32_t>(p[2]) << 16) |
                                       (static_cast<std::uint32_t>(p[3]) << 24);
            out[i] = std::bit_cast<float>(bits);
        }
    } else {
        const bool bf16 = t.dtype == "BF16";
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint16_t h = static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
            out[i] = bf16 ? bfloat16_to_float(h) : half_to_float(h);
        }
    }
    return out;
}

}  // namespace uqac::runtime
