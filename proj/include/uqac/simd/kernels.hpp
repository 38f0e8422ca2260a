#pragma once

#include <cstddef>
#include <string_view>

namespace uqac::simd {

enum class Isa { scalar, avx2, neon };

// Function table for the data-parallel inner loops. Every ISA provides the
// same entries; an ISA may point an entry at the scalar routine when it has
// no faster variant.
struct KernelTable {
    Isa isa;

    // f32 model arithmetic
    float (*dot)(const float* a, const float* b, std::size_t n);
    void (*axpy)(float a, const float* x, float* y, std::size_t n);  // y += a*x
    void (*scale)(float a, float* x, std::size_t n);
    void (*add)(const float* x, float* y, std::size_t n);  // y += x
    // y[r] = sum_c w[r*cols + c] * x[c]
    void (*matvec)(const float* w, const float* x, float* y, std::size_t rows, std::size_t cols);
    void (*rmsnorm)(const float* x, const float* weight, float* y, std::size_t n, float eps);
    void (*silu_mul)(const float* gate, const float* up, float* out, std::size_t n);
    // In-place numerically stable softmax.
    void (*softmax)(float* x, std::size_t n);
    // -sum p log p with 0 log 0 = 0, natural log.
    float (*entropy)(const float* p, std::size_t n);

    // f64 attention-chain arithmetic
    double (*sum_f64)(const double* x, std::size_t n);
    void (*scale_f64)(double a, double* x, std::size_t n);
    void (*max_inplace_f64)(const double* x, double* acc, std::size_t n);  // acc = max(acc, x)
    void (*add_f64)(const double* x, double* y, std::size_t n);            // y += x
    double (*entropy_f64)(const double* p, std::size_t n);
    // f32 inputs, f64 accumulation (cosine similarity over hidden states)
    double (*dot_f32_acc64)(const float* a, const float* b, std::size_t n);
};

[[nodiscard]] bool isa_supported(Isa isa) noexcept;
[[nodiscard]] std::string_view isa_name(Isa isa) noexcept;

// Table for a specific ISA; throws std::invalid_argument if the host cannot run it.
[[nodiscard]] const KernelTable& kernels_for(Isa isa);

// Best supported table. UQAC_SIMD=scalar|avx2|neon forces a choice.
[[nodiscard]] const KernelTable& kernels();

namespace detail {
const KernelTable& scalar_table() noexcept;
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table() noexcept;
#endif
#if defined(__aarch64__)
const KernelTable& neon_table() noexcept;
#endif
}  // namespace detail

}  // namespace uqac::simd
