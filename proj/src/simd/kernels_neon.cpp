// AArch64 variants. Transcendental kernels (softmax, silu, entropy) use the
// scalar routines on this target.

#if defined(__aarch64__)

#include <arm_neon.h>

#include "scalar_impl.hpp"
#include "uqac/simd/kernels.hpp"

namespace uqac::simd {
namespace {

float dot(const float* a, const float* b, std::size_t n) {
    float32x4_t acc0 = vdupq_n_f32(0.0f);
    float32x4_t acc1 = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
        acc1 = vfmaq_f32(acc1, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
    }
    for (; i + 4 <= n; i += 4) acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
    return vaddvq_f32(vaddq_f32(acc0, acc1)) + scalar::dot(a + i, b + i, n - i);
}

void axpy(float a, const float* x, float* y, std::size_t n) {
    const float32x4_t va = vdupq_n_f32(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), va, vld1q_f32(x + i)));
    scalar::axpy(a, x + i, y + i, n - i);
}

void scale(float a, float* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(x + i, vmulq_n_f32(vld1q_f32(x + i), a));
    scalar::scale(a, x + i, n - i);
}

void add(const float* x, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vaddq_f32(vld1q_f32(x + i), vld1q_f32(y + i)));
    scalar::add(x + i, y + i, n - i);
}

void matvec(const float* w, const float* x, float* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot(w + r * cols, x, cols);
}

double sum_f64(const double* x, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
    return vaddvq_f64(acc) + scalar::sum_f64(x + i, n - i);
}

void scale_f64(double a, double* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_n_f64(vld1q_f64(x + i), a));
    scalar::scale_f64(a, x + i, n - i);
}

void max_inplace_f64(const double* x, double* acc, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(acc + i, vmaxq_f64(vld1q_f64(acc + i), vld1q_f64(x + i)));
    scalar::max_inplace_f64(x + i, acc + i, n - i);
}

void add_f64(const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vaddq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    scalar::add_f64(x + i, y + i, n - i);
}

double dot_f32_acc64(const float* a, const float* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t va = vcvt_f64_f32(vld1_f32(a + i));
        const float64x2_t vb = vcvt_f64_f32(vld1_f32(b + i));
        acc = vfmaq_f64(acc, va, vb);
    }
    return vaddvq_f64(acc) + scalar::dot_f32_acc64(a + i, b + i, n - i);
}

}  // namespace

namespace detail {

const KernelTable& neon_table() noexcept {
    static const KernelTable table{
        Isa::neon,
        dot,
        axpy,
        scale,
        add,
        matvec,
        scalar::rmsnorm,
        scalar::silu_mul,
        scalar::softmax,
        scalar::entropy,
        sum_f64,
        scale_f64,
        max_inplace_f64,
        add_f64,
        scalar::entropy_f64,
        dot_f32_acc64,
    };
    return table;
}

}  // namespace detail
}  // namespace uqac::simd

#endif
