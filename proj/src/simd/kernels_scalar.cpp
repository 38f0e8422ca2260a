#include "scalar_impl.hpp"
#include "uqac/simd/kernels.hpp"

namespace uqac::simd::detail {

const KernelTable& scalar_table() noexcept {
    static const KernelTable table{
        Isa::scalar,
        scalar::dot,
        scalar::axpy,
        scalar::scale,
        scalar::add,
        scalar::matvec,
        scalar::rmsnorm,
        scalar::silu_mul,
        scalar::softmax,
        scalar::entropy,
        scalar::sum_f64,
        scalar::scale_f64,
        scalar::max_inplace_f64,
        scalar::add_f64,
        scalar::entropy_f64,
        scalar::dot_f32_acc64,
    };
    return table;
}

}  // namespace uqac::simd::detail
