#pragma once

// Inner-loop kernels shared by the polynomial fit, Horner evaluation and the
// 1x1 channel-mixing layers. Each kernel has a scalar reference version and,
// on x86-64, an AVX2+FMA version; the active table is chosen once at first use.

#include <cstddef>
#include <span>
#include <string_view>

namespace sno::simd {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa) noexcept;

struct KernelTable {
    Isa isa;
    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // out[i] = sum_k coeffs[k] * z[i]^k, Horner's scheme, ncoeffs >= 1
    void (*horner)(const double* coeffs, std::size_t ncoeffs, const double* z, double* out,
                   std::size_t n);
    // out[r] = dot(rows + r * stride, x, n) for r < nrows
    void (*gemv)(const double* rows, std::size_t nrows, std::size_t stride, const double* x,
                 std::size_t n, double* out);
    // out[k] = sum_i q_k(z[i]) y[i], k < p, where q_0 = q0 and
    // q_{k+1} = ((z - alpha[k]) q_k - beta[k] q_{k-1}) * inv_beta[k+1], beta[0] = 0
    void (*project)(const double* z, const double* y, std::size_t n, const double* alpha,
                    const double* beta, const double* inv_beta, std::size_t p, double q0,
                    double* out);
};

const KernelTable& scalar_kernels() noexcept;

// nullptr when not compiled in or when the running CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels() noexcept;

// Best available table. SNO_SIMD=scalar in the environment forces the
// reference kernels.
const KernelTable& active() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace sno::simd
