#include "sno/simd/kernels.hpp"

namespace sno::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void horner_scalar(const double* coeffs, std::size_t ncoeffs, const double* z, double* out,
                   std::size_t n) {
    const std::size_t top = ncoeffs - 1;
    for (std::size_t i = 0; i < n; ++i) {
        double acc = coeffs[top];
        for (std::size_t k = top; k-- > 0;) acc = acc * z[i] + coeffs[k];
        out[i] = acc;
    }
}

void gemv_scalar(const double* rows, std::size_t nrows, std::size_t stride, const double* x,
                 std::size_t n, double* out) {
    for (std::size_t r = 0; r < nrows; ++r) out[r] = dot_scalar(rows + r * stride, x, n);
}

void project_scalar(const double* z, const double* y, std::size_t n, const double* alpha,
                    const double* beta, const double* inv_beta, std::size_t p, double q0,
                    double* out) {
    for (std::size_t k = 0; k < p; ++k) out[k] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double prev = 0.0, q = q0;
        for (std::size_t k = 0; k < p; ++k) {
            out[k] += q * y[i];
            if (k + 1 == p) break;
            const double next = ((z[i] - alpha[k]) * q - beta[k] * prev) * inv_beta[k + 1];
            prev = q;
            q = next;
        }
    }
}

constexpr KernelTable kScalar{Isa::Scalar, dot_scalar,  axpy_scalar,
                              horner_scalar, gemv_scalar, project_scalar};

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

}  // namespace sno::simd
