// Compiled with -mavx2 -mfma. Nothing in this file may run before the
// dispatcher has confirmed CPU support.

#include "sno/simd/kernels.hpp"

#include <immintrin.h>

namespace sno::simd::detail {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    __m256d s2 = _mm256_setzero_pd();
    __m256d s3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
        s2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), s2);
        s3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), s3);
    }
    for (; i + 4 <= n; i += 4)
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    double s = hsum(_mm256_add_pd(_mm256_add_pd(s0, s1), _mm256_add_pd(s2, s3)));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(y + i + 4,
                         _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
    }
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void horner_avx2(const double* coeffs, std::size_t ncoeffs, const double* z, double* out,
                 std::size_t n) {
    const std::size_t top = ncoeffs - 1;
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d z0 = _mm256_loadu_pd(z + i);
        const __m256d z1 = _mm256_loadu_pd(z + i + 4);
        __m256d a0 = _mm256_set1_pd(coeffs[top]);
        __m256d a1 = a0;
        for (std::size_t k = top; k-- > 0;) {
            const __m256d c = _mm256_set1_pd(coeffs[k]);
            a0 = _mm256_fmadd_pd(a0, z0, c);
            a1 = _mm256_fmadd_pd(a1, z1, c);
        }
        _mm256_storeu_pd(out + i, a0);
        _mm256_storeu_pd(out + i + 4, a1);
    }
    for (; i + 4 <= n; i += 4) {
        const __m256d z0 = _mm256_loadu_pd(z + i);
        __m256d a0 = _mm256_set1_pd(coeffs[top]);
        for (std::size_t k = top; k-- > 0;) a0 = _mm256_fmadd_pd(a0, z0, _mm256_set1_pd(coeffs[k]));
        _mm256_storeu_pd(out + i, a0);
    }
    for (; i < n; ++i) {
        double acc = coeffs[top];
        for (std::size_t k = top; k-- > 0;) acc = acc * z[i] + coeffs[k];
        out[i] = acc;
    }
}

// Four rows per sweep so each x vector is loaded once per four outputs.
void gemv_avx2(const double* rows, std::size_t nrows, std::size_t stride, const double* x,
               std::size_t n, double* out) {
    std::size_t r = 0;
    for (; r + 4 <= nrows; r += 4) {
        const double* p0 = rows + r * stride;
        const double* p1 = p0 + stride;
        const double* p2 = p1 + stride;
        const double* p3 = p2 + stride;
        __m256d s0 = _mm256_setzero_pd();
        __m256d s1 = _mm256_setzero_pd();
        __m256d s2 = _mm256_setzero_pd();
        __m256d s3 = _mm256_setzero_pd();
        std::size_t i = 0;
        for (; i + 4 <= n; i += 4) {
            const __m256d xv = _mm256_loadu_pd(x + i);
            s0 = _mm256_fmadd_pd(_mm256_loadu_pd(p0 + i), xv, s0);
            s1 = _mm256_fmadd_pd(_mm256_loadu_pd(p1 + i), xv, s1);
            s2 = _mm256_fmadd_pd(_mm256_loadu_pd(p2 + i), xv, s2);
            s3 = _mm256_fmadd_pd(_mm256_loadu_pd(p3 + i), xv, s3);
        }
        double t0 = hsum(s0), t1 = hsum(s1), t2 = hsum(s2), t3 = hsum(s3);
        for (; i < n; ++i) {
            t0 += p0[i] * x[i];
            t1 += p1[i] * x[i];
            t2 += p2[i] * x[i];
            t3 += p3[i] * x[i];
        }
        out[r] = t0;
        out[r + 1] = t1;
        out[r + 2] = t2;
        out[r + 3] = t3;
    }
    for (; r < nrows; ++r) out[r] = dot_avx2(rows + r * stride, x, n);
}

// Four independent groups of four points keep the recurrence chains overlapped.
void project_avx2(const double* z, const double* y, std::size_t n, const double* alpha,
                  const double* beta, const double* inv_beta, std::size_t p, double q0,
                  double* out) {
    constexpr std::size_t G = 4;
    __m256d acc[G][21];
    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t k = 0; k < p; ++k) acc[g][k] = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 * G <= n; i += 4 * G) {
        __m256d zv[G], yv[G], q[G], prev[G];
        for (std::size_t g = 0; g < G; ++g) {
            zv[g] = _mm256_loadu_pd(z + i + 4 * g);
            yv[g] = _mm256_loadu_pd(y + i + 4 * g);
            q[g] = _mm256_set1_pd(q0);
            prev[g] = _mm256_setzero_pd();
        }
        for (std::size_t k = 0; k < p; ++k) {
            for (std::size_t g = 0; g < G; ++g) acc[g][k] = _mm256_fmadd_pd(q[g], yv[g], acc[g][k]);
            if (k + 1 == p) break;
            const __m256d a = _mm256_set1_pd(alpha[k]);
            const __m256d b = _mm256_set1_pd(beta[k]);
            const __m256d ib = _mm256_set1_pd(inv_beta[k + 1]);
            for (std::size_t g = 0; g < G; ++g) {
                const __m256d t = _mm256_mul_pd(
                    _mm256_fmsub_pd(_mm256_sub_pd(zv[g], a), q[g], _mm256_mul_pd(b, prev[g])), ib);
                prev[g] = q[g];
                q[g] = t;
            }
        }
    }
    for (std::size_t k = 0; k < p; ++k) {
        __m256d s = acc[0][k];
        for (std::size_t g = 1; g < G; ++g) s = _mm256_add_pd(s, acc[g][k]);
        out[k] = hsum(s);
    }
    for (; i < n; ++i) {
        double pv = 0.0, q = q0;
        for (std::size_t k = 0; k < p; ++k) {
            out[k] += q * y[i];
            if (k + 1 == p) break;
            const double next = ((z[i] - alpha[k]) * q - beta[k] * pv) * inv_beta[k + 1];
            pv = q;
            q = next;
        }
    }
}

}  // namespace

extern const KernelTable kAvx2Table;
const KernelTable kAvx2Table{Isa::Avx2,   dot_avx2,  axpy_avx2,
                             horner_avx2, gemv_avx2, project_avx2};

}  // namespace sno::simd::detail
