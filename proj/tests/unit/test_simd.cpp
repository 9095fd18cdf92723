#include "helpers.hpp"

#include "sno/simd/kernels.hpp"

using namespace sno;
using testing::randn;

TEST_SUITE("simd") {

TEST_CASE("active table is one of the compiled tables") {
    const auto& a = simd::active();
    const auto* avx = simd::avx2_kernels();
    CHECK((&a == &simd::scalar_kernels() || &a == avx));
}

TEST_CASE("avx2 kernels match the scalar reference") {
    const auto* avx = simd::avx2_kernels();
    if (!avx) {
        MESSAGE("AVX2 unavailable on this host; equivalence not exercised");
        return;
    }
    const auto& ref = simd::scalar_kernels();
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 15u, 16u, 17u, 33u, 64u, 255u, 1000u}) {
        CAPTURE(n);
        const auto a = randn(n, 1 + n), b = randn(n, 2 + n);

        const double d0 = ref.dot(a.data(), b.data(), n), d1 = avx->dot(a.data(), b.data(), n);
        double scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) scale += std::abs(a[i] * b[i]);
        CHECK(std::abs(d0 - d1) <= 1e-14 * (scale + 1.0));

        auto y0 = b, y1 = b;
        ref.axpy(0.37, a.data(), y0.data(), n);
        avx->axpy(0.37, a.data(), y1.data(), n);
        CHECK(testing::max_abs_diff(y0, y1) <= 1e-15 * 4);

        std::vector<double> z(n);
        for (std::size_t i = 0; i < n; ++i) z[i] = -1.0 + 2.0 * static_cast<double>(i) / std::max<std::size_t>(n, 1);
        const auto coeffs = randn(9, 3);
        std::vector<double> h0(n), h1(n);
        ref.horner(coeffs.data(), coeffs.size(), z.data(), h0.data(), n);
        avx->horner(coeffs.data(), coeffs.size(), z.data(), h1.data(), n);
        CHECK(testing::max_abs_diff(h0, h1) <= 1e-13);

        const std::size_t rows = 6;
        const auto m = randn(rows * (n + 2), 4);
        std::vector<double> g0(rows), g1(rows);
        ref.gemv(m.data(), rows, n + 2, a.data(), n, g0.data());
        avx->gemv(m.data(), rows, n + 2, a.data(), n, g1.data());
        CHECK(testing::max_abs_diff(g0, g1) <= 1e-12 * (1.0 + static_cast<double>(n)));

        // A three-term recurrence with bounded values: Chebyshev-like on [-1, 1].
        const std::size_t p = 7;
        std::vector<double> alpha(p, 0.05), beta(p, 0.5), inv_beta(p, 2.0);
        beta[0] = 0.0;
        std::vector<double> p0(p), p1(p);
        ref.project(z.data(), b.data(), n, alpha.data(), beta.data(), inv_beta.data(), p, 0.3, p0.data());
        avx->project(z.data(), b.data(), n, alpha.data(), beta.data(), inv_beta.data(), p, 0.3, p1.data());
        for (std::size_t k = 0; k < p; ++k) CHECK(std::abs(p0[k] - p1[k]) <= 1e-9 * (1.0 + std::abs(p0[k])));
    }
}

TEST_CASE("scalar horner agrees with direct power sums") {
    const std::vector<double> c{-1.0, 0.0, 3.0};
    const std::vector<double> z{-1.0, 0.0, 1.0};
    std::vector<double> out(3);
    simd::scalar_kernels().horner(c.data(), c.size(), z.data(), out.data(), 3);
    CHECK(out == std::vector<double>{2.0, -1.0, 2.0});
}

TEST_CASE("project with the defining recurrence") {
    // q0 = 1, q1 = z, q2 = (z*z - 1/2) * 2 on a few points, against hand evaluation.
    const std::vector<double> z{-0.5, 0.25, 0.9};
    const std::vector<double> y{1.0, 2.0, -1.0};
    const std::vector<double> alpha{0.0, 0.0, 0.0}, beta{0.0, 0.5, 0.0}, inv_beta{0.0, 1.0, 2.0};
    std::vector<double> out(3);
    simd::scalar_kernels().project(z.data(), y.data(), 3, alpha.data(), beta.data(), inv_beta.data(), 3,
                                   1.0, out.data());
    double e0 = 0, e1 = 0, e2 = 0;
    for (int i = 0; i < 3; ++i) {
        e0 += y[i];
        e1 += z[i] * y[i];
        e2 += (z[i] * z[i] - 0.5) * 2.0 * y[i];
    }
    CHECK(out[0] == doctest::Approx(e0).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(e1).epsilon(1e-15));
    CHECK(out[2] == doctest::Approx(e2).epsilon(1e-14));
}

}  // TEST_SUITE
