#include "sno/evalbench.hpp"

#include "sno/error.hpp"

#include <bit>
#include <numbers>

namespace sno::eval {

FftPlan::FftPlan(std::size_t n) : n_(n) {
    require(n >= 1 && std::has_single_bit(n), ErrorKind::LengthNotPow2,
            "FFT length " + std::to_string(n) + " is not a power of two");
    const int bits = std::countr_zero(n);
    rev_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
        rev_[i] = r;
    }
    twiddle_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
        const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        twiddle_[k] = {std::cos(a), std::sin(a)};
    }
}

void FftPlan::run(std::span<cplx> x, bool inverse) const {
    require(x.size() == n_, ErrorKind::ShapeMismatch,
            "FFT input length " + std::to_string(x.size()) + " vs plan " + std::to_string(n_));
    for (std::size_t i = 0; i < n_; ++i)
        if (i < rev_[i]) std::swap(x[i], x[rev_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
        const std::size_t half = len / 2, step = n_ / len;
        for (std::size_t s = 0; s < n_; s += len) {
            for (std::size_t j = 0; j < half; ++j) {
                const cplx w = twiddle_[j * step];
                const double wr = w.real(), wi = inverse ? -w.imag() : w.imag();
                const cplx u = x[s + j];
                const cplx b = x[s + j + half];
                const cplx v{b.real() * wr - b.imag() * wi, b.real() * wi + b.imag() * wr};
                x[s + j] = u + v;
                x[s + j + half] = u - v;
            }
        }
    }
}

void FftPlan::forward(std::span<cplx> data) const { run(data, false); }

void FftPlan::inverse(std::span<cplx> data) const {
    run(data, true);
    const double inv = 1.0 / static_cast<double>(n_);
    for (auto& v : data) v *= inv;
}

std::vector<cplx> fft_radix2(std::span<const double> signal) {
    std::vector<cplx> x(signal.begin(), signal.end());
    FftPlan(x.size()).forward(x);
    return x;
}

std::vector<cplx> fft_radix2(std::span<const cplx> signal) {
    std::vector<cplx> x(signal.begin(), signal.end());
    FftPlan(x.size()).forward(x);
    return x;
}

std::vector<cplx> ifft_radix2(std::span<const cplx> spectrum) {
    std::vector<cplx> x(spectrum.begin(), spectrum.end());
    FftPlan(x.size()).inverse(x);
    return x;
}

}  // namespace sno::eval
