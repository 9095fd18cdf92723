#pragma once

#include "sno/error.hpp"
#include "sno/tensor.hpp"

#include "doctest.h"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testing {

#define CHECK_KIND(expr, expected_kind)                                   \
    do {                                                                  \
        bool thrown_ = false;                                             \
        try {                                                             \
            (void)(expr);                                                 \
        } catch (const sno::Error& e_) {                                  \
            thrown_ = true;                                               \
            CHECK_MESSAGE(e_.kind() == (expected_kind), e_.what());       \
        }                                                                 \
        CHECK_MESSAGE(thrown_, "expected " #expected_kind " from " #expr); \
    } while (0)

inline std::vector<double> randn(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, scale);
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

inline sno::nn::Tensor rand_tensor(std::vector<std::size_t> shape, std::uint64_t seed,
                                   double scale = 1.0) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return sno::nn::Tensor(std::move(shape), randn(n, seed, scale));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("sno_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace testing
