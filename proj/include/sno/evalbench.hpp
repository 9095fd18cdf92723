#pragma once

// Test-split metrics, zero-shot super-resolution, a radix-2 FFT baseline and
// the decomposition runtime benchmark.

#include "sno/datagen.hpp"
#include "sno/model.hpp"

#include "json.hpp"

#include <complex>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sno::eval {

using data::TaskDataset;
using nn::Tensor;

struct EvalReport {
    std::string task;
    double mean = 0.0;
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::vector<double> per_sample;
    std::size_t worst_index = 0;   // into the test split
    std::size_t median_index = 0;
    std::vector<double> worst_error;   // prediction - truth, [out_ch * n]
    std::vector<double> median_error;
};

// Aggregates from predictions and ground truth, both [N, C, n].
EvalReport summarize(const Tensor& pred, const Tensor& truth, std::string task = {});

// Model inputs for the dataset's rows [begin, end), mapped into the model's
// normalized input space.
Tensor model_inputs(const model::SNOModel& model, const TaskDataset& ds, std::size_t begin,
                    std::size_t end);

// Test split only. EmptySplit if there is none, ShapeMismatch on channel mismatch.
EvalReport evaluate(const model::SNOModel& model, const TaskDataset& ds, unsigned threads = 1);

struct SuperResRow {
    std::size_t resolution = 0;
    double model_rel_l2 = 0.0;
    double baseline_rel_l2 = 0.0;
};

struct SuperResReport {
    std::size_t base_resolution = 0;
    double base_rel_l2 = 0.0;
    std::vector<SuperResRow> rows;
};

// Base inputs are the fine dataset subsampled to base_n; each eval_n compares
// against the fine ground truth subsampled to eval_n. The baseline linearly
// interpolates the base-resolution prediction (periodically for PDE tasks).
// GridIncompatible when base_n or an eval_n does not divide the fine resolution.
SuperResReport superres_eval(const model::SNOModel& model, const TaskDataset& fine,
                             std::size_t base_n, std::span<const std::size_t> eval_ns,
                             unsigned threads = 1);

// --- FFT ------------------------------------------------------------------

using cplx = std::complex<double>;

// Iterative radix-2 Cooley-Tukey with precomputed twiddles and bit reversal.
class FftPlan {
public:
    // LengthNotPow2 unless n is a power of two >= 1.
    explicit FftPlan(std::size_t n);
    std::size_t size() const noexcept { return n_; }
    void forward(std::span<cplx> data) const;
    // Unnormalized inverse transform followed by division by n.
    void inverse(std::span<cplx> data) const;

private:
    void run(std::span<cplx> data, bool inverse) const;
    std::size_t n_;
    std::vector<std::size_t> rev_;
    std::vector<cplx> twiddle_;  // exp(-2 pi i k / n), k < n/2
};

std::vector<cplx> fft_radix2(std::span<const double> signal);
std::vector<cplx> fft_radix2(std::span<const cplx> signal);
std::vector<cplx> ifft_radix2(std::span<const cplx> spectrum);

// --- Runtime benchmark ----------------------------------------------------

enum class Method { PolyFit, PolyFitCold, Fft };

std::string_view to_string(Method m) noexcept;
Method parse_method(std::string_view name);

struct RuntimePoint {
    std::size_t n = 0;
    std::size_t reps = 0;
    double median = 0.0;  // seconds
    double p10 = 0.0;
    double p90 = 0.0;
};

struct RuntimeReport {
    Method method = Method::PolyFit;
    int degree = 0;
    std::vector<RuntimePoint> points;
    double slope = 0.0;  // least-squares slope of log(median) on log(n)
};

struct BenchOptions {
    int degree = poly::kDefaultDegree;
    std::size_t reps = 20;
    std::size_t warmup = 3;
};

// Sizes must be powers of two >= 2^10 and reps >= 20 (ConfigError otherwise).
// ClockTooCoarse if a median is under 100 clock ticks.
RuntimeReport runtime_bench(Method method, std::span<const std::size_t> sizes,
                            const BenchOptions& opt = {});

double loglog_slope(std::span<const double> x, std::span<const double> y);
double percentile(std::vector<double> v, double q);
// Smallest observable steady_clock increment, in seconds.
double clock_resolution();

// --- Report writers -------------------------------------------------------

std::string eval_csv(const EvalReport& r);
nlohmann::json eval_summary(const EvalReport& r);
std::string superres_csv(const SuperResReport& r);
std::string runtime_csv(std::span<const RuntimeReport> reports);
nlohmann::json runtime_summary(std::span<const RuntimeReport> reports);

// Raw little-endian f64 grid of `values`.
void write_flat_grid(const std::filesystem::path& path, std::span<const double> values);

}  // namespace sno::eval
