#include "sno/evalbench.hpp"

#include "sno/archive.hpp"
#include "sno/error.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

namespace sno::eval {

namespace {

using clock_type = std::chrono::steady_clock;

template <class Fn>
double time_once(Fn&& fn) {
    const auto t0 = clock_type::now();
    fn();
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

// Keeps a result observable so the timed call is not elided.
volatile double g_sink = 0.0;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string_view to_string(Method m) noexcept {
    switch (m) {
    case Method::PolyFit: return "poly-fit";
    case Method::PolyFitCold: return "poly-fit-cold";
    case Method::Fft: return "fft";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    for (Method m : {Method::PolyFit, Method::PolyFitCold, Method::Fft})
        if (to_string(m) == name) return m;
    fail(ErrorKind::ConfigError, "unknown bench method '" + std::string(name) + "'");
}

double percentile(std::vector<double> v, double q) {
    require(!v.empty(), ErrorKind::ConfigError, "percentile of empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, ErrorKind::ConfigError,
            "slope needs at least two points");
    const double k = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

double clock_resolution() {
    double best = 1.0;
    for (int i = 0; i < 200; ++i) {
        const auto a = clock_type::now();
        auto b = clock_type::now();
        while (b == a) b = clock_type::now();
        best = std::min(best, std::chrono::duration<double>(b - a).count());
    }
    return best;
}

RuntimeReport runtime_bench(Method method, std::span<const std::size_t> sizes,
                            const BenchOptions& opt) {
    require(!sizes.empty(), ErrorKind::ConfigError, "no benchmark sizes");
    require(opt.reps >= 20, ErrorKind::ConfigError, "at least 20 repetitions are required");
    for (std::size_t n : sizes)
        require(std::has_single_bit(n) && n >= 1024, ErrorKind::ConfigError,
                "benchmark size " + std::to_string(n) + " must be a power of two >= 1024");
    const double tick = clock_resolution();

    RuntimeReport report;
    report.method = method;
    report.degree = opt.degree;
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal;

    for (std::size_t n : sizes) {
        std::vector<double> signal(n);
        for (double& v : signal) v = normal(rng);
        std::vector<double> times;
        const std::size_t total = opt.warmup + opt.reps;

        if (method == Method::Fft) {
            const FftPlan plan(n);
            std::vector<cplx> buf(n);
            for (std::size_t r = 0; r < total; ++r) {
                const double t = time_once([&] {
                    std::copy(signal.begin(), signal.end(), buf.begin());
                    plan.forward(buf);
                });
                g_sink = g_sink + buf[1].real();
                if (r >= opt.warmup) times.push_back(t);
            }
        } else {
            const auto grid = poly::Grid::uniform(0.0, 1.0, n);
            const auto warm = poly::make_fit_operator(grid, opt.degree);
            for (std::size_t r = 0; r < total; ++r) {
                double t;
                if (method == Method::PolyFit) {
                    t = time_once([&] { g_sink = g_sink + poly::fit_poly(signal, warm).coeffs[0]; });
                } else {
                    t = time_once([&] {
                        const auto op = poly::make_fit_operator(grid, opt.degree);
                        g_sink = g_sink + poly::fit_poly(signal, op).coeffs[0];
                    });
                }
                if (r >= opt.warmup) times.push_back(t);
            }
        }

        RuntimePoint pt;
        pt.n = n;
        pt.reps = times.size();
        pt.median = percentile(times, 0.5);
        pt.p10 = percentile(times, 0.1);
        pt.p90 = percentile(times, 0.9);
        require(pt.median > 0.0 && pt.median >= 100.0 * tick, ErrorKind::ClockTooCoarse,
                "clock tick " + fmt(tick) + " s is too coarse for a " + fmt(pt.median) +
                    " s median at n=" + std::to_string(n));
        report.points.push_back(pt);
    }
    if (report.points.size() >= 2) {
        std::vector<double> xs, ys;
        for (const auto& p : report.points) {
            xs.push_back(static_cast<double>(p.n));
            ys.push_back(p.median);
        }
        report.slope = loglog_slope(xs, ys);
    }
    return report;
}

std::string eval_csv(const EvalReport& r) {
    std::string out = "sample,rel_l2\n";
    for (std::size_t i = 0; i < r.per_sample.size(); ++i)
        out += std::to_string(i) + "," + fmt(r.per_sample[i]) + "\n";
    return out;
}

nlohmann::json eval_summary(const EvalReport& r) {
    return {{"task", r.task},           {"samples", r.per_sample.size()},
            {"mean_rel_l2", r.mean},    {"median_rel_l2", r.median},
            {"min_rel_l2", r.min},      {"max_rel_l2", r.max},
            {"worst_index", r.worst_index}, {"median_index", r.median_index}};
}

std::string superres_csv(const SuperResReport& r) {
    std::string out = "resolution,model_rel_l2,baseline_rel_l2\n";
    for (const auto& row : r.rows)
        out += std::to_string(row.resolution) + "," + fmt(row.model_rel_l2) + "," +
               fmt(row.baseline_rel_l2) + "\n";
    return out;
}

std::string runtime_csv(std::span<const RuntimeReport> reports) {
    std::string out = "method,degree,n,reps,median_s,p10_s,p90_s\n";
    for (const auto& r : reports)
        for (const auto& p : r.points)
            out += std::string(to_string(r.method)) + "," + std::to_string(r.degree) + "," +
                   std::to_string(p.n) + "," + std::to_string(p.reps) + "," + fmt(p.median) + "," +
                   fmt(p.p10) + "," + fmt(p.p90) + "\n";
    return out;
}

nlohmann::json runtime_summary(std::span<const RuntimeReport> reports) {
    auto arr = nlohmann::json::array();
    for (const auto& r : reports)
        arr.push_back({{"method", std::string(to_string(r.method))},
                       {"degree", r.degree},
                       {"loglog_slope", r.slope},
                       {"points", r.points.size()}});
    return {{"methods", arr}};
}

void write_flat_grid(const std::filesystem::path& path, std::span<const double> values) {
    std::vector<unsigned char> bytes;
    bytes.reserve(values.size() * 8);
    for (double v : values) nn::put_f64(bytes, v);
    nn::write_file_bytes(path, bytes);
}

}  // namespace sno::eval
