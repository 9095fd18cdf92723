// Acceptance run: one PASS/FAIL line per criterion. Optional arguments select
// criteria by number; with none, all eight run. Exit status is nonzero when
// any selected criterion fails.

#include "sno/datagen.hpp"
#include "sno/evalbench.hpp"
#include "sno/model.hpp"
#include "sno/polycore.hpp"
#include "sno/simd/kernels.hpp"
#include "sno/trainer.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sno;
using std::numbers::pi;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<double> randn(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

double residual(const poly::Matrix& v, std::span<const double> a, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.rows; ++i) {
        double r = -y[i];
        for (std::size_t j = 0; j < v.cols; ++j) r += v(i, j) * a[j];
        s += r * r;
    }
    return std::sqrt(s);
}

// Cholesky solve of V^T V a = V^T y.
std::vector<double> normal_equations(const poly::Matrix& v, std::span<const double> y) {
    const std::size_t p = v.cols;
    std::vector<double> g(p * p, 0.0), b(p, 0.0);
    for (std::size_t i = 0; i < v.rows; ++i)
        for (std::size_t r = 0; r < p; ++r) {
            b[r] += v(i, r) * y[i];
            for (std::size_t c = 0; c <= r; ++c) g[r * p + c] += v(i, r) * v(i, c);
        }
    for (std::size_t j = 0; j < p; ++j) {
        double d = g[j * p + j];
        for (std::size_t k = 0; k < j; ++k) d -= g[j * p + k] * g[j * p + k];
        g[j * p + j] = std::sqrt(d);
        for (std::size_t i = j + 1; i < p; ++i) {
            double s = g[i * p + j];
            for (std::size_t k = 0; k < j; ++k) s -= g[i * p + k] * g[j * p + k];
            g[i * p + j] = s / g[j * p + j];
        }
    }
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 0; k < i; ++k) b[i] -= g[i * p + k] * b[k];
        b[i] /= g[i * p + i];
    }
    for (std::size_t i = p; i-- > 0;) {
        for (std::size_t k = i + 1; k < p; ++k) b[i] -= g[k * p + i] * b[k];
        b[i] /= g[i * p + i];
    }
    return b;
}

// --- 1 --------------------------------------------------------------------

Outcome transform_exactness() {
    const auto grid = poly::Grid::uniform(-1.0, 1.0, 64);
    const auto op = poly::make_fit_operator(grid, 16);
    const auto& f = poly::factorials();
    double fit_err = 0.0, trip_err = 0.0;
    bool scaling_exact = true;
    for (int k = 0; k <= 16; ++k) {
        std::vector<double> y(64);
        for (std::size_t i = 0; i < 64; ++i) y[i] = std::pow(grid[i], k);
        const auto c = poly::fit_poly(y, op);
        for (int j = 0; j <= 16; ++j) fit_err = std::max(fit_err, std::abs(c.coeffs[j] - (j == k ? 1.0 : 0.0)));
        const auto s = poly::sumudu_forward(c);
        for (int j = 0; j <= 16; ++j) scaling_exact &= s.scaled_coeffs[j] == f[j] * c.coeffs[j];
        const auto back = poly::sumudu_inverse(s);
        for (int j = 0; j <= 16; ++j)
            trip_err = std::max(trip_err, std::abs(back.coeffs[j] - c.coeffs[j]) / std::max(std::abs(c.coeffs[j]), 1e-300));
    }
    return {fit_err <= 1e-10 && scaling_exact && trip_err <= 1e-12,
            fmt("max coeff err %.2e (<= 1e-10), factorial scaling %s, round-trip rel err %.2e (<= 1e-12)", fit_err,
                scaling_exact ? "exact" : "INEXACT", trip_err)};
}

// --- 2 --------------------------------------------------------------------

Outcome pinv_oracle() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> deg(0, 16);
    std::uniform_real_distribution<double> u01(0.0, 1.0), logscale(-4.0, 0.0);
    std::size_t beaten = 0, compared = 0, mismatched = 0;
    double worst_ne = 0.0;
    for (int sys = 0; sys < 200; ++sys) {
        const int d = deg(rng);
        const std::size_t n = static_cast<std::size_t>(d + 1) +
                              std::uniform_int_distribution<std::size_t>(0, 199 - static_cast<std::size_t>(d))(rng);
        // Jittered sample locations on an arbitrary interval.
        const double lo = 10 * u01(rng) - 5, width = 0.1 + 5 * u01(rng);
        std::vector<double> pts(n);
        for (std::size_t i = 0; i < n; ++i)
            pts[i] = lo + width * (static_cast<double>(i) + 0.4 * (u01(rng) - 0.5)) / static_cast<double>(n);
        const poly::Grid grid(pts);
        const auto op = poly::make_fit_operator(grid, d);
        const auto y = randn(n, rng);
        const auto a = poly::fit_poly(y, op).coeffs;
        const double best = residual(op.vandermonde, a, y);
        for (int t = 0; t < 1000; ++t) {
            auto cand = a;
            const double s = std::pow(10.0, logscale(rng));
            for (double& c : cand) c += s * std::normal_distribution<double>()(rng);
            if (residual(op.vandermonde, cand, y) < best) ++beaten;
        }
        // Normal equations square the condition number; compare only where that stays benign.
        if (op.condition_estimate * op.condition_estimate * 1e-16 < 1e-9) {
            ++compared;
            const auto ne = normal_equations(op.vandermonde, y);
            double scale = 1.0, diff = 0.0;
            for (std::size_t j = 0; j < ne.size(); ++j) {
                scale = std::max(scale, std::abs(ne[j]));
                diff = std::max(diff, std::abs(ne[j] - a[j]));
            }
            worst_ne = std::max(worst_ne, diff / scale);
            mismatched += diff > 1e-8 * scale;
        }
    }
    return {beaten == 0 && mismatched == 0 && compared > 0,
            fmt("200 systems, candidates beating the fit %zu/200000, normal-equation comparisons %zu "
                "(worst rel diff %.2e, mismatches %zu)",
                beaten, compared, worst_ne, mismatched)};
}

// --- 3 --------------------------------------------------------------------

Outcome gradient_check() {
    model::ModelConfig c;
    c.width = 4;
    c.degree = 4;
    c.n_layers = 2;
    c.in_channels = 1;
    c.out_channels = 1;
    c.seed = 77;
    auto m = model::init_model(c);
    std::mt19937_64 rng(78);
    for (auto& p : m.params) {
        const auto r = randn(p.value.numel(), rng);
        for (std::size_t i = 0; i < r.size(); ++i) p.value[i] += 0.05 * r[i];
    }
    const std::size_t n = 16;
    const auto grid = poly::Grid::uniform(0.0, 1.0, n);
    const nn::Tensor x({3, 1, n}, randn(3 * n, rng));
    const nn::Tensor truth({3, 1, n}, randn(3 * n, rng));
    auto loss = [&] { return nn::rel_l2_loss(model::forward(m, x, grid), truth).value; };

    model::ForwardTape tape;
    const auto y = model::forward(m, x, grid, &tape);
    m.params.zero_grad();
    model::backward(m, tape, nn::rel_l2_loss(y, truth).grad);

    std::size_t checked = 0, failed = 0;
    double worst = 0.0;
    for (auto& p : m.params)
        for (std::size_t i = 0; i < p.value.numel(); ++i) {
            const double keep = p.value[i], h = 1e-5;
            p.value[i] = keep + h;
            const double up = loss();
            p.value[i] = keep - h;
            const double down = loss();
            p.value[i] = keep;
            const double fd = (up - down) / (2 * h);
            const double tol = std::max(1e-4 * std::abs(fd), 1e-7);
            const double err = std::abs(p.grad[i] - fd);
            worst = std::max(worst, err / tol);
            failed += err > tol;
            ++checked;
        }
    return {failed == 0, fmt("%zu parameters checked, %zu outside tolerance, worst error/tolerance %.2e", checked,
                             failed, worst)};
}

// --- 4 and 5 --------------------------------------------------------------

struct Trained {
    model::SNOModel model;
    train::TrainReport report;
    data::TaskSpec spec;
    double seconds = 0.0;
};

data::TaskSpec diffusion_spec(std::size_t resolution) {
    auto s = data::TaskSpec::defaults(data::TaskId::Diffusion);
    s.samples = 1000;
    s.resolution = resolution;
    s.time_resolution = 64;
    s.seed = 4;
    return s;
}

Trained& trained_diffusion() {
    static std::optional<Trained> t;
    if (t) return *t;
    const auto t0 = std::chrono::steady_clock::now();
    const auto spec = diffusion_spec(64);
    const auto ds = train::normalize(data::build_dataset(spec, 1));
    train::TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch_size = 20;
    cfg.epochs = 200;
    cfg.seed = 4;
    cfg.model.width = 32;
    cfg.model.degree = 16;
    cfg.model.n_layers = 4;
    cfg.model.in_channels = 1;
    cfg.model.out_channels = 64;
    cfg.model.seed = 4;
    auto m = model::init_model(cfg.model);
    auto report = train::train(m, ds, cfg, [](const train::EpochRecord& r) {
        if (r.epoch % 20 == 0)
            std::fprintf(stderr, "  [training] epoch %d train %.4g test %.4g\n", r.epoch, r.train_loss, r.test_rel_l2);
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    t = Trained{std::move(m), std::move(report), spec, secs};
    return *t;
}

Outcome training_convergence() {
    const auto& t = trained_diffusion();
    const auto& ep = t.report.epochs;
    const double final_test = ep.back().test_rel_l2;
    // Trailing 20-epoch moving average over the final 100 epochs.
    std::vector<double> smooth;
    for (std::size_t e = ep.size() - 100; e < ep.size(); ++e) {
        double s = 0.0;
        for (std::size_t k = e + 1 - 20; k <= e; ++k) s += ep[k].train_loss;
        smooth.push_back(s / 20);
    }
    std::size_t rises = 0;
    double worst_rise = 0.0;
    for (std::size_t i = 1; i < smooth.size(); ++i)
        if (smooth[i] > smooth[i - 1]) {
            ++rises;
            worst_rise = std::max(worst_rise, smooth[i] - smooth[i - 1]);
        }
    const bool in_time = t.seconds < 30 * 60;
    return {final_test < 0.05 && rises == 0 && in_time,
            fmt("final test rel-L2 %.4g (< 0.05), final train loss %.4g, smoothed-loss increases in last 100 "
                "epochs %zu (worst +%.3g), training time %.0f s (< 1800 s)",
                final_test, ep.back().train_loss, rises, worst_rise, t.seconds)};
}

Outcome superres() {
    const auto& t = trained_diffusion();
    const auto fine = data::build_dataset(diffusion_spec(256), 4);
    const std::size_t ns[] = {64, 256};
    const auto r = eval::superres_eval(t.model, fine, 64, ns, 4);
    const double base = r.base_rel_l2, model256 = r.rows[1].model_rel_l2, lin256 = r.rows[1].baseline_rel_l2;
    // The ratios only mean something for a model that learned the task; an
    // all-zero predictor scores exactly 1.0 at every resolution.
    const double trained_test = t.report.epochs.back().test_rel_l2;
    const bool trained = trained_test < 0.05;
    return {trained && model256 <= 2 * base && model256 <= 1.5 * lin256,
            (trained ? std::string() : fmt("precondition unmet: trained model test rel-L2 %.4g (needs < 0.05); ", trained_test)) +
                fmt("base(64) rel-L2 %.4g, model(256) %.4g (<= 2x base = %.4g), linear baseline(256) %.4g "
                    "(model <= 1.5x = %.4g)",
                    base, model256, 2 * base, lin256, 1.5 * lin256)};
}

// --- 6 --------------------------------------------------------------------

Outcome complexity() {
    std::vector<std::size_t> sizes;
    for (int e = 12; e <= 18; ++e) sizes.push_back(std::size_t{1} << e);
    eval::BenchOptions opt;
    opt.degree = 16;
    opt.reps = 20;
    const auto poly_r = eval::runtime_bench(eval::Method::PolyFit, sizes, opt);
    const auto fft_r = eval::runtime_bench(eval::Method::Fft, sizes, opt);
    double lo = 1e9, hi = 0.0;
    for (std::size_t i = 1; i < poly_r.points.size(); ++i) {
        const double ratio = poly_r.points[i].median / poly_r.points[i - 1].median;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    const bool ok = poly_r.slope >= 0.85 && poly_r.slope <= 1.15 && fft_r.slope >= 0.95 && fft_r.slope <= 1.35;
    return {ok, fmt("poly-fit slope %.3f ([0.85, 1.15]), fft slope %.3f ([0.95, 1.35]), poly-fit doubling ratios "
                    "%.2f..%.2f, kernels %s",
                    poly_r.slope, fft_r.slope, lo, hi, std::string(simd::to_string(simd::active().isa)).c_str())};
}

// --- 7 --------------------------------------------------------------------

Outcome solver_fidelity() {
    const std::size_t nx = 64;
    const double k = 0.003;
    const auto grids = data::make_pde_grids(1.0, 1.0, 64);
    std::vector<double> u0(nx);
    for (std::size_t i = 0; i < nx; ++i) u0[i] = std::sin(2 * pi * static_cast<double>(i) / nx);
    const auto f = data::solve_diffusion(u0, k, grids);
    double heat = 0.0;
    for (std::size_t t = 0; t < f.nt; ++t)
        for (std::size_t i = 0; i < nx; ++i)
            heat = std::max(heat, std::abs(f.at(i, t) - std::exp(-k * 4 * pi * pi * grids.times[t]) * u0[i]));

    const auto g = poly::Grid::uniform(0.0, 10.0, 65);
    auto forcing = [](double t) { return std::sin(1.3 * t) + 0.5 * std::cos(0.4 * t); };
    auto run = [&](int sub) {
        data::OdeOptions o;
        o.substeps = sub;
        return data::solve_duffing(forcing, 0.1, g, o);
    };
    const auto ref = run(256), a = run(2), b = run(4);
    double e1 = 0.0, e2 = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        e1 = std::max(e1, std::abs(a[i] - ref[i]));
        e2 = std::max(e2, std::abs(b[i] - ref[i]));
    }
    const double ratio = e1 / e2;

    std::vector<double> l0(nx);
    for (std::size_t i = 0; i < nx; ++i) l0[i] = 0.05 + 0.9 * static_cast<double>(i) / (nx - 1);
    const double r = 1.0;
    const auto lg = data::make_pde_grids(1.0, 3.0, 31);
    const auto lf = data::solve_diffusion_reaction(l0, 0.0, r, lg);
    double logistic = 0.0;
    for (std::size_t t = 0; t < lf.nt; ++t) {
        const double e = std::exp(r * lg.times[t]);
        for (std::size_t i = 0; i < nx; ++i)
            logistic = std::max(logistic, std::abs(lf.at(i, t) - l0[i] * e / (1 + l0[i] * (e - 1))));
    }
    return {heat < 1e-4 && ratio >= 12 && ratio <= 20 && logistic < 1e-6,
            fmt("heat-mode max err %.2e (< 1e-4), RK4 halving ratio %.2f ([12, 20]), logistic max err %.2e (< 1e-6)",
                heat, ratio, logistic)};
}

// --- 8 --------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Drops the trailing wall-clock column of train.csv.
std::string without_seconds(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
}

int shell(const std::string& cmd) {
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / ("sno_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    {
        std::ofstream(root / "spec.json") << R"({"task": "diffusion", "samples": 200, "resolution": 64, "time_resolution": 16, "seed": 8})";
        std::ofstream(root / "train.json") << R"({"epochs": 5, "batch_size": 20, "lr": 0.001, "seed": 8, "model": {"width": 32, "degree": 16, "n_layers": 4, "seed": 8}})";
    }
    const std::string cli = SNO_CLI_PATH;
    std::vector<std::string> train_csv, eval_csv;
    bool ok = true;
    for (const char* run : {"a", "b"}) {
        const fs::path d = root / run;
        const std::string q = "'" + d.string() + "'";
        ok &= shell("'" + cli + "' gen --config '" + (root / "spec.json").string() + "' --out " + q + "/gen >/dev/null") == 0;
        ok &= shell("'" + cli + "' train --quiet --config '" + (root / "train.json").string() + "' --data " + q +
                    "/gen/dataset.snod --out " + q + "/train >/dev/null") == 0;
        ok &= shell("'" + cli + "' eval --checkpoint " + q + "/train/model.snot --data " + q + "/gen/dataset.snod --out " +
                    q + "/eval >/dev/null") == 0;
        train_csv.push_back(slurp(d / "train" / "train.csv"));
        eval_csv.push_back(slurp(d / "eval" / "eval.csv"));
    }
    const bool data_same = slurp(root / "a" / "gen" / "dataset.snod") == slurp(root / "b" / "gen" / "dataset.snod");
    const bool train_same = without_seconds(train_csv[0]) == without_seconds(train_csv[1]) && !train_csv[0].empty();
    const bool eval_same = eval_csv[0] == eval_csv[1] && !eval_csv[0].empty();
    const bool model_same = slurp(root / "a" / "train" / "model.snot") == slurp(root / "b" / "train" / "model.snot");
    fs::remove_all(root);
    return {ok && data_same && train_same && eval_same && model_same,
            fmt("commands %s; dataset bytes %s, train.csv (loss columns) %s, eval.csv %s, checkpoint %s",
                ok ? "ok" : "FAILED", data_same ? "identical" : "DIFFER", train_same ? "identical" : "DIFFER",
                eval_same ? "identical" : "DIFFER", model_same ? "identical" : "DIFFER")};
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "transform exactness", 1.0, transform_exactness},
        {2, "pseudoinverse oracle", 30.0, pinv_oracle},
        {3, "gradient correctness", 120.0, gradient_check},
        {4, "training convergence (diffusion)", 1800.0, training_convergence},
        {5, "zero-shot super-resolution (diffusion)", 300.0, superres},
        {6, "complexity scaling", 600.0, complexity},
        {7, "solver fidelity", 60.0, solver_fidelity},
        {8, "end-to-end determinism", 300.0, determinism},
    };
    std::set<int> pick;
    for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : all) {
        if (!pick.empty() && !pick.contains(c.id)) continue;
        // Criterion 5 reuses the model trained for criterion 4; its own clock
        // starts after that model exists.
        if (c.id == 5) trained_diffusion();
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.id == 4) secs = std::max(secs, trained_diffusion().seconds);
        const bool in_time = secs < c.budget_s;
        const bool pass = o.pass && in_time;
        failures += !pass;
        std::printf("criterion %d %-40s %s  %s; runtime %.2f s (budget %.0f s)\n", c.id, c.name,
                    pass ? "PASS" : "FAIL", o.detail.c_str(), secs, c.budget_s);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
