#include "sno/datagen.hpp"

#include "sno/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace sno::data {

namespace {

constexpr double kDivergence = 1e6;

// Symmetric periodic tridiagonal system with constant diagonal d and
// off-diagonal e (including the two corners), solved by the Thomas algorithm
// plus a Sherman-Morrison correction for the corners.
class CyclicTridiag {
public:
    CyclicTridiag(std::size_t n, double d, double e) : n_(n), e_(e), gamma_(-d) {
        require(n >= 3, ErrorKind::ConfigError, "periodic grid needs at least 3 points");
        diag_.assign(n, d);
        diag_[0] = d - gamma_;
        diag_[n - 1] = d - e * e / gamma_;
        // Forward-elimination factors of the modified tridiagonal matrix.
        cprime_.resize(n);
        denom_.resize(n);
        denom_[0] = diag_[0];
        cprime_[0] = e / denom_[0];
        for (std::size_t i = 1; i < n; ++i) {
            denom_[i] = diag_[i] - e * cprime_[i - 1];
            cprime_[i] = e / denom_[i];
        }
        std::vector<double> u(n, 0.0);
        u[0] = gamma_;
        u[n - 1] = e;
        z_ = thomas(u);
        zfactor_ = 1.0 + z_[0] + e_ * z_[n - 1] / gamma_;
    }

    void solve(std::vector<double>& rhs) const {
        std::vector<double> x = thomas(rhs);
        const double f = (x[0] + e_ * x[n_ - 1] / gamma_) / zfactor_;
        for (std::size_t i = 0; i < n_; ++i) rhs[i] = x[i] - f * z_[i];
    }

private:
    std::vector<double> thomas(const std::vector<double>& r) const {
        std::vector<double> y(n_);
        y[0] = r[0] / denom_[0];
        for (std::size_t i = 1; i < n_; ++i) y[i] = (r[i] - e_ * y[i - 1]) / denom_[i];
        for (std::size_t i = n_ - 1; i-- > 0;) y[i] -= cprime_[i] * y[i + 1];
        return y;
    }

    std::size_t n_;
    double e_;
    double gamma_;
    std::vector<double> diag_, cprime_, denom_, z_;
    double zfactor_ = 1.0;
};

// One Crank-Nicolson step of u_t = k u_xx with a = k dt / (2 dx^2).
class CrankNicolson {
public:
    CrankNicolson(std::size_t n, double a) : a_(a), lhs_(n, 1.0 + 2.0 * a, -a) {}

    void step(std::vector<double>& u) const {
        const std::size_t n = u.size();
        std::vector<double> rhs(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double l = u[(i + n - 1) % n], r = u[(i + 1) % n];
            rhs[i] = u[i] + a_ * (l - 2.0 * u[i] + r);
        }
        lhs_.solve(rhs);
        u.swap(rhs);
    }

private:
    double a_;
    CyclicTridiag lhs_;
};

double burgers_flux(double ul, double ur) noexcept {
    const double fl = 0.5 * ul * ul, fr = 0.5 * ur * ur;
    if (ul <= ur) {
        if (ul > 0.0) return fl;
        if (ur < 0.0) return fr;
        return 0.0;
    }
    return std::max(fl, fr);
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

void check_bounded(double v, double t) {
    if (!std::isfinite(v) || std::abs(v) > kDivergence)
        fail(ErrorKind::SolverDiverged, "state left |x| <= 1e6 at t = " + std::to_string(t));
}

struct Osc {
    double x, v;
};

template <class Accel>
std::vector<double> integrate_second_order(const Accel& accel, const Grid& grid,
                                           const OdeOptions& opt) {
    require(opt.substeps >= 1, ErrorKind::ConfigError, "substeps must be >= 1");
    std::vector<double> out(grid.size());
    Osc s{opt.x0, opt.v0};
    out[0] = s.x;
    auto deriv = [&](double t, const Osc& y) { return Osc{y.v, accel(t, y.x, y.v)}; };
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double h = (grid[i + 1] - grid[i]) / opt.substeps;
        double t = grid[i];
        for (int k = 0; k < opt.substeps; ++k) {
            const Osc k1 = deriv(t, s);
            const Osc k2 = deriv(t + 0.5 * h, {s.x + 0.5 * h * k1.x, s.v + 0.5 * h * k1.v});
            const Osc k3 = deriv(t + 0.5 * h, {s.x + 0.5 * h * k2.x, s.v + 0.5 * h * k2.v});
            const Osc k4 = deriv(t + h, {s.x + h * k3.x, s.v + h * k3.v});
            s.x += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
            s.v += h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
            t = grid[i] + h * (k + 1);
        }
        check_bounded(s.x, grid[i + 1]);
        check_bounded(s.v, grid[i + 1]);
        out[i + 1] = s.x;
    }
    return out;
}

template <class Step>
Field march(std::span<const double> u0, const PdeGrids& grids, int substeps, Step&& step) {
    Field f;
    f.nx = u0.size();
    f.nt = grids.times.size();
    f.data.resize(f.nx * f.nt);
    std::vector<double> u(u0.begin(), u0.end());
    std::copy(u.begin(), u.end(), f.data.begin());
    for (std::size_t j = 1; j < f.nt; ++j) {
        const double dt = (grids.times[j] - grids.times[j - 1]) / substeps;
        for (int s = 0; s < substeps; ++s) step(u, dt);
        for (double v : u) check_bounded(v, grids.times[j]);
        std::copy(u.begin(), u.end(), f.data.begin() + static_cast<std::ptrdiff_t>(j * f.nx));
    }
    return f;
}

void check_pde_input(std::span<const double> u0, const PdeGrids& grids) {
    require(u0.size() >= 3, ErrorKind::ConfigError, "PDE grid needs at least 3 points");
    require(grids.times.size() >= 1 && grids.times.front() == 0.0, ErrorKind::ConfigError,
            "output times must start at 0");
    require(grids.substeps >= 1, ErrorKind::ConfigError, "substeps must be >= 1");
    require(grids.length > 0.0, ErrorKind::ConfigError, "domain length must be positive");
    if (grids.times.size() > 2) {
        const double h = grids.times[1] - grids.times[0];
        for (std::size_t j = 2; j < grids.times.size(); ++j)
            require(std::abs(grids.times[j] - grids.times[j - 1] - h) <= 1e-9 * std::abs(h),
                    ErrorKind::ConfigError, "output times must be uniformly spaced");
    }
}

}  // namespace

std::vector<ForcingSampler::Mode> ForcingSampler::draw(std::uint64_t index) const {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Mode> out(static_cast<std::size_t>(std::max(modes, 0)));
    for (int k = 1; k <= modes; ++k) {
        const double a = gauss(rng) * scale / k;
        out[static_cast<std::size_t>(k - 1)] = {a, phase(rng)};
    }
    return out;
}

double eval_modes(std::span<const ForcingSampler::Mode> modes, double t, double period) noexcept {
    double f = 0.0;
    for (std::size_t k = 0; k < modes.size(); ++k)
        f += modes[k].amplitude *
             std::sin(2.0 * std::numbers::pi * static_cast<double>(k + 1) * t / period + modes[k].phase);
    return f;
}

std::vector<double> ForcingSampler::sample(const Grid& grid, std::uint64_t index,
                                           double period) const {
    const auto m = draw(index);
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = eval_modes(m, grid[i], period);
    return out;
}

std::vector<double> solve_duffing(const Forcing& forcing, double c, const Grid& grid,
                                  const OdeOptions& opt, double alpha, double beta) {
    return integrate_second_order(
        [&](double t, double x, double v) { return forcing(t) - c * v - alpha * x - beta * x * x * x; },
        grid, opt);
}

std::vector<double> solve_pendulum(const Forcing& forcing, double c, const Grid& grid,
                                   const OdeOptions& opt) {
    return integrate_second_order(
        [&](double t, double x, double v) { return forcing(t) - c * v - std::sin(x); }, grid, opt);
}

LorenzState lorenz_rhs(const LorenzParams& p, const LorenzState& s) noexcept {
    return {p.sigma * (s[1] - s[0]), s[0] * (p.rho - s[2]) - s[1], s[0] * s[1] - p.beta * s[2]};
}

std::vector<LorenzState> solve_lorenz(const LorenzParams& params, const LorenzState& initial,
                                      const Grid& grid, int substeps) {
    require(substeps >= 1, ErrorKind::ConfigError, "substeps must be >= 1");
    std::vector<LorenzState> out(grid.size());
    LorenzState s = initial;
    out[0] = s;
    auto axpy = [](const LorenzState& a, double h, const LorenzState& d) {
        return LorenzState{a[0] + h * d[0], a[1] + h * d[1], a[2] + h * d[2]};
    };
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double h = (grid[i + 1] - grid[i]) / substeps;
        for (int k = 0; k < substeps; ++k) {
            const auto k1 = lorenz_rhs(params, s);
            const auto k2 = lorenz_rhs(params, axpy(s, 0.5 * h, k1));
            const auto k3 = lorenz_rhs(params, axpy(s, 0.5 * h, k2));
            const auto k4 = lorenz_rhs(params, axpy(s, h, k3));
            for (int d = 0; d < 3; ++d) s[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        for (double v : s) check_bounded(v, grid[i + 1]);
        out[i + 1] = s;
    }
    return out;
}

PdeGrids make_pde_grids(double length, double duration, std::size_t nt, int substeps) {
    require(nt >= 2, ErrorKind::ConfigError, "need at least two output times");
    PdeGrids g;
    g.length = length;
    g.substeps = substeps;
    g.times.resize(nt);
    for (std::size_t j = 0; j < nt; ++j)
        g.times[j] = duration * static_cast<double>(j) / static_cast<double>(nt - 1);
    return g;
}

Field solve_diffusion(std::span<const double> u0, double k, const PdeGrids& grids) {
    check_pde_input(u0, grids);
    require(k >= 0.0, ErrorKind::ConfigError, "diffusivity must be non-negative");
    const double dx = grids.length / static_cast<double>(u0.size());
    const double dt = grids.times.size() > 1 ? (grids.times[1] - grids.times[0]) / grids.substeps : 0.0;
    const CrankNicolson cn(u0.size(), k * dt / (2.0 * dx * dx));
    return march(u0, grids, grids.substeps, [&](std::vector<double>& u, double) { cn.step(u); });
}

double burgers_min_viscosity(double max_abs_u0, double dx) noexcept { return 4.0 * dx * max_abs_u0; }

Field solve_burgers(std::span<const double> u0, double nu, const PdeGrids& grids) {
    check_pde_input(u0, grids);
    require(nu > 0.0, ErrorKind::ConfigError, "viscosity must be positive");
    const std::size_t n = u0.size();
    const double dx = grids.length / static_cast<double>(n);
    const double interval = grids.times.size() > 1 ? grids.times[1] - grids.times[0] : 0.0;
    int substeps = grids.substeps;
    if (grids.adapt_substeps && interval > 0.0) {
        const double needed = std::ceil(interval * max_abs(u0) / (0.5 * dx));
        substeps = std::max(substeps, static_cast<int>(needed));
    }
    const double dt = interval / substeps;
    const CrankNicolson cn(n, nu * dt / (2.0 * dx * dx));
    std::vector<double> flux(n);
    return march(u0, grids, substeps, [&](std::vector<double>& u, double step_dt) {
        const double cfl = step_dt * max_abs(u) / dx;
        if (cfl > 1.0) fail(ErrorKind::CFLViolation, "advective CFL number " + std::to_string(cfl));
        for (std::size_t i = 0; i < n; ++i) flux[i] = burgers_flux(u[i], u[(i + 1) % n]);
        const double r = step_dt / dx;
        for (std::size_t i = 0; i < n; ++i) u[i] -= r * (flux[i] - flux[(i + n - 1) % n]);
        cn.step(u);
    });
}

double logistic_flow(double u0, double r, double t) noexcept {
    const double e = std::exp(r * t);
    return u0 * e / (1.0 + u0 * (e - 1.0));
}

Field solve_diffusion_reaction(std::span<const double> u0, double k, double r,
                               const PdeGrids& grids) {
    check_pde_input(u0, grids);
    require(k >= 0.0, ErrorKind::ConfigError, "diffusivity must be non-negative");
    const double dx = grids.length / static_cast<double>(u0.size());
    const double dt = grids.times.size() > 1 ? (grids.times[1] - grids.times[0]) / grids.substeps : 0.0;
    const CrankNicolson cn(u0.size(), k * dt / (2.0 * dx * dx));
    return march(u0, grids, grids.substeps, [&](std::vector<double>& u, double step_dt) {
        for (double& v : u) v = logistic_flow(v, r, 0.5 * step_dt);
        if (k > 0.0) cn.step(u);
        for (double& v : u) v = logistic_flow(v, r, 0.5 * step_dt);
    });
}

}  // namespace sno::data
