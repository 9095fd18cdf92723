#include "sno/polycore.hpp"

#include "sno/error.hpp"
#include "sno/hash.hpp"
#include "sno/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sno::poly {

namespace {

void check_degree(int degree) {
    require(degree >= 0, ErrorKind::ConfigError, "negative polynomial degree");
    require(degree <= kMaxDegree, ErrorKind::DegreeTooHigh,
            "degree " + std::to_string(degree) + " exceeds cap " + std::to_string(kMaxDegree));
}

}  // namespace

Grid::Grid(std::vector<double> points) : points_(std::move(points)) {
    require(points_.size() >= 2, ErrorKind::DegenerateGrid, "grid needs at least two points");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        require(std::isfinite(points_[i]), ErrorKind::DegenerateGrid, "non-finite grid point");
        if (i > 0)
            require(points_[i] > points_[i - 1], ErrorKind::DegenerateGrid,
                    "grid must be strictly increasing (index " + std::to_string(i) + ")");
    }
}

Grid Grid::uniform(double lo, double hi, std::size_t n) {
    require(n >= 2, ErrorKind::DegenerateGrid, "uniform grid needs n >= 2");
    std::vector<double> p(n);
    const double h = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) p[i] = lo + h * static_cast<double>(i);
    p.back() = hi;
    return Grid(std::move(p));
}

Grid Grid::periodic(double lo, double length, std::size_t n) {
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i)
        p[i] = lo + length * static_cast<double>(i) / static_cast<double>(n);
    return Grid(std::move(p));
}

Grid Grid::subsample(std::size_t stride) const {
    require(stride >= 1, ErrorKind::GridIncompatible, "stride must be positive");
    std::vector<double> p;
    for (std::size_t i = 0; i < points_.size(); i += stride) p.push_back(points_[i]);
    return Grid(std::move(p));
}

DomainMap rescale_domain(const Grid& grid) {
    const double lo = grid.front();
    const double width = grid.back() - lo;
    require(width > 0.0 && std::isfinite(width), ErrorKind::DegenerateGrid, "grid min equals max");
    DomainMap m;
    m.lo = lo;
    m.width = width;
    m.scale = 2.0 / width;
    m.shift = -(grid.back() + lo) / width;
    return m;
}

std::vector<double> normalized_points(const Grid& grid, const DomainMap& map) {
    std::vector<double> z(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) z[i] = map.apply(grid[i]);
    return z;
}

const std::array<double, kMaxDegree + 1>& factorials() noexcept {
    static const std::array<double, kMaxDegree + 1> table = [] {
        std::array<double, kMaxDegree + 1> f{};
        f[0] = 1.0;
        for (int n = 1; n <= kMaxDegree; ++n) f[n] = f[n - 1] * static_cast<double>(n);
        return f;
    }();
    return table;
}

Matrix vandermonde_rows(std::span<const double> z, int degree) {
    check_degree(degree);
    const std::size_t p = static_cast<std::size_t>(degree) + 1;
    Matrix v(z.size(), p);
    for (std::size_t i = 0; i < z.size(); ++i) {
        double pw = 1.0;
        for (std::size_t k = 0; k < p; ++k) {
            v(i, k) = pw;
            pw *= z[i];
        }
    }
    return v;
}

Matrix build_vandermonde(const Grid& grid, int degree, const DomainMap& map) {
    check_degree(degree);
    require(grid.size() >= static_cast<std::size_t>(degree) + 1, ErrorKind::Underdetermined,
            std::to_string(grid.size()) + " samples for degree " + std::to_string(degree));
    return vandermonde_rows(normalized_points(grid, map), degree);
}

FitOperator compute_fit_operator(const Matrix& vandermonde) {
    const std::size_t n = vandermonde.rows;
    const std::size_t p = vandermonde.cols;
    require(p >= 1, ErrorKind::ShapeMismatch, "empty Vandermonde matrix");
    check_degree(static_cast<int>(p) - 1);
    require(n >= p, ErrorKind::Underdetermined,
            std::to_string(n) + " rows for " + std::to_string(p) + " unknowns");

    const auto& k = simd::active();

    // Column-major working copy: column j occupies a[j*n .. j*n + n).
    std::vector<double> a(n * p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) a[j * n + i] = vandermonde(i, j);
    auto col = [&](std::size_t j) { return a.data() + j * n; };

    std::vector<std::size_t> perm(p);
    for (std::size_t j = 0; j < p; ++j) perm[j] = j;
    std::vector<double> diag(p), tau(p);

    for (std::size_t c = 0; c < p; ++c) {
        std::size_t best = c;
        double best_norm = -1.0;
        for (std::size_t j = c; j < p; ++j) {
            const double s = k.dot(col(j) + c, col(j) + c, n - c);
            if (s > best_norm) {
                best_norm = s;
                best = j;
            }
        }
        if (best != c) {
            std::swap_ranges(col(c), col(c) + n, col(best));
            std::swap(perm[c], perm[best]);
        }
        double* v = col(c) + c;
        const std::size_t len = n - c;
        const double norm = std::sqrt(best_norm);
        require(norm > 0.0, ErrorKind::IllConditioned, "Vandermonde matrix is rank deficient");
        const double alpha = v[0] >= 0.0 ? -norm : norm;
        v[0] -= alpha;
        const double vnorm2 = k.dot(v, v, len);
        tau[c] = 2.0 / vnorm2;
        diag[c] = alpha;
        for (std::size_t j = c + 1; j < p; ++j) {
            double* w = col(j) + c;
            const double s = k.dot(v, w, len) * tau[c];
            k.axpy(-s, v, w, len);
        }
    }

    const double cond = std::abs(diag.front()) / std::abs(diag.back());
    require(std::isfinite(cond) && cond <= kMaxCondition, ErrorKind::IllConditioned,
            "condition estimate " + std::to_string(cond));

    // Thin Q, stored as p rows of length n (i.e. Q^T row-major).
    Matrix qt(p, n);
    for (std::size_t j = 0; j < p; ++j) {
        double* q = qt.row(j).data();
        q[j] = 1.0;
        for (std::size_t c = std::min(j, p - 1) + 1; c-- > 0;) {
            const double* v = col(c) + c;
            const double s = k.dot(v, q + c, n - c) * tau[c];
            k.axpy(-s, v, q + c, n - c);
        }
    }

    // Back substitution R X = Q^T, then undo the column permutation.
    Matrix x(p, n);
    for (std::size_t r = p; r-- > 0;) {
        auto xr = x.row(r);
        std::copy(qt.row(r).begin(), qt.row(r).end(), xr.begin());
        for (std::size_t j = r + 1; j < p; ++j) k.axpy(-col(j)[r], x.row(j).data(), xr.data(), n);
        const double inv = 1.0 / diag[r];
        for (double& e : xr) e *= inv;
    }

    FitOperator op;
    op.degree = static_cast<int>(p) - 1;
    op.vandermonde = vandermonde;
    op.pinv = Matrix(p, n);
    for (std::size_t r = 0; r < p; ++r) {
        auto src = x.row(r);
        std::copy(src.begin(), src.end(), op.pinv.row(perm[r]).begin());
    }
    op.powers = Matrix(p, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) op.powers(j, i) = vandermonde(i, j);
    op.condition_estimate = cond;
    return op;
}

std::uint64_t grid_hash(const Grid& grid, int degree) {
    Fnv1a h;
    h.update_u64(grid.size());
    for (double x : grid.points()) h.update_f64(x);
    h.update_u64(static_cast<std::uint64_t>(degree));
    return h.digest();
}

OrthoRecurrence build_recurrence(std::span<const double> z, int degree) {
    check_degree(degree);
    const std::size_t n = z.size(), p = static_cast<std::size_t>(degree) + 1;
    require(n >= p, ErrorKind::Underdetermined,
            std::to_string(n) + " points for degree " + std::to_string(degree));
    const auto& k = simd::active();
    OrthoRecurrence r;
    r.alpha.assign(p, 0.0);
    r.beta.assign(p, 0.0);
    r.inv_beta.assign(p, 0.0);
    r.q0 = 1.0 / std::sqrt(static_cast<double>(n));

    // Rows of Q are the recurrence polynomials sampled on z.
    Matrix q(p, n);
    for (std::size_t i = 0; i < n; ++i) q(0, i) = r.q0;
    for (std::size_t j = 0; j + 1 < p; ++j) {
        double num = 0.0;
        for (std::size_t i = 0; i < n; ++i) num += z[i] * q(j, i) * q(j, i);
        r.alpha[j] = num / k.dot(q.row(j).data(), q.row(j).data(), n);
        auto next = q.row(j + 1);
        for (std::size_t i = 0; i < n; ++i)
            next[i] = (z[i] - r.alpha[j]) * q(j, i) - r.beta[j] * (j ? q(j - 1, i) : 0.0);
        const double norm = std::sqrt(k.dot(next.data(), next.data(), n));
        require(norm > 1e-12 * std::sqrt(static_cast<double>(n)) * r.q0, ErrorKind::IllConditioned,
                "points cannot resolve degree " + std::to_string(j + 1));
        r.beta[j + 1] = norm;
        r.inv_beta[j + 1] = 1.0 / norm;
        for (double& v : next) v *= r.inv_beta[j + 1];
    }

    // Monomial coefficients of each q_j: c[j][m] multiplies z^m.
    Matrix c(p, p);
    c(0, 0) = r.q0;
    for (std::size_t j = 0; j + 1 < p; ++j)
        for (std::size_t m = 0; m <= j + 1; ++m) {
            const double shifted = m ? c(j, m - 1) : 0.0;
            const double here = m <= j ? c(j, m) : 0.0;
            const double back = j ? c(j - 1, m) : 0.0;
            c(j + 1, m) = (shifted - r.alpha[j] * here - r.beta[j] * back) * r.inv_beta[j + 1];
        }

    // Gram matrix of the sampled recurrence absorbs any loss of orthogonality:
    // coefficients = C^T G^-1 d. Cholesky of G, then solve for each monomial row.
    Matrix g(p, p);
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b <= a; ++b) g(a, b) = g(b, a) = k.dot(q.row(a).data(), q.row(b).data(), n);
    Matrix l(p, p);
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b <= a; ++b) {
            double s = g(a, b);
            for (std::size_t t = 0; t < b; ++t) s -= l(a, t) * l(b, t);
            if (a == b) {
                require(s > 0.0, ErrorKind::IllConditioned, "recurrence Gram matrix not positive");
                l(a, a) = std::sqrt(s);
            } else {
                l(a, b) = s / l(b, b);
            }
        }
    }
    // to_monomial(m, :) = G^-1 C(:, m), as a row.
    r.to_monomial = Matrix(p, p);
    std::vector<double> w(p);
    for (std::size_t m = 0; m < p; ++m) {
        for (std::size_t a = 0; a < p; ++a) {
            double s = c(a, m);
            for (std::size_t t = 0; t < a; ++t) s -= l(a, t) * w[t];
            w[a] = s / l(a, a);
        }
        for (std::size_t a = p; a-- > 0;) {
            double s = w[a];
            for (std::size_t t = a + 1; t < p; ++t) s -= l(t, a) * w[t];
            w[a] = s / l(a, a);
        }
        for (std::size_t a = 0; a < p; ++a) r.to_monomial(m, a) = w[a];
    }
    return r;
}

FitOperator make_fit_operator(const Grid& grid, int degree) {
    const DomainMap map = rescale_domain(grid);
    FitOperator op = compute_fit_operator(build_vandermonde(grid, degree, map));
    op.grid_id = grid_hash(grid, degree);
    op.domain_map = map;
    op.z = normalized_points(grid, map);
    op.recurrence = build_recurrence(op.z, degree);
    return op;
}

PolyCoeffs fit_poly(std::span<const double> values, const FitOperator& fitop) {
    require(values.size() == fitop.samples(), ErrorKind::ShapeMismatch,
            "signal length " + std::to_string(values.size()) + " vs fit operator " +
                std::to_string(fitop.samples()));
    PolyCoeffs out;
    out.coeffs.resize(fitop.pinv.rows);
    out.domain_map = fitop.domain_map;
    const auto& r = fitop.recurrence;
    if (!r.empty()) {
        const std::size_t p = r.alpha.size();
        std::array<double, kMaxDegree + 1> proj{};
        simd::active().project(fitop.z.data(), values.data(), values.size(), r.alpha.data(),
                               r.beta.data(), r.inv_beta.data(), p, r.q0, proj.data());
        simd::active().gemv(r.to_monomial.data.data(), p, p, proj.data(), p, out.coeffs.data());
        return out;
    }
    simd::active().gemv(fitop.pinv.data.data(), fitop.pinv.rows, fitop.pinv.cols, values.data(),
                        values.size(), out.coeffs.data());
    return out;
}

SumuduSpectrum sumudu_forward(const PolyCoeffs& p) {
    check_degree(p.degree());
    const auto& f = factorials();
    SumuduSpectrum s;
    s.domain_map = p.domain_map;
    s.scaled_coeffs.resize(p.coeffs.size());
    for (std::size_t n = 0; n < p.coeffs.size(); ++n) s.scaled_coeffs[n] = f[n] * p.coeffs[n];
    return s;
}

PolyCoeffs sumudu_inverse(const SumuduSpectrum& s) {
    check_degree(s.degree());
    const auto& f = factorials();
    PolyCoeffs p;
    p.domain_map = s.domain_map;
    p.coeffs.resize(s.scaled_coeffs.size());
    for (std::size_t n = 0; n < s.scaled_coeffs.size(); ++n) p.coeffs[n] = s.scaled_coeffs[n] / f[n];
    return p;
}

std::vector<double> horner_eval_normalized(std::span<const double> coeffs,
                                           std::span<const double> z) {
    require(!coeffs.empty(), ErrorKind::ShapeMismatch, "empty coefficient list");
    for (std::size_t i = 0; i < z.size(); ++i)
        require(std::abs(z[i]) <= kExtrapolationMargin, ErrorKind::ExtrapolationOutOfRange,
                "normalized location " + std::to_string(z[i]) + " at index " + std::to_string(i));
    std::vector<double> out(z.size());
    simd::active().horner(coeffs.data(), coeffs.size(), z.data(), out.data(), z.size());
    return out;
}

std::vector<double> horner_eval(const PolyCoeffs& p, const Grid& grid) {
    return horner_eval_normalized(p.coeffs, normalized_points(grid, p.domain_map));
}

std::shared_ptr<const FitOperator> FitOperatorCache::get(const Grid& grid, int degree) {
    const auto key = std::make_pair(grid_hash(grid, degree), degree);
    std::shared_ptr<Entry> entry;
    {
        std::lock_guard lock(mutex_);
        auto [first, last] = entries_.equal_range(key);
        for (auto it = first; it != last; ++it)
            if (it->second->grid == grid) entry = it->second;
        if (!entry) {
            entry = std::make_shared<Entry>(grid);
            entries_.emplace(key, entry);
        }
    }
    std::call_once(entry->once, [&] {
        entry->op = std::make_shared<const FitOperator>(make_fit_operator(entry->grid, degree));
        ++builds_;
    });
    return entry->op;
}

std::size_t FitOperatorCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::size_t FitOperatorCache::builds() const { return builds_.load(); }

FitOperatorCache& global_fit_cache() {
    static FitOperatorCache cache;
    return cache;
}

}  // namespace sno::poly
