#pragma once

// Polynomial regression on a sample grid and the factorial-scaled Sumudu map.
//
// A signal sampled on a Grid is fitted in the monomial basis of the grid
// rescaled to [-1, 1]. On a power series the Sumudu transform multiplies the
// n-th coefficient by n!, so the forward/inverse transforms act directly on
// the fitted coefficients.

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace sno::poly {

inline constexpr int kMaxDegree = 20;
inline constexpr int kDefaultDegree = 16;
// Horner evaluation accepts normalized locations in [-margin, margin].
inline constexpr double kExtrapolationMargin = 1.05;
// compute_fit_operator rejects systems whose pivoted-QR condition estimate exceeds this.
inline constexpr double kMaxCondition = 1e12;

// Strictly increasing, finite sample locations; at least two points.
class Grid {
public:
    explicit Grid(std::vector<double> points);

    // n points from lo to hi, both endpoints included.
    static Grid uniform(double lo, double hi, std::size_t n);
    // n points lo + i * length / n, i < n (the right end of a periodic cell is excluded).
    static Grid periodic(double lo, double length, std::size_t n);

    std::span<const double> points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    double front() const noexcept { return points_.front(); }
    double back() const noexcept { return points_.back(); }
    double operator[](std::size_t i) const noexcept { return points_[i]; }

    // Every stride-th point starting at 0.
    Grid subsample(std::size_t stride) const;

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::vector<double> points_;
};

// Affine map sending [lo, lo + width] onto [-1, 1]. apply() is evaluated as
// 2 (x - lo) / width - 1 so the two endpoints land on exactly -1 and +1.
struct DomainMap {
    double scale = 1.0;
    double shift = 0.0;
    double lo = -1.0;
    double width = 2.0;

    double apply(double x) const noexcept { return 2.0 * (x - lo) / width - 1.0; }

    friend bool operator==(const DomainMap&, const DomainMap&) = default;
};

DomainMap rescale_domain(const Grid& grid);

std::vector<double> normalized_points(const Grid& grid, const DomainMap& map);

// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
};

struct PolyCoeffs {
    std::vector<double> coeffs;  // a_0 .. a_d on the normalized domain
    DomainMap domain_map;

    int degree() const noexcept { return static_cast<int>(coeffs.size()) - 1; }
};

struct SumuduSpectrum {
    std::vector<double> scaled_coeffs;  // n! * a_n
    DomainMap domain_map;

    int degree() const noexcept { return static_cast<int>(scaled_coeffs.size()) - 1; }
};

// Grid-orthonormal polynomials q_k from the three-term (Stieltjes) recurrence
// over the normalized sample locations. Coefficients of the fit are
// to_monomial * [sum_i q_k(z_i) y_i]_k, which needs no n-length storage.
struct OrthoRecurrence {
    std::vector<double> alpha;
    std::vector<double> beta;      // beta[0] = 0
    std::vector<double> inv_beta;  // 1 / beta[k], inv_beta[0] unused
    double q0 = 0.0;
    Matrix to_monomial;  // (d+1) x (d+1)

    bool empty() const noexcept { return alpha.empty(); }
};

struct FitOperator {
    std::uint64_t grid_id = 0;  // hash of (grid, degree); 0 when built from a bare matrix
    int degree = 0;
    DomainMap domain_map;
    std::vector<double> z;  // normalized sample locations (empty when built from a bare matrix)
    Matrix vandermonde;     // n x (d+1)
    Matrix pinv;            // (d+1) x n
    Matrix powers;          // (d+1) x n, transpose of the Vandermonde matrix
    double condition_estimate = 1.0;
    OrthoRecurrence recurrence;  // empty when built from a bare matrix

    std::size_t samples() const noexcept { return vandermonde.rows; }
};

// n! for n <= 20 by repeated multiplication; all exact in double.
const std::array<double, kMaxDegree + 1>& factorials() noexcept;

// Rows [1, z, ..., z^d] for already-normalized locations. Only the degree cap is checked.
Matrix vandermonde_rows(std::span<const double> z, int degree);

Matrix build_vandermonde(const Grid& grid, int degree, const DomainMap& map);

// Moore-Penrose pseudoinverse of a full-column-rank V via Householder QR with
// column pivoting: V P = Q R, V+ = P R^-1 Q^T.
FitOperator compute_fit_operator(const Matrix& vandermonde);

// Recurrence for `degree` over locations z; IllConditioned if the points
// cannot support that many orthogonal polynomials.
OrthoRecurrence build_recurrence(std::span<const double> z, int degree);

// rescale_domain + build_vandermonde + compute_fit_operator + build_recurrence.
FitOperator make_fit_operator(const Grid& grid, int degree);

std::uint64_t grid_hash(const Grid& grid, int degree);

// Least-squares coefficients. Streams through the recurrence when present,
// otherwise applies the stored pseudoinverse.
PolyCoeffs fit_poly(std::span<const double> values, const FitOperator& fitop);

SumuduSpectrum sumudu_forward(const PolyCoeffs& p);
PolyCoeffs sumudu_inverse(const SumuduSpectrum& s);

std::vector<double> horner_eval(const PolyCoeffs& p, const Grid& grid);
// Same, on already-normalized locations.
std::vector<double> horner_eval_normalized(std::span<const double> coeffs,
                                           std::span<const double> z);

// Thread-safe cache of fit operators keyed by (grid, degree). Concurrent
// requests for the same key build the operator once.
class FitOperatorCache {
public:
    std::shared_ptr<const FitOperator> get(const Grid& grid, int degree);
    std::size_t size() const;
    std::size_t builds() const;

private:
    struct Entry {
        Grid grid;
        std::once_flag once;
        std::shared_ptr<const FitOperator> op;
        explicit Entry(Grid g) : grid(std::move(g)) {}
    };
    mutable std::mutex mutex_;
    std::multimap<std::pair<std::uint64_t, int>, std::shared_ptr<Entry>> entries_;
    std::atomic<std::size_t> builds_{0};
};

FitOperatorCache& global_fit_cache();

}  // namespace sno::poly
