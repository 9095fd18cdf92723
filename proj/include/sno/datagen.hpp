#pragma once

// Synthetic benchmark data: forced ODEs integrated with classical RK4 and
// periodic 1D PDEs stepped with Crank-Nicolson diffusion.
//
// Layout conventions
//   ODE tasks  inputs [N, in_ch, n]   outputs [N, 1, n]       grid = time
//   PDE tasks  inputs [N, 1, n_x]     outputs [N, n_t, n_x]   grid = space,
//              output channel j is the field at time_axis[j]

#include "sno/polycore.hpp"
#include "sno/tensor.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sno::data {

using nn::Tensor;
using poly::Grid;

enum class TaskId { Duffing, Pendulum, Lorenz, Diffusion, Burgers, DiffusionReaction };

std::string_view to_string(TaskId task) noexcept;
TaskId parse_task(std::string_view name);
bool is_pde(TaskId task) noexcept;

// Band-limited random sinusoids: f(t) = sum_k a_k sin(2 pi k t / period + phi_k),
// a_k ~ N(0, scale / k), phi_k ~ U[0, 2 pi). Stream derived from (seed, index).
struct ForcingSampler {
    std::uint64_t seed = 0;
    int modes = 5;
    double scale = 1.0;

    struct Mode {
        double amplitude;
        double phase;
    };

    std::vector<Mode> draw(std::uint64_t index) const;
    std::vector<double> sample(const Grid& grid, std::uint64_t index, double period) const;
};

double eval_modes(std::span<const ForcingSampler::Mode> modes, double t, double period) noexcept;

// --- ODE solvers ----------------------------------------------------------

using Forcing = std::function<double(double)>;

struct OdeOptions {
    int substeps = 4;  // RK4 steps per grid interval
    double x0 = 0.0;
    double v0 = 0.0;
};

// x'' + c x' + alpha x + beta x^3 = f(t)
std::vector<double> solve_duffing(const Forcing& forcing, double c, const Grid& grid,
                                  const OdeOptions& opt = {}, double alpha = 1.0,
                                  double beta = 1.0);

// theta'' + c theta' + sin(theta) = f(t)
std::vector<double> solve_pendulum(const Forcing& forcing, double c, const Grid& grid,
                                   const OdeOptions& opt = {});

struct LorenzParams {
    double sigma = 10.0;
    double rho = 10.0;
    double beta = 8.0 / 3.0;
};

using LorenzState = std::array<double, 3>;

LorenzState lorenz_rhs(const LorenzParams& p, const LorenzState& s) noexcept;

std::vector<LorenzState> solve_lorenz(const LorenzParams& params, const LorenzState& initial,
                                      const Grid& grid, int substeps = 4);

// --- PDE solvers ----------------------------------------------------------

// Field sampled on a periodic space grid at each output time; data[t * nx + x].
struct Field {
    std::size_t nx = 0;
    std::size_t nt = 0;
    std::vector<double> data;

    double at(std::size_t x, std::size_t t) const { return data[t * nx + x]; }
    std::span<const double> slice(std::size_t t) const { return {data.data() + t * nx, nx}; }
};

struct PdeGrids {
    double length = 1.0;            // periodic domain [0, length)
    std::vector<double> times;      // uniformly spaced output times, times[0] = 0
    int substeps = 4;               // time steps per output interval
    bool adapt_substeps = true;     // Burgers only: raise substeps to keep CFL <= 0.5
};

PdeGrids make_pde_grids(double length, double duration, std::size_t nt, int substeps = 4);

// u_t = k u_xx, Crank-Nicolson, second-order central differences.
Field solve_diffusion(std::span<const double> u0, double k, const PdeGrids& grids);

// u_t + (u^2/2)_x = nu u_xx. Godunov-upwinded explicit advection, implicit CN
// diffusion. CFLViolation if dt max|u| / dx > 1 at any step.
Field solve_burgers(std::span<const double> u0, double nu, const PdeGrids& grids);

// Smallest viscosity for which a front of height 2 max|u0| spans at least four cells.
double burgers_min_viscosity(double max_abs_u0, double dx) noexcept;

// u_t = k u_xx + r u (1 - u), Strang splitting: exact logistic half steps around a CN step.
Field solve_diffusion_reaction(std::span<const double> u0, double k, double r,
                               const PdeGrids& grids);

// Exact logistic flow u' = r u (1 - u) over time t.
double logistic_flow(double u0, double r, double t) noexcept;

// --- Datasets -------------------------------------------------------------

struct TaskSpec {
    TaskId task = TaskId::Diffusion;
    double damping = 0.0;        // c (Duffing, pendulum)
    double rho = 10.0;           // Lorenz
    double diffusivity = 0.003;  // k (diffusion, diffusion-reaction)
    double viscosity = 0.05;     // nu (Burgers)
    double reaction = 1.0;       // r (diffusion-reaction)
    double duration = 1.0;
    double extent = 1.0;         // PDE domain length
    std::size_t resolution = 64;       // points on the grid axis
    std::size_t time_resolution = 64;  // PDE output channels
    std::size_t samples = 100;
    std::uint64_t seed = 0;
    int forcing_modes = 5;
    double forcing_scale = 1.0;
    int substeps = 4;
    double train_fraction = 0.8;

    static TaskSpec defaults(TaskId task);
    // ConfigError outside the documented envelope.
    void validate() const;

    std::size_t in_channels() const noexcept;
    std::size_t out_channels() const noexcept;
    std::size_t train_count() const noexcept;
};

nlohmann::json to_json(const TaskSpec& spec);
// Missing keys take the task's defaults; ConfigError on unknown keys or bad values.
TaskSpec spec_from_json(const nlohmann::json& j);

struct TaskDataset {
    TaskSpec spec;
    Tensor inputs;
    Tensor outputs;
    std::vector<double> grid_points;
    std::vector<double> time_axis;  // PDE output channel times; empty for ODEs
    nn::ChannelStats input_stats;   // training split only
    nn::ChannelStats output_stats;
    std::size_t n_train = 0;
    bool normalized = false;

    Grid grid() const { return Grid(grid_points); }
    std::size_t size() const { return inputs.dim(0); }
    std::size_t n_test() const { return size() - n_train; }

    // Rows [begin, end) of a [N, ...] tensor.
    static Tensor rows(const Tensor& t, std::size_t begin, std::size_t end);
    static Tensor gather(const Tensor& t, std::span<const std::size_t> idx);
};

// Per-channel population mean/std over items [0, n_items) and all grid points.
nn::ChannelStats channel_stats(const Tensor& t, std::size_t n_items);

// N solves, the first train_fraction of them forming the training split.
// A solver failure is rethrown as SolverDiverged/CFLViolation naming the sample index.
TaskDataset build_dataset(const TaskSpec& spec, unsigned threads = 1);

// Keeps every stride-th grid point (the TaskSpec resolution is updated).
TaskDataset subsample(const TaskDataset& ds, std::size_t stride);

// "SNODATA <major>\n", one-line JSON header, then little-endian f64 payloads
// (inputs, outputs, grid, time_axis) and a u64 FNV-1a trailer.
inline constexpr int kDatasetMajor = 1;
std::vector<unsigned char> encode_dataset(const TaskDataset& ds);
TaskDataset decode_dataset(const std::vector<unsigned char>& bytes);
void save_dataset(const TaskDataset& ds, const std::filesystem::path& path);
TaskDataset load_dataset(const std::filesystem::path& path);

}  // namespace sno::data
