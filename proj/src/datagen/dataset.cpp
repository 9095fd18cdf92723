#include "sno/archive.hpp"
#include "sno/datagen.hpp"
#include "sno/error.hpp"
#include "sno/hash.hpp"
#include "sno/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <set>

namespace sno::data {

namespace {

constexpr std::string_view kDatasetMagic = "SNODATA";

struct TaskName {
    TaskId id;
    std::string_view name;
};

constexpr TaskName kTaskNames[] = {
    {TaskId::Duffing, "duffing"},     {TaskId::Pendulum, "pendulum"},
    {TaskId::Lorenz, "lorenz"},       {TaskId::Diffusion, "diffusion"},
    {TaskId::Burgers, "burgers"},     {TaskId::DiffusionReaction, "diffusion_reaction"},
};

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Rescales v so that max|v| equals `amplitude` (identity on an all-zero signal).
void rescale_peak(std::vector<double>& v, double amplitude) {
    const double m = max_abs(v);
    if (m > 0.0)
        for (double& x : v) x *= amplitude / m;
}

LorenzState lorenz_initial(std::uint64_t seed, std::uint64_t index, double scale) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      0x4c6fu};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> xy(-5.0 * scale, 5.0 * scale);
    std::uniform_real_distribution<double> z(0.0, 10.0 * scale);
    const double x0 = xy(rng);
    const double y0 = xy(rng);
    return {x0, y0, z(rng)};
}

struct Sample {
    std::vector<double> input;   // [in_ch * n]
    std::vector<double> output;  // [out_ch * n]
};

Sample make_sample(const TaskSpec& spec, const Grid& grid, const std::vector<double>& times,
                   std::uint64_t index) {
    const ForcingSampler sampler{spec.seed, spec.forcing_modes, spec.forcing_scale};
    const std::size_t n = grid.size();
    Sample s;
    switch (spec.task) {
    case TaskId::Duffing:
    case TaskId::Pendulum: {
        const auto modes = sampler.draw(index);
        const double period = spec.duration;
        Forcing f = [&](double t) { return eval_modes(modes, t, period); };
        for (std::size_t i = 0; i < n; ++i) s.input.push_back(f(grid[i]));
        OdeOptions opt;
        opt.substeps = spec.substeps;
        s.output = spec.task == TaskId::Duffing ? solve_duffing(f, spec.damping, grid, opt)
                                                : solve_pendulum(f, spec.damping, grid, opt);
        break;
    }
    case TaskId::Lorenz: {
        const LorenzState init = lorenz_initial(spec.seed, index, spec.forcing_scale);
        for (int d = 0; d < 3; ++d) s.input.insert(s.input.end(), n, init[static_cast<std::size_t>(d)]);
        LorenzParams p;
        p.rho = spec.rho;
        for (const auto& st : solve_lorenz(p, init, grid, spec.substeps)) s.output.push_back(st[0]);
        break;
    }
    case TaskId::Diffusion:
    case TaskId::Burgers:
    case TaskId::DiffusionReaction: {
        std::vector<double> u0 = sampler.sample(grid, index, spec.extent);
        if (spec.task == TaskId::Burgers) {
            rescale_peak(u0, spec.forcing_scale);
        } else if (spec.task == TaskId::DiffusionReaction) {
            rescale_peak(u0, 0.4);
            for (double& v : u0) v += 0.5;
        }
        PdeGrids g;
        g.length = spec.extent;
        g.times = times;
        g.substeps = spec.substeps;
        Field f = spec.task == TaskId::Diffusion ? solve_diffusion(u0, spec.diffusivity, g)
                  : spec.task == TaskId::Burgers
                      ? solve_burgers(u0, spec.viscosity, g)
                      : solve_diffusion_reaction(u0, spec.diffusivity, spec.reaction, g);
        s.input = std::move(u0);
        s.output = std::move(f.data);
        break;
    }
    }
    return s;
}

template <class T>
T field(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ConfigError, std::string("field '") + key + "': " + e.what());
    }
}

nlohmann::json stats_json(const nn::ChannelStats& s) {
    return {{"mean", s.mean}, {"std", s.std}};
}

nn::ChannelStats stats_from_json(const nlohmann::json& j) {
    return {j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
}

}  // namespace

std::string_view to_string(TaskId task) noexcept {
    for (const auto& t : kTaskNames)
        if (t.id == task) return t.name;
    return "unknown";
}

TaskId parse_task(std::string_view name) {
    for (const auto& t : kTaskNames)
        if (t.name == name) return t.id;
    fail(ErrorKind::ConfigError, "unknown task '" + std::string(name) + "'");
}

bool is_pde(TaskId task) noexcept {
    return task == TaskId::Diffusion || task == TaskId::Burgers || task == TaskId::DiffusionReaction;
}

TaskSpec TaskSpec::defaults(TaskId task) {
    TaskSpec s;
    s.task = task;
    switch (task) {
    case TaskId::Duffing:
        s.duration = 10.0;
        s.resolution = 128;
        break;
    case TaskId::Pendulum:
        s.duration = 10.0;
        s.resolution = 128;
        s.forcing_scale = 0.5;
        break;
    case TaskId::Lorenz:
        s.duration = 5.0;
        s.resolution = 128;
        s.rho = 10.0;
        break;
    case TaskId::Diffusion:
        s.diffusivity = 0.003;
        break;
    case TaskId::Burgers:
        s.viscosity = 0.05;
        s.forcing_scale = 0.5;
        break;
    case TaskId::DiffusionReaction:
        s.diffusivity = 0.003;
        s.reaction = 1.0;
        break;
    }
    return s;
}

void TaskSpec::validate() const {
    require(resolution >= 32, ErrorKind::ConfigError, "resolution must be >= 32");
    require(samples >= 1, ErrorKind::ConfigError, "samples must be >= 1");
    require(train_fraction > 0.0 && train_fraction <= 1.0, ErrorKind::ConfigError,
            "train_fraction must be in (0, 1]");
    require(substeps >= 1, ErrorKind::ConfigError, "substeps must be >= 1");
    require(forcing_modes >= 0, ErrorKind::ConfigError, "forcing_modes must be >= 0");
    require(forcing_scale >= 0.0 && std::isfinite(forcing_scale), ErrorKind::ConfigError,
            "forcing_scale must be finite and >= 0");
    require(duration > 0.0 && extent > 0.0, ErrorKind::ConfigError,
            "duration and extent must be positive");
    require(damping >= 0.0, ErrorKind::ConfigError, "damping must be >= 0");
    if (task == TaskId::Lorenz)
        require(rho >= 0.0 && rho <= 30.0, ErrorKind::ConfigError, "rho must be in [0, 30]");
    if (is_pde(task)) {
        require(time_resolution >= 2, ErrorKind::ConfigError, "time_resolution must be >= 2");
        require(diffusivity >= 0.0 && reaction >= 0.0, ErrorKind::ConfigError,
                "diffusivity and reaction must be >= 0");
    }
    if (task == TaskId::Burgers) {
        const double dx = extent / static_cast<double>(resolution);
        require(viscosity >= burgers_min_viscosity(forcing_scale, dx), ErrorKind::ConfigError,
                "viscosity " + std::to_string(viscosity) + " resolves the front with fewer than 4 cells; need >= " +
                    std::to_string(burgers_min_viscosity(forcing_scale, dx)));
    }
}

std::size_t TaskSpec::in_channels() const noexcept { return task == TaskId::Lorenz ? 3 : 1; }

std::size_t TaskSpec::out_channels() const noexcept { return is_pde(task) ? time_resolution : 1; }

std::size_t TaskSpec::train_count() const noexcept {
    const auto n = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(samples) + 0.5));
    return std::clamp<std::size_t>(n, 1, samples);
}

nlohmann::json to_json(const TaskSpec& s) {
    return {{"task", std::string(to_string(s.task))},
            {"damping", s.damping},
            {"rho", s.rho},
            {"diffusivity", s.diffusivity},
            {"viscosity", s.viscosity},
            {"reaction", s.reaction},
            {"duration", s.duration},
            {"extent", s.extent},
            {"resolution", s.resolution},
            {"time_resolution", s.time_resolution},
            {"samples", s.samples},
            {"seed", s.seed},
            {"forcing_modes", s.forcing_modes},
            {"forcing_scale", s.forcing_scale},
            {"substeps", s.substeps},
            {"train_fraction", s.train_fraction}};
}

TaskSpec spec_from_json(const nlohmann::json& j) {
    require(j.is_object(), ErrorKind::ConfigError, "task spec must be an object");
    require(j.contains("task") && j.at("task").is_string(), ErrorKind::ConfigError,
            "task spec needs a 'task' string");
    const auto known = to_json(TaskSpec{});
    for (const auto& [key, _] : j.items())
        require(known.contains(key), ErrorKind::ConfigError, "unknown task spec key '" + key + "'");
    TaskSpec s = TaskSpec::defaults(parse_task(j.at("task").get<std::string>()));
    s.damping = field(j, "damping", s.damping);
    s.rho = field(j, "rho", s.rho);
    s.diffusivity = field(j, "diffusivity", s.diffusivity);
    s.viscosity = field(j, "viscosity", s.viscosity);
    s.reaction = field(j, "reaction", s.reaction);
    s.duration = field(j, "duration", s.duration);
    s.extent = field(j, "extent", s.extent);
    s.resolution = field(j, "resolution", s.resolution);
    s.time_resolution = field(j, "time_resolution", s.time_resolution);
    s.samples = field(j, "samples", s.samples);
    s.seed = field(j, "seed", s.seed);
    s.forcing_modes = field(j, "forcing_modes", s.forcing_modes);
    s.forcing_scale = field(j, "forcing_scale", s.forcing_scale);
    s.substeps = field(j, "substeps", s.substeps);
    s.train_fraction = field(j, "train_fraction", s.train_fraction);
    s.validate();
    return s;
}

Tensor TaskDataset::rows(const Tensor& t, std::size_t begin, std::size_t end) {
    const std::size_t m = t.inner(1);
    auto shape = t.shape();
    shape[0] = end - begin;
    std::vector<double> d(t.data().begin() + static_cast<std::ptrdiff_t>(begin * m),
                          t.data().begin() + static_cast<std::ptrdiff_t>(end * m));
    return Tensor(std::move(shape), std::move(d));
}

Tensor TaskDataset::gather(const Tensor& t, std::span<const std::size_t> idx) {
    const std::size_t m = t.inner(1);
    auto shape = t.shape();
    shape[0] = idx.size();
    Tensor out(shape);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(t.ptr() + idx[i] * m, m, out.ptr() + i * m);
    return out;
}

nn::ChannelStats channel_stats(const Tensor& t, std::size_t n_items) {
    const std::size_t ch = t.dim(1), n = t.inner(2);
    nn::ChannelStats s;
    s.mean.assign(ch, 0.0);
    s.std.assign(ch, 0.0);
    const double count = static_cast<double>(n_items * n);
    for (std::size_t c = 0; c < ch; ++c) {
        double sum = 0.0;
        for (std::size_t b = 0; b < n_items; ++b)
            for (std::size_t i = 0; i < n; ++i) sum += t[(b * ch + c) * n + i];
        const double mean = sum / count;
        double var = 0.0;
        for (std::size_t b = 0; b < n_items; ++b)
            for (std::size_t i = 0; i < n; ++i) {
                const double d = t[(b * ch + c) * n + i] - mean;
                var += d * d;
            }
        s.mean[c] = mean;
        s.std[c] = std::sqrt(var / count);
    }
    return s;
}

TaskDataset build_dataset(const TaskSpec& spec, unsigned threads) {
    spec.validate();
    TaskDataset ds;
    ds.spec = spec;
    const bool pde = is_pde(spec.task);
    const Grid grid = pde ? Grid::periodic(0.0, spec.extent, spec.resolution)
                          : Grid::uniform(0.0, spec.duration, spec.resolution);
    ds.grid_points.assign(grid.points().begin(), grid.points().end());
    if (pde) ds.time_axis = make_pde_grids(spec.extent, spec.duration, spec.time_resolution).times;

    const std::size_t n = spec.resolution, N = spec.samples;
    const std::size_t in_ch = spec.in_channels(), out_ch = spec.out_channels();
    ds.inputs = Tensor({N, in_ch, n});
    ds.outputs = Tensor({N, out_ch, n});
    parallel_for(N, threads, [&](std::size_t i) {
        Sample s;
        try {
            s = make_sample(spec, grid, ds.time_axis, i);
        } catch (const Error& e) {
            throw Error(e.kind(), "sample " + std::to_string(i) + ": " + e.detail());
        }
        std::copy(s.input.begin(), s.input.end(), ds.inputs.ptr() + i * in_ch * n);
        std::copy(s.output.begin(), s.output.end(), ds.outputs.ptr() + i * out_ch * n);
    });
    ds.inputs.check_finite("dataset inputs");
    ds.outputs.check_finite("dataset outputs");
    ds.n_train = spec.train_count();
    ds.input_stats = channel_stats(ds.inputs, ds.n_train);
    ds.output_stats = channel_stats(ds.outputs, ds.n_train);
    return ds;
}

TaskDataset subsample(const TaskDataset& ds, std::size_t stride) {
    require(stride >= 1 && ds.grid_points.size() % stride == 0, ErrorKind::GridIncompatible,
            "stride " + std::to_string(stride) + " does not divide resolution " +
                std::to_string(ds.grid_points.size()));
    if (stride == 1) return ds;
    TaskDataset out = ds;
    const std::size_t n = ds.grid_points.size(), m = n / stride;
    auto pick = [&](const Tensor& t) {
        const std::size_t rows = t.numel() / n;
        auto shape = t.shape();
        shape.back() = m;
        Tensor r(shape);
        for (std::size_t k = 0; k < rows; ++k)
            for (std::size_t i = 0; i < m; ++i) r[k * m + i] = t[k * n + i * stride];
        return r;
    };
    out.inputs = pick(ds.inputs);
    out.outputs = pick(ds.outputs);
    out.grid_points.clear();
    for (std::size_t i = 0; i < n; i += stride) out.grid_points.push_back(ds.grid_points[i]);
    out.spec.resolution = m;
    if (!ds.normalized) out.input_stats = channel_stats(out.inputs, out.n_train);
    out.output_stats = channel_stats(out.outputs, out.n_train);
    return out;
}

std::vector<unsigned char> encode_dataset(const TaskDataset& ds) {
    nlohmann::json h;
    h["format"] = "sno-dataset";
    h["version"] = {{"major", kDatasetMajor}, {"minor", 0}};
    h["spec"] = to_json(ds.spec);
    h["n_train"] = ds.n_train;
    h["normalized"] = ds.normalized;
    h["stats"] = {{"inputs", stats_json(ds.input_stats)}, {"outputs", stats_json(ds.output_stats)}};
    h["payload"] = nlohmann::json::array({
        {{"name", "inputs"}, {"shape", ds.inputs.shape()}},
        {{"name", "outputs"}, {"shape", ds.outputs.shape()}},
        {{"name", "grid"}, {"shape", {ds.grid_points.size()}}},
        {{"name", "time_axis"}, {"shape", {ds.time_axis.size()}}},
    });
    const std::string line1 = std::string(kDatasetMagic) + " " + std::to_string(kDatasetMajor) + "\n";
    const std::string line2 = h.dump() + "\n";
    std::vector<unsigned char> out(line1.begin(), line1.end());
    out.insert(out.end(), line2.begin(), line2.end());
    for (double v : ds.inputs.data()) nn::put_f64(out, v);
    for (double v : ds.outputs.data()) nn::put_f64(out, v);
    for (double v : ds.grid_points) nn::put_f64(out, v);
    for (double v : ds.time_axis) nn::put_f64(out, v);
    nn::put_u64(out, fnv1a(out));
    return out;
}

TaskDataset decode_dataset(const std::vector<unsigned char>& bytes) {
    const auto nl1 = std::find(bytes.begin(), bytes.end(), '\n');
    require(nl1 != bytes.end(), ErrorKind::FormatError, "not a dataset file");
    const std::string line1(bytes.begin(), nl1);
    require(line1.rfind(std::string(kDatasetMagic) + " ", 0) == 0, ErrorKind::FormatError,
            "not a dataset file");
    const int major = std::atoi(line1.c_str() + kDatasetMagic.size() + 1);
    require(major == kDatasetMajor, ErrorKind::FormatError,
            "unsupported dataset version " + std::to_string(major));
    const auto nl2 = std::find(nl1 + 1, bytes.end(), '\n');
    require(nl2 != bytes.end(), ErrorKind::ChecksumError, "dataset header truncated");
    require(bytes.size() >= 8, ErrorKind::ChecksumError, "dataset truncated");
    const std::size_t body = bytes.size() - 8;
    require(fnv1a({bytes.data(), body}) == nn::get_u64(bytes.data() + body),
            ErrorKind::ChecksumError, "dataset checksum mismatch");

    TaskDataset ds;
    std::size_t pos = static_cast<std::size_t>(nl2 - bytes.begin()) + 1;
    try {
        const auto h = nlohmann::json::parse(nl1 + 1, nl2);
        ds.spec = spec_from_json(h.at("spec"));
        ds.n_train = h.at("n_train").get<std::size_t>();
        ds.normalized = h.at("normalized").get<bool>();
        ds.input_stats = stats_from_json(h.at("stats").at("inputs"));
        ds.output_stats = stats_from_json(h.at("stats").at("outputs"));
        for (const auto& entry : h.at("payload")) {
            const auto name = entry.at("name").get<std::string>();
            const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
            std::size_t numel = 1;
            for (auto d : shape) numel *= d;
            require(numel <= (body - pos) / 8, ErrorKind::ChecksumError, "payload truncated");
            std::vector<double> v(numel);
            for (std::size_t i = 0; i < numel; ++i) v[i] = nn::get_f64(bytes.data() + pos + 8 * i);
            pos += 8 * numel;
            if (name == "inputs") ds.inputs = Tensor(shape, std::move(v));
            else if (name == "outputs") ds.outputs = Tensor(shape, std::move(v));
            else if (name == "grid") ds.grid_points = std::move(v);
            else if (name == "time_axis") ds.time_axis = std::move(v);
            else fail(ErrorKind::FormatError, "unknown payload '" + name + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::FormatError, std::string("dataset header: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::ConfigError) throw;
        fail(ErrorKind::FormatError, "dataset header: " + e.detail());
    }
    require(pos == body, ErrorKind::ChecksumError, "dataset payload length mismatch");
    require(ds.inputs.rank() == 3 && ds.outputs.rank() == 3 && ds.inputs.dim(0) == ds.outputs.dim(0) &&
                ds.inputs.dim(2) == ds.grid_points.size() && ds.outputs.dim(2) == ds.grid_points.size() &&
                ds.n_train <= ds.inputs.dim(0),
            ErrorKind::FormatError, "inconsistent dataset shapes");
    return ds;
}

void save_dataset(const TaskDataset& ds, const std::filesystem::path& path) {
    nn::write_file_bytes(path, encode_dataset(ds));
}

TaskDataset load_dataset(const std::filesystem::path& path) {
    return decode_dataset(nn::read_file_bytes(path));
}

}  // namespace sno::data
