#include "sno/model.hpp"

#include "sno/archive.hpp"
#include "sno/error.hpp"
#include "sno/simd/kernels.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace sno::model {

using poly::FitOperator;
using poly::Grid;

namespace {

constexpr int kCheckpointVersion = 1;

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

Tensor uniform_tensor(std::vector<std::size_t> shape, double bound, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.data()) v = dist(rng);
    return t;
}

// Spectral path of one layer: fit on the fit operator's grid, scale, mix per
// mode, unscale, evaluate on z_eval. Returns [b, width, z_eval.size()].
Tensor spectral_path(const Tensor& h, const Tensor& weights, const FitOperator& fitop,
                     std::span<const double> z_eval, Tensor* spectrum_out) {
    const std::size_t batch = h.dim(0), width = h.dim(1), n = h.dim(2);
    const std::size_t p = fitop.pinv.rows;
    require(n == fitop.samples(), ErrorKind::ShapeMismatch,
            "hidden length " + std::to_string(n) + " vs fit operator " +
                std::to_string(fitop.samples()));
    require(weights.numel() == p * width * width, ErrorKind::ShapeMismatch,
            "spectral weights " + nn::shape_string(weights.shape()));
    const auto& k = simd::active();
    const auto& fact = poly::factorials();
    const std::size_t ne = z_eval.size();

    Tensor spectrum({batch, width, p});
    Tensor out({batch, width, ne});
    std::vector<double> coeff(p), mixed(p);
    for (std::size_t b = 0; b < batch; ++b) {
        double* sb = spectrum.ptr() + b * width * p;
        for (std::size_t c = 0; c < width; ++c) {
            double* s = sb + c * p;
            k.gemv(fitop.pinv.data.data(), p, n, h.ptr() + (b * width + c) * n, n, s);
            for (std::size_t m = 0; m < p; ++m) s[m] *= fact[m];
        }
        for (std::size_t o = 0; o < width; ++o) {
            for (std::size_t m = 0; m < p; ++m) {
                const double* w = weights.ptr() + (m * width + o) * width;
                double acc = 0.0;
                for (std::size_t c = 0; c < width; ++c) acc += w[c] * sb[c * p + m];
                mixed[m] = acc;
            }
            for (std::size_t m = 0; m < p; ++m) coeff[m] = mixed[m] / fact[m];
            k.horner(coeff.data(), p, z_eval.data(), out.ptr() + (b * width + o) * ne, ne);
        }
    }
    if (spectrum_out) *spectrum_out = std::move(spectrum);
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    for (std::size_t i = 0; i < a.numel(); ++i) a[i] += b[i];
}

}  // namespace

void ModelConfig::validate() const {
    require(width >= 1, ErrorKind::ConfigError, "width must be >= 1");
    require(n_layers >= 1, ErrorKind::ConfigError, "n_layers must be >= 1");
    require(degree >= 0 && degree <= poly::kMaxDegree, ErrorKind::ConfigError,
            "degree must be in [0, " + std::to_string(poly::kMaxDegree) + "]");
    require(in_channels >= 1 && out_channels >= 1, ErrorKind::ConfigError,
            "channel counts must be >= 1");
}

std::size_t parameter_count(const ModelConfig& c) {
    const std::size_t w = sz(c.width), p = sz(c.degree) + 1;
    const std::size_t lift = w * sz(c.in_channels) + w;
    const std::size_t layer = p * w * w + w * w + w;
    const std::size_t proj = (w * w + w) + (sz(c.out_channels) * w + sz(c.out_channels));
    return lift + sz(c.n_layers) * layer + proj;
}

SNOModel init_model(const ModelConfig& config) {
    config.validate();
    SNOModel m;
    m.config = config;
    std::mt19937_64 rng(config.seed);
    const std::size_t w = sz(config.width), p = sz(config.degree) + 1;
    const double lift_bound = 1.0 / std::sqrt(static_cast<double>(config.in_channels));
    const double hidden_bound = 1.0 / std::sqrt(static_cast<double>(config.width));
    const double spectral_bound = 1.0 / (static_cast<double>(config.width) * static_cast<double>(p));

    m.params.add("lift.weight", uniform_tensor({w, sz(config.in_channels)}, lift_bound, rng));
    m.params.add("lift.bias", uniform_tensor({w}, lift_bound, rng));
    for (int l = 0; l < config.n_layers; ++l) {
        const std::string prefix = "layers." + std::to_string(l) + ".";
        m.params.add(prefix + "spectral", uniform_tensor({p, w, w}, spectral_bound, rng));
        m.params.add(prefix + "bias.weight", uniform_tensor({w, w}, hidden_bound, rng));
        m.params.add(prefix + "bias.bias", uniform_tensor({w}, hidden_bound, rng));
    }
    m.params.add("proj.0.weight", uniform_tensor({w, w}, hidden_bound, rng));
    m.params.add("proj.0.bias", uniform_tensor({w}, hidden_bound, rng));
    m.params.add("proj.1.weight", uniform_tensor({sz(config.out_channels), w}, hidden_bound, rng));
    m.params.add("proj.1.bias", uniform_tensor({sz(config.out_channels)}, hidden_bound, rng));
    return m;
}

Tensor sumudu_layer_forward(const Tensor& h, const Tensor& spectral_weights,
                            const Tensor& bias_weight, const Tensor& bias_bias,
                            const FitOperator& fitop, bool last, LayerTape* tape) {
    require(h.rank() == 3, ErrorKind::ShapeMismatch, "layer input must be [b, width, n]");
    require(!fitop.z.empty(), ErrorKind::ShapeMismatch, "fit operator carries no grid");
    Tensor spectrum;
    Tensor pre = spectral_path(h, spectral_weights, fitop, fitop.z, &spectrum);
    add_inplace(pre, nn::linear(h, bias_weight, bias_bias));
    Tensor out = last ? pre : nn::activation(pre);
    out.check_finite("sumudu layer");
    if (tape) {
        tape->input = h;
        tape->spectrum = std::move(spectrum);
        tape->pre = std::move(pre);
    }
    return out;
}

Tensor forward(const SNOModel& model, const Tensor& x, const Grid& grid, ForwardTape* tape) {
    const auto& cfg = model.config;
    require(x.rank() == 3 && x.dim(1) == sz(cfg.in_channels), ErrorKind::ShapeMismatch,
            "input " + nn::shape_string(x.shape()) + " for a model with " +
                std::to_string(cfg.in_channels) + " input channels");
    require(x.dim(2) == grid.size(), ErrorKind::ShapeMismatch,
            "input length " + std::to_string(x.dim(2)) + " vs grid " + std::to_string(grid.size()));
    auto fitop = poly::global_fit_cache().get(grid, cfg.degree);

    if (tape) {
        *tape = ForwardTape{};
        tape->fitop = fitop;
        tape->x = x;
        tape->layers.resize(sz(cfg.n_layers));
    }
    Tensor h = nn::linear(x, model.lift_weight(), model.lift_bias());
    for (int l = 0; l < cfg.n_layers; ++l)
        h = sumudu_layer_forward(h, model.spectral(l), model.bias_weight(l), model.bias_bias(l),
                                 *fitop, l + 1 == cfg.n_layers,
                                 tape ? &tape->layers[sz(l)] : nullptr);
    Tensor pre = nn::linear(h, model.proj1_weight(), model.proj1_bias());
    Tensor hidden = nn::activation(pre);
    Tensor out = nn::linear(hidden, model.proj2_weight(), model.proj2_bias());
    out.check_finite("projection");
    if (tape) {
        tape->proj_input = std::move(h);
        tape->proj_pre = std::move(pre);
        tape->proj_hidden = std::move(hidden);
        tape->recorded = true;
    }
    return out;
}

void backward(SNOModel& model, const ForwardTape& tape, const Tensor& d_output) {
    require(tape.recorded, ErrorKind::NoTape, "backward called without a recorded forward pass");
    const auto& cfg = model.config;
    const FitOperator& fitop = *tape.fitop;
    const std::size_t batch = tape.x.dim(0), width = sz(cfg.width), n = tape.x.dim(2);
    const std::size_t p = sz(cfg.degree) + 1;
    const auto& k = simd::active();
    const auto& fact = poly::factorials();
    auto& ps = model.params;
    const std::size_t pb = model.proj_base();

    Tensor d_hidden(tape.proj_hidden.shape());
    nn::linear_backward(tape.proj_hidden, model.proj2_weight(), d_output, ps.at(pb + 2).grad,
                        ps.at(pb + 3).grad, &d_hidden);
    Tensor d_pre = nn::activation_backward(tape.proj_pre, d_hidden);
    Tensor d_h(tape.proj_input.shape());
    nn::linear_backward(tape.proj_input, model.proj1_weight(), d_pre, ps.at(pb).grad,
                        ps.at(pb + 1).grad, &d_h);

    std::vector<double> d_mixed(p), d_spec(p);
    for (int l = cfg.n_layers; l-- > 0;) {
        const LayerTape& lt = tape.layers[sz(l)];
        const std::size_t base = SNOModel::layer_base(l);
        const Tensor& weights = model.spectral(l);
        Tensor& d_weights = ps.at(base).grad;

        Tensor d_layer_pre =
            (l + 1 == cfg.n_layers) ? d_h : nn::activation_backward(lt.pre, d_h);
        Tensor d_in(lt.input.shape());
        nn::linear_backward(lt.input, model.bias_weight(l), d_layer_pre, ps.at(base + 1).grad,
                            ps.at(base + 2).grad, &d_in);

        std::vector<double> d_scaled(width * p);
        for (std::size_t b = 0; b < batch; ++b) {
            const double* sb = lt.spectrum.ptr() + b * width * p;
            std::fill(d_scaled.begin(), d_scaled.end(), 0.0);
            for (std::size_t o = 0; o < width; ++o) {
                // d coeff'[m] = <d_pre_o, z^m>, then through the 1/m! unscaling.
                k.gemv(fitop.powers.data.data(), p, n, d_layer_pre.ptr() + (b * width + o) * n, n,
                       d_mixed.data());
                for (std::size_t m = 0; m < p; ++m) {
                    const double g = d_mixed[m] / fact[m];
                    double* dw = d_weights.ptr() + (m * width + o) * width;
                    const double* w = weights.ptr() + (m * width + o) * width;
                    for (std::size_t c = 0; c < width; ++c) {
                        dw[c] += g * sb[c * p + m];
                        d_scaled[c * p + m] += w[c] * g;
                    }
                }
            }
            for (std::size_t c = 0; c < width; ++c) {
                double* dic = d_in.ptr() + (b * width + c) * n;
                for (std::size_t m = 0; m < p; ++m) {
                    const double g = d_scaled[c * p + m] * fact[m];
                    k.axpy(g, fitop.pinv.row(m).data(), dic, n);
                }
            }
        }
        d_h = std::move(d_in);
    }
    nn::linear_backward(tape.x, model.lift_weight(), d_h, ps.at(0).grad, ps.at(1).grad, nullptr);
    ps.mark_grads_ready();
}

Tensor interpolate_last_axis(const Tensor& h, const Grid& from, const Grid& to) {
    require(h.dim(h.rank() - 1) == from.size(), ErrorKind::ShapeMismatch,
            "interpolation source length mismatch");
    const std::size_t n = from.size(), ne = to.size();
    const std::size_t rows = h.numel() / n;
    auto shape = h.shape();
    shape.back() = ne;
    Tensor out(shape);
    std::vector<std::size_t> left(ne);
    std::vector<double> frac(ne);
    auto pts = from.points();
    for (std::size_t j = 0; j < ne; ++j) {
        const double x = to[j];
        auto it = std::upper_bound(pts.begin(), pts.end(), x);
        std::size_t i = it == pts.begin() ? 0 : static_cast<std::size_t>(it - pts.begin()) - 1;
        if (i + 1 >= n) i = n - 2;
        left[j] = i;
        frac[j] = (x - pts[i]) / (pts[i + 1] - pts[i]);
    }
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = h.ptr() + r * n;
        double* dst = out.ptr() + r * ne;
        for (std::size_t j = 0; j < ne; ++j) {
            const double a = src[left[j]], b = src[left[j] + 1];
            dst[j] = frac[j] == 0.0 ? a : a + frac[j] * (b - a);
        }
    }
    return out;
}

Tensor forward_at_resolution(const SNOModel& model, const Tensor& x, const Grid& train_grid,
                             const Grid& eval_grid) {
    if (eval_grid == train_grid) return forward(model, x, train_grid);
    const auto& cfg = model.config;
    require(x.rank() == 3 && x.dim(1) == sz(cfg.in_channels) && x.dim(2) == train_grid.size(),
            ErrorKind::ShapeMismatch, "input " + nn::shape_string(x.shape()) + " vs training grid");
    auto fitop = poly::global_fit_cache().get(train_grid, cfg.degree);
    const auto z_eval = poly::normalized_points(eval_grid, fitop->domain_map);
    for (std::size_t i = 0; i < z_eval.size(); ++i)
        require(std::abs(z_eval[i]) <= poly::kExtrapolationMargin,
                ErrorKind::ExtrapolationOutOfRange,
                "eval point " + std::to_string(eval_grid[i]) + " lies outside the training domain");

    Tensor h = nn::linear(x, model.lift_weight(), model.lift_bias());
    const int last = cfg.n_layers - 1;
    for (int l = 0; l < last; ++l)
        h = sumudu_layer_forward(h, model.spectral(l), model.bias_weight(l), model.bias_bias(l),
                                 *fitop, false);
    Tensor y = spectral_path(h, model.spectral(last), *fitop, z_eval, nullptr);
    add_inplace(y, nn::linear(interpolate_last_axis(h, train_grid, eval_grid),
                              model.bias_weight(last), model.bias_bias(last)));
    Tensor hidden = nn::activation(nn::linear(y, model.proj1_weight(), model.proj1_bias()));
    Tensor out = nn::linear(hidden, model.proj2_weight(), model.proj2_bias());
    out.check_finite("projection");
    return out;
}

void save_checkpoint(const SNOModel& model, const std::filesystem::path& path) {
    std::vector<nn::NamedTensor> entries;
    for (const auto& p : model.params) entries.emplace_back(p.name, p.value);
    if (!model.input_stats.empty()) {
        const std::size_t c = model.input_stats.mean.size();
        entries.emplace_back("buffer.input_mean", Tensor({c}, model.input_stats.mean));
        entries.emplace_back("buffer.input_std", Tensor({c}, model.input_stats.std));
    }
    nlohmann::json side;
    side["format"] = "sno-model";
    side["version"] = kCheckpointVersion;
    const auto& c = model.config;
    side["config"] = {{"width", c.width},
                      {"n_layers", c.n_layers},
                      {"degree", c.degree},
                      {"in_channels", c.in_channels},
                      {"out_channels", c.out_channels},
                      {"seed", c.seed}};
    side["parameter_count"] = parameter_count(c);
    nn::write_archive(path, entries);
    auto sidecar = path;
    sidecar += ".json";
    std::ofstream(sidecar) << side.dump(2) << "\n";
}

SNOModel load_checkpoint(const std::filesystem::path& path) {
    auto sidecar = path;
    sidecar += ".json";
    std::ifstream in(sidecar);
    require(static_cast<bool>(in), ErrorKind::IoError, "missing checkpoint sidecar " + sidecar.string());
    nlohmann::json side;
    try {
        side = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::FormatError, "checkpoint sidecar: " + std::string(e.what()));
    }
    require(side.value("format", "") == "sno-model" && side.value("version", 0) == kCheckpointVersion,
            ErrorKind::FormatError, "unsupported checkpoint sidecar version");
    ModelConfig cfg;
    try {
        const auto& j = side.at("config");
        cfg.width = j.at("width").get<int>();
        cfg.n_layers = j.at("n_layers").get<int>();
        cfg.degree = j.at("degree").get<int>();
        cfg.in_channels = j.at("in_channels").get<int>();
        cfg.out_channels = j.at("out_channels").get<int>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::FormatError, "checkpoint config: " + std::string(e.what()));
    }

    auto entries = nn::read_archive(path);
    SNOModel model = init_model(cfg);
    std::size_t matched = 0;
    for (auto& [name, t] : entries) {
        if (name == "buffer.input_mean") {
            model.input_stats.mean.assign(t.data().begin(), t.data().end());
            continue;
        }
        if (name == "buffer.input_std") {
            model.input_stats.std.assign(t.data().begin(), t.data().end());
            continue;
        }
        require(model.params.contains(name), ErrorKind::FormatError, "unexpected tensor " + name);
        auto& p = model.params.get(name);
        require(p.value.shape() == t.shape(), ErrorKind::FormatError,
                "tensor " + name + " has shape " + nn::shape_string(t.shape()) + ", expected " +
                    nn::shape_string(p.value.shape()));
        p.value = std::move(t);
        ++matched;
    }
    require(matched == model.params.size(), ErrorKind::FormatError, "checkpoint is missing tensors");
    require(model.input_stats.mean.size() == model.input_stats.std.size(), ErrorKind::FormatError,
            "incomplete normalization buffers");
    return model;
}

}  // namespace sno::model
