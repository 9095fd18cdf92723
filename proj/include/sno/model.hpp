#pragma once

// Sumudu neural operator: pointwise lift L, a stack of Sumudu spectral layers
// (polynomial fit -> factorial scaling -> per-mode channel mixing -> inverse
// scaling -> Horner evaluation, plus a pointwise linear bias path), and a
// two-stage pointwise projection P.

#include "sno/polycore.hpp"
#include "sno/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace sno::model {

using nn::Tensor;

struct ModelConfig {
    int width = 32;
    int n_layers = 4;
    int degree = poly::kDefaultDegree;
    int in_channels = 1;
    int out_channels = 1;
    std::uint64_t seed = 0;

    // ConfigError on any invariant violation.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Trainable value count as a function of the config alone.
std::size_t parameter_count(const ModelConfig& config);

class SNOModel {
public:
    ModelConfig config;
    nn::ParamStore params;
    // Applied by evaluation helpers to physical inputs; forward() never touches it.
    nn::ChannelStats input_stats;

    const Tensor& lift_weight() const { return params.at(0).value; }
    const Tensor& lift_bias() const { return params.at(1).value; }
    // Spectral weights of layer l, shape [degree+1, width, width] indexed [mode][out][in].
    const Tensor& spectral(int l) const { return params.at(layer_base(l)).value; }
    const Tensor& bias_weight(int l) const { return params.at(layer_base(l) + 1).value; }
    const Tensor& bias_bias(int l) const { return params.at(layer_base(l) + 2).value; }
    const Tensor& proj1_weight() const { return params.at(proj_base()).value; }
    const Tensor& proj1_bias() const { return params.at(proj_base() + 1).value; }
    const Tensor& proj2_weight() const { return params.at(proj_base() + 2).value; }
    const Tensor& proj2_bias() const { return params.at(proj_base() + 3).value; }

    static std::size_t layer_base(int l) { return 2 + 3 * static_cast<std::size_t>(l); }
    std::size_t proj_base() const { return layer_base(config.n_layers); }
};

// Spectral weights ~ U(-s, s), s = 1 / (width (degree+1)); linear layers
// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias.
SNOModel init_model(const ModelConfig& config);

struct LayerTape {
    Tensor input;     // [b, width, n]
    Tensor spectrum;  // [b, width, degree+1], factorial-scaled coefficients
    Tensor pre;       // [b, width, n], before the activation
};

struct ForwardTape {
    bool recorded = false;
    std::shared_ptr<const poly::FitOperator> fitop;
    Tensor x;
    std::vector<LayerTape> layers;
    Tensor proj_input;  // output of the last spectral layer
    Tensor proj_pre;  // [b, width, n]
    Tensor proj_hidden;
};

// One spectral layer at the fit operator's own resolution.
Tensor sumudu_layer_forward(const Tensor& h, const Tensor& spectral_weights,
                            const Tensor& bias_weight, const Tensor& bias_bias,
                            const poly::FitOperator& fitop, bool last, LayerTape* tape = nullptr);

// P(layers(L(x))). x is [b, in_channels, n] with n = grid.size().
Tensor forward(const SNOModel& model, const Tensor& x, const poly::Grid& grid,
               ForwardTape* tape = nullptr);

// Accumulates d loss / d params into model.params from a recorded tape.
// NoTape if the tape was never recorded.
void backward(SNOModel& model, const ForwardTape& tape, const Tensor& d_output);

// Zero-shot evaluation on a different output grid over the same physical
// domain. Every layer runs at the training resolution except the last
// spectral layer, whose polynomial is evaluated on eval_grid and whose bias
// path sees the hidden state linearly interpolated onto eval_grid.
Tensor forward_at_resolution(const SNOModel& model, const Tensor& x, const poly::Grid& train_grid,
                             const poly::Grid& eval_grid);

// Linear interpolation of the last axis of h from `from` onto `to`, with
// linear extrapolation past either end.
Tensor interpolate_last_axis(const Tensor& h, const poly::Grid& from, const poly::Grid& to);

// Tensor archive plus "<path>.json" sidecar carrying the config.
void save_checkpoint(const SNOModel& model, const std::filesystem::path& path);
SNOModel load_checkpoint(const std::filesystem::path& path);

}  // namespace sno::model
