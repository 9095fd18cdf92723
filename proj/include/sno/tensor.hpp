#pragma once

// Dense row-major tensors with hand-derived backward passes for the handful
// of operations the operator network needs, plus Adam and the relative-L2 loss.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sno::nn {

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t numel() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    double* ptr() noexcept { return data_.data(); }
    const double* ptr() const noexcept { return data_.data(); }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    void fill(double v);
    // Product of dims from index `from` onward.
    std::size_t inner(std::size_t from) const;

    // Throws NumericalFault naming `where` if any entry is NaN or infinite.
    void check_finite(std::string_view where) const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

// Per-channel affine statistics (z-score).
struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> std;

    bool empty() const noexcept { return mean.empty(); }
    friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

// y[b, o, s] = sum_c W[o, c] x[b, c, s] + bias[o]  (1x1 convolution over s).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Accumulates into d_weight / d_bias, and into *d_x when non-null.
void linear_backward(const Tensor& x, const Tensor& weight, const Tensor& d_y, Tensor& d_weight,
                     Tensor& d_bias, Tensor* d_x);

// sigma(x) = x * Phi(x), Phi the standard normal CDF.
double activation(double x) noexcept;
double activation_grad(double x) noexcept;
Tensor activation(const Tensor& x);
Tensor activation_backward(const Tensor& x, const Tensor& d_y);

struct LossResult {
    double value = 0.0;
    Tensor grad;  // d loss / d pred
};

// Mean over the leading (batch) dimension of ||pred_b - truth_b|| / ||truth_b||.
LossResult rel_l2_loss(const Tensor& pred, const Tensor& truth);

// Per-item relative L2 errors, no gradient.
std::vector<double> rel_l2_per_item(const Tensor& pred, const Tensor& truth);

double sum(const Tensor& x);
// d sum / d x = 1, scaled by upstream and accumulated.
void sum_backward(double upstream, Tensor& d_x);

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    bool grad_ready = false;
};

// Named parameters in insertion order, each with a same-shaped gradient slot.
class ParamStore {
public:
    Param& add(std::string name, Tensor value);

    Param& at(std::size_t i) { return params_.at(i); }
    const Param& at(std::size_t i) const { return params_.at(i); }
    Param& get(std::string_view name);
    const Param& get(std::string_view name) const;
    bool contains(std::string_view name) const;

    std::size_t size() const noexcept { return params_.size(); }
    std::size_t total_values() const noexcept;

    auto begin() noexcept { return params_.begin(); }
    auto end() noexcept { return params_.end(); }
    auto begin() const noexcept { return params_.begin(); }
    auto end() const noexcept { return params_.end(); }

    void zero_grad();
    void mark_grads_ready();

private:
    std::vector<Param> params_;
};

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

AdamState make_adam(const ParamStore& params, double lr);

// Bias-corrected Adam update; zeroes gradients afterwards.
void adam_step(ParamStore& params, AdamState& state);

}  // namespace sno::nn
