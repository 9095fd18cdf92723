#include "sno/tensor.hpp"

#include "sno/error.hpp"
#include "sno/simd/kernels.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace sno::nn {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    require(data_.size() == product(shape_), ErrorKind::ShapeMismatch,
            "data length " + std::to_string(data_.size()) + " for shape " + shape_string(shape_));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::size_t Tensor::inner(std::size_t from) const {
    std::size_t p = 1;
    for (std::size_t i = from; i < shape_.size(); ++i) p *= shape_[i];
    return p;
}

void Tensor::check_finite(std::string_view where) const {
    for (std::size_t i = 0; i < data_.size(); ++i)
        if (!std::isfinite(data_[i]))
            fail(ErrorKind::NumericalFault,
                 std::string(where) + ": non-finite value at flat index " + std::to_string(i));
}

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require(x.rank() >= 2 && weight.rank() == 2 && bias.rank() == 1, ErrorKind::ShapeMismatch,
            "linear expects x [b, c, ...], W [out, in], bias [out]");
    const std::size_t batch = x.dim(0), cin = x.dim(1), cout = weight.dim(0);
    require(weight.dim(1) == cin && bias.dim(0) == cout, ErrorKind::ShapeMismatch,
            "linear: x " + shape_string(x.shape()) + ", W " + shape_string(weight.shape()) +
                ", bias " + shape_string(bias.shape()));
    const std::size_t s = x.inner(2);
    auto shape = x.shape();
    shape[1] = cout;
    Tensor y(shape);
    const auto& k = simd::active();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xb = x.ptr() + b * cin * s;
        double* yb = y.ptr() + b * cout * s;
        for (std::size_t o = 0; o < cout; ++o) {
            double* yo = yb + o * s;
            std::fill(yo, yo + s, bias[o]);
            for (std::size_t c = 0; c < cin; ++c) k.axpy(weight[o * cin + c], xb + c * s, yo, s);
        }
    }
    return y;
}

void linear_backward(const Tensor& x, const Tensor& weight, const Tensor& d_y, Tensor& d_weight,
                     Tensor& d_bias, Tensor* d_x) {
    const std::size_t batch = x.dim(0), cin = x.dim(1), cout = weight.dim(0);
    const std::size_t s = x.inner(2);
    require(d_y.numel() == batch * cout * s, ErrorKind::ShapeMismatch, "linear_backward: d_y shape");
    const auto& k = simd::active();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xb = x.ptr() + b * cin * s;
        const double* gb = d_y.ptr() + b * cout * s;
        double* dxb = d_x ? d_x->ptr() + b * cin * s : nullptr;
        for (std::size_t o = 0; o < cout; ++o) {
            const double* go = gb + o * s;
            double bsum = 0.0;
            for (std::size_t i = 0; i < s; ++i) bsum += go[i];
            d_bias[o] += bsum;
            for (std::size_t c = 0; c < cin; ++c) {
                d_weight[o * cin + c] += k.dot(go, xb + c * s, s);
                if (dxb) k.axpy(weight[o * cin + c], go, dxb + c * s, s);
            }
        }
    }
}

double activation(double x) noexcept { return x * 0.5 * (1.0 + std::erf(x * kInvSqrt2)); }

double activation_grad(double x) noexcept {
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

Tensor activation(const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = activation(x[i]);
    return y;
}

Tensor activation_backward(const Tensor& x, const Tensor& d_y) {
    require(x.shape() == d_y.shape(), ErrorKind::ShapeMismatch, "activation_backward shapes");
    Tensor d_x(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) d_x[i] = d_y[i] * activation_grad(x[i]);
    return d_x;
}

LossResult rel_l2_loss(const Tensor& pred, const Tensor& truth) {
    require(pred.shape() == truth.shape() && pred.rank() >= 1, ErrorKind::ShapeMismatch,
            "rel_l2_loss: pred " + shape_string(pred.shape()) + " vs truth " +
                shape_string(truth.shape()));
    const std::size_t batch = pred.dim(0);
    const std::size_t m = pred.inner(1);
    LossResult out;
    out.grad = Tensor(pred.shape());
    const auto& k = simd::active();
    std::vector<double> diff(m);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* p = pred.ptr() + b * m;
        const double* t = truth.ptr() + b * m;
        const double tn = std::sqrt(k.dot(t, t, m));
        require(tn > 0.0, ErrorKind::ZeroTarget, "target item " + std::to_string(b) + " has zero norm");
        for (std::size_t i = 0; i < m; ++i) diff[i] = p[i] - t[i];
        const double r = std::sqrt(k.dot(diff.data(), diff.data(), m));
        out.value += r / tn;
        if (r > 0.0) {
            const double scale = 1.0 / (r * tn * static_cast<double>(batch));
            double* g = out.grad.ptr() + b * m;
            for (std::size_t i = 0; i < m; ++i) g[i] = diff[i] * scale;
        }
    }
    out.value /= static_cast<double>(batch);
    if (!std::isfinite(out.value)) fail(ErrorKind::NumericalFault, "non-finite loss");
    return out;
}

std::vector<double> rel_l2_per_item(const Tensor& pred, const Tensor& truth) {
    require(pred.shape() == truth.shape() && pred.rank() >= 1, ErrorKind::ShapeMismatch,
            "rel_l2_per_item: pred " + shape_string(pred.shape()) + " vs truth " +
                shape_string(truth.shape()));
    const std::size_t batch = pred.dim(0);
    const std::size_t m = pred.inner(1);
    std::vector<double> errs(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double t = truth[b * m + i];
            const double d = pred[b * m + i] - t;
            num += d * d;
            den += t * t;
        }
        require(den > 0.0, ErrorKind::ZeroTarget, "target item " + std::to_string(b) + " has zero norm");
        errs[b] = std::sqrt(num) / std::sqrt(den);
    }
    return errs;
}

double sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    return s;
}

void sum_backward(double upstream, Tensor& d_x) {
    for (double& g : d_x.data()) g += upstream;
}

Param& ParamStore::add(std::string name, Tensor value) {
    require(!contains(name), ErrorKind::ConfigError, "duplicate parameter name " + name);
    Param p;
    p.name = std::move(name);
    p.grad = Tensor(value.shape());
    p.value = std::move(value);
    params_.push_back(std::move(p));
    return params_.back();
}

Param& ParamStore::get(std::string_view name) {
    for (auto& p : params_)
        if (p.name == name) return p;
    fail(ErrorKind::ConfigError, "no parameter named " + std::string(name));
}

const Param& ParamStore::get(std::string_view name) const {
    for (const auto& p : params_)
        if (p.name == name) return p;
    fail(ErrorKind::ConfigError, "no parameter named " + std::string(name));
}

bool ParamStore::contains(std::string_view name) const {
    for (const auto& p : params_)
        if (p.name == name) return true;
    return false;
}

std::size_t ParamStore::total_values() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) {
        p.grad.fill(0.0);
        p.grad_ready = false;
    }
}

void ParamStore::mark_grads_ready() {
    for (auto& p : params_) p.grad_ready = true;
}

AdamState make_adam(const ParamStore& params, double lr) {
    require(lr > 0.0, ErrorKind::ConfigError, "learning rate must be positive");
    AdamState s;
    s.lr = lr;
    for (const auto& p : params) {
        s.m.emplace_back(p.value.shape());
        s.v.emplace_back(p.value.shape());
    }
    return s;
}

void adam_step(ParamStore& params, AdamState& state) {
    require(state.m.size() == params.size(), ErrorKind::ShapeMismatch,
            "Adam state does not match parameter store");
    for (const auto& p : params)
        require(p.grad_ready, ErrorKind::GradientMissing, "no gradient for " + p.name);
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t j = 0; j < params.size(); ++j) {
        Param& p = params.at(j);
        Tensor& m = state.m[j];
        Tensor& v = state.v[j];
        for (std::size_t i = 0; i < p.value.numel(); ++i) {
            const double g = p.grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
    params.zero_grad();
}

}  // namespace sno::nn
