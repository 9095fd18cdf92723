#include "helpers.hpp"

#include "sno/tensor.hpp"

#include <cmath>
#include <functional>

using namespace sno;
using namespace sno::nn;
using testing::rand_tensor;

namespace {

// Central difference of f with respect to every entry of t.
std::vector<double> central_diff(Tensor& t, const std::function<double()>& f, double h = 1e-5) {
    std::vector<double> g(t.numel());
    for (std::size_t i = 0; i < t.numel(); ++i) {
        const double keep = t[i];
        t[i] = keep + h;
        const double up = f();
        t[i] = keep - h;
        const double down = f();
        t[i] = keep;
        g[i] = (up - down) / (2 * h);
    }
    return g;
}

void check_close(std::span<const double> got, std::span<const double> want, double rel, double abs) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double tol = std::max(rel * std::abs(want[i]), abs);
        CHECK_MESSAGE(std::abs(got[i] - want[i]) <= tol, i << ": " << got[i] << " vs " << want[i]);
    }
}

// Dot of an upstream seed with the output, so a scalar objective exercises every output.
double weighted(const Tensor& y, const Tensor& seed) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) s += y[i] * seed[i];
    return s;
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("construction and finiteness") {
    CHECK_KIND(Tensor({2, 3}, std::vector<double>(5)), ErrorKind::ShapeMismatch);
    Tensor t({2, 3}, 1.5);
    CHECK(t.numel() == 6);
    CHECK(t.inner(1) == 3);
    CHECK_NOTHROW(t.check_finite("t"));
    t[4] = std::nan("");
    CHECK_KIND(t.check_finite("t"), ErrorKind::NumericalFault);
    t[4] = INFINITY;
    CHECK_KIND(t.check_finite("t"), ErrorKind::NumericalFault);
}

TEST_CASE("linear examples") {
    const auto x = rand_tensor({3, 4, 7}, 1);
    Tensor eye({4, 4});
    for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
    CHECK(linear(x, eye, Tensor({4})) == x);

    const auto y = linear(Tensor({2, 2, 5}, 1.0), Tensor({1, 2}, 1.0), Tensor({1}, std::vector<double>{3.0}));
    CHECK(y.shape() == std::vector<std::size_t>{2, 1, 5});
    for (double v : y.data()) CHECK(v == 5.0);

    CHECK_KIND(linear(x, Tensor({4, 3}), Tensor({4})), ErrorKind::ShapeMismatch);
    CHECK_KIND(linear(x, eye, Tensor({3})), ErrorKind::ShapeMismatch);
}

TEST_CASE("linear gradients match central differences") {
    auto x = rand_tensor({2, 3, 5}, 2);
    auto w = rand_tensor({4, 3}, 3);
    auto b = rand_tensor({4}, 4);
    const auto seed = rand_tensor({2, 4, 5}, 5);
    auto f = [&] { return weighted(linear(x, w, b), seed); };
    Tensor dw({4, 3}), db({4}), dx({2, 3, 5});
    linear_backward(x, w, seed, dw, db, &dx);
    check_close(dw.data(), central_diff(w, f), 0.0, 1e-6);
    check_close(db.data(), central_diff(b, f), 0.0, 1e-6);
    check_close(dx.data(), central_diff(x, f), 0.0, 1e-6);

    // Accumulation: a second call doubles the gradients.
    const auto once = dw;
    linear_backward(x, w, seed, dw, db, nullptr);
    for (std::size_t i = 0; i < dw.numel(); ++i) CHECK(dw[i] == doctest::Approx(2 * once[i]).epsilon(1e-14));
}

TEST_CASE("activation examples") {
    CHECK(activation(0.0) == 0.0);
    CHECK(activation(10.0) > 9.99);
    CHECK(activation(10.0) <= 10.0);
    // x Phi(x) with Phi via erfc, evaluated independently.
    for (double x : {-3.0, -0.7, 0.2, 1.9}) {
        const double phi = 0.5 * std::erfc(-x / std::sqrt(2.0));
        CHECK(activation(x) == doctest::Approx(x * phi).epsilon(1e-14));
    }
    CHECK(activation(-40.0) == doctest::Approx(0.0));
}

TEST_CASE("activation gradient matches central differences at 100 points") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-6.0, 6.0);
    for (int i = 0; i < 100; ++i) {
        const double x = u(rng), h = 1e-5;
        const double fd = (activation(x + h) - activation(x - h)) / (2 * h);
        CHECK(std::abs(activation_grad(x) - fd) <= 1e-6);
    }
    auto x = rand_tensor({2, 3, 4}, 6, 2.0);
    const auto seed = rand_tensor({2, 3, 4}, 7);
    const auto dx = activation_backward(x, seed);
    check_close(dx.data(), central_diff(x, [&] { return weighted(activation(x), seed); }), 1e-4, 1e-7);
}

TEST_CASE("rel_l2_loss examples") {
    const auto truth = rand_tensor({4, 2, 9}, 10);
    CHECK(rel_l2_loss(truth, truth).value == 0.0);
    Tensor twice = truth;
    for (double& v : twice.data()) v *= 2;
    CHECK(rel_l2_loss(twice, truth).value == 1.0);

    // Direct-norm oracle for a one-hot perturbation of size ||truth_b|| in item 0.
    Tensor pert = truth;
    double n0 = 0.0;
    for (std::size_t i = 0; i < 18; ++i) n0 += truth[i] * truth[i];
    n0 = std::sqrt(n0);
    pert[5] += n0;
    CHECK(rel_l2_loss(pert, truth).value == doctest::Approx(0.25).epsilon(1e-14));

    Tensor zeroed = truth;
    for (std::size_t i = 18; i < 36; ++i) zeroed[i] = 0.0;
    CHECK_KIND(rel_l2_loss(truth, zeroed), ErrorKind::ZeroTarget);
    CHECK_KIND(rel_l2_loss(truth, Tensor({4, 2, 8})), ErrorKind::ShapeMismatch);
}

TEST_CASE("rel_l2_loss is |alpha - 1| under scaling") {
    const auto truth = rand_tensor({3, 1, 20}, 11);
    for (double a : {-2.5, 0.0, 0.3, 1.0, 1.7, 10.0}) {
        Tensor p = truth;
        for (double& v : p.data()) v *= a;
        CHECK(rel_l2_loss(p, truth).value == doctest::Approx(std::abs(a - 1)).epsilon(1e-14));
    }
}

TEST_CASE("rel_l2_loss gradient and per-item values") {
    auto pred = rand_tensor({3, 2, 6}, 12);
    const auto truth = rand_tensor({3, 2, 6}, 13);
    const auto r = rel_l2_loss(pred, truth);
    check_close(r.grad.data(), central_diff(pred, [&] { return rel_l2_loss(pred, truth).value; }), 1e-4, 1e-7);
    const auto items = rel_l2_per_item(pred, truth);
    REQUIRE(items.size() == 3);
    CHECK((items[0] + items[1] + items[2]) / 3 == doctest::Approx(r.value).epsilon(1e-15));
}

TEST_CASE("sum gradients are exactly one") {
    ParamStore ps;
    ps.add("a", rand_tensor({3, 2}, 1));
    ps.add("b", rand_tensor({5}, 2));
    for (auto& p : ps) sum_backward(1.0, p.grad);
    for (const auto& p : ps)
        for (double g : p.grad.data()) CHECK(g == 1.0);
    CHECK(sum(Tensor({2, 2}, 0.25)) == 1.0);
}

TEST_CASE("param store") {
    ParamStore ps;
    ps.add("w", Tensor({2, 2}, 1.0));
    CHECK_KIND(ps.add("w", Tensor({1})), ErrorKind::ConfigError);
    CHECK(ps.contains("w"));
    CHECK(!ps.contains("v"));
    CHECK(ps.get("w").grad.shape() == ps.get("w").value.shape());
    CHECK(ps.total_values() == 4);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    ParamStore ps;
    const auto init = rand_tensor({4}, 3);
    ps.add("w", init);
    auto st = make_adam(ps, 1e-3);
    ps.mark_grads_ready();
    adam_step(ps, st);
    CHECK(st.step == 1);
    CHECK(ps.get("w").value == init);
}

TEST_CASE("adam: first step is about -lr for any gradient magnitude") {
    for (double g : {1e-6, 0.3, 1.0, 250.0}) {
        ParamStore ps;
        ps.add("w", Tensor({1}, 2.0));
        auto st = make_adam(ps, 1e-3);
        ps.get("w").grad[0] = g;
        ps.mark_grads_ready();
        adam_step(ps, st);
        // m_hat = g, v_hat = g^2  =>  step = lr * g / (|g| + eps).
        const double want = 2.0 - 1e-3 * g / (g + 1e-8);
        CHECK(ps.get("w").value[0] == doctest::Approx(want).epsilon(1e-15));
        CHECK(std::abs(ps.get("w").value[0] - (2.0 - 1e-3)) < 1e-3 * 1e-2);
        CHECK(ps.get("w").grad[0] == 0.0);
    }
}

TEST_CASE("adam: quadratic bowl converges") {
    ParamStore ps;
    ps.add("w", Tensor({1}, 1.0));
    auto st = make_adam(ps, 1e-2);
    for (int i = 0; i < 500; ++i) {
        ps.get("w").grad[0] = 2 * ps.get("w").value[0];
        ps.mark_grads_ready();
        adam_step(ps, st);
    }
    CHECK(std::abs(ps.get("w").value[0]) < 1e-2);
}

TEST_CASE("adam: missing gradient") {
    ParamStore ps;
    ps.add("w", Tensor({1}, 1.0));
    auto st = make_adam(ps, 1e-3);
    CHECK_KIND(adam_step(ps, st), ErrorKind::GradientMissing);
}

TEST_CASE("adam: identical runs are bitwise identical") {
    auto run = [] {
        ParamStore ps;
        ps.add("w", rand_tensor({8}, 4));
        auto st = make_adam(ps, 1e-2);
        for (int i = 0; i < 50; ++i) {
            auto& p = ps.get("w");
            for (std::size_t j = 0; j < 8; ++j) p.grad[j] = std::sin(p.value[j] * (j + 1));
            ps.mark_grads_ready();
            adam_step(ps, st);
        }
        return ps.get("w").value;
    };
    CHECK(run() == run());
}

}  // TEST_SUITE
