#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "srgan/autodiff.hpp"
#include "srgan/models.hpp"

using namespace srgan;
using oracle::random_tensor;

namespace {

// Values bounded away from zero so |.| and leaky ReLU kinks sit outside the
// finite-difference stencil.
Tensor away_from_zero(std::mt19937_64& rng, std::size_t r, std::size_t c) {
    std::uniform_real_distribution<double> mag(0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    Tensor t(r, c);
    for (double& v : t.values()) v = sign(rng) ? mag(rng) : -mag(rng);
    return t;
}

// Every primitive instance here is built away from kinks, so none may be rejected.
double checked(const oracle::GraphFn& build, const std::vector<Tensor>& params) {
    const std::optional<double> err = oracle::gradient_check(build, params);
    REQUIRE(err.has_value());
    return *err;
}

}  // namespace

TEST_CASE("forward primitive examples") {
    Tape t;
    CHECK(matmul(t.constant(Tensor::from({{1, 2}})), t.constant(Tensor::from({{3}, {4}}))).value() ==
          Tensor::from({{11}}));
    CHECK(log1p_abs(t.constant(Tensor::from({{0}}))).value() == Tensor::from({{0}}));
    CHECK(mean_rows(t.constant(Tensor::from({{1, 3}, {3, 5}}))).value() == Tensor::from({{2, 4}}));
    CHECK(sqrt_shift(t.constant(Tensor::from({{-3}}))).value() == Tensor::from({{2}}));
    CHECK(leaky_relu(t.constant(Tensor::from({{-2, 2}})), 0.1).value() == Tensor::from({{-0.2, 2}}));
    CHECK(sub(t.constant(Tensor::from({{5}})), t.constant(Tensor::from({{7}}))).value() == Tensor::from({{-2}}));
    CHECK(add_bias(t.constant(Tensor::from({{1, 2}, {3, 4}})), t.constant(Tensor::from({{10, 20}}))).value() ==
          Tensor::from({{11, 22}, {13, 24}}));
}

TEST_CASE("shape mismatch names both shapes") {
    Tape t;
    const Var a = t.constant(Tensor(2, 3));
    const Var b = t.constant(Tensor(2, 3));
    try {
        (void)matmul(a, b);
        FAIL("matmul accepted 2x3 * 2x3");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
    }
    CHECK_THROWS_AS(add(a, t.constant(Tensor(3, 2))), std::invalid_argument);
    CHECK_THROWS_AS(add_bias(a, t.constant(Tensor(1, 2))), std::invalid_argument);
}

TEST_CASE("backward examples") {
    Tape t;
    const Var w = t.parameter(Tensor::from({{3}}));
    t.backward(sum(square(w)));
    CHECK(w.grad() == Tensor::from({{6}}));

    Tape u;
    const Var w2 = u.parameter(Tensor::from({{3}}));
    const Var other = u.parameter(Tensor::from({{1}}));
    u.backward(sum(square(other)));
    CHECK(w2.grad() == Tensor::from({{0}}));

    Tape v;
    const Var m = v.parameter(Tensor(2, 2, 1.0));
    CHECK_THROWS_AS(v.backward(m), std::invalid_argument);
}

TEST_CASE("backward returns a gradient per trainable leaf") {
    Tape t;
    const Var w = t.parameter(Tensor::from({{1, 2}}));
    const Var c = t.constant(Tensor::from({{4, 5}}));
    const GradientMap g = backward(t, sum(mul_const(add(w, c), Tensor::from({{2, 3}}))));
    REQUIRE(g.size() == 1);
    CHECK(g.at(w.id) == Tensor::from({{2, 3}}));
}

TEST_CASE("primitive gradients match central differences on 100 random shapes") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> dim(1, 8);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t r = dim(rng), c = dim(rng), k = dim(rng);
        const Tensor weight = random_tensor(rng, r, c);
        const Tensor weight_k = random_tensor(rng, 1, k);
        const auto wsum = [&](Var v) { return sum(mul_const(v, weight)); };

        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) { return wsum(matmul(p[0], p[1])); },
                                      {random_tensor(rng, r, k), random_tensor(rng, k, c)}));
        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) { return wsum(add(p[0], p[1])); },
                                      {random_tensor(rng, r, c), random_tensor(rng, r, c)}));
        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) { return wsum(sub(p[0], p[1])); },
                                      {random_tensor(rng, r, c), random_tensor(rng, r, c)}));
        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) { return wsum(add_bias(p[0], p[1])); },
                                      {random_tensor(rng, r, c), random_tensor(rng, 1, c)}));
        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) { return wsum(leaky_relu(p[0], 0.1)); },
                                      {away_from_zero(rng, r, c)}));
        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) { return wsum(abs(p[0])); },
                                      {away_from_zero(rng, r, c)}));
        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) { return wsum(log1p_abs(p[0])); },
                                      {away_from_zero(rng, r, c)}));
        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) { return wsum(sqrt_shift(p[0])); },
                                      {away_from_zero(rng, r, c)}));
        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) { return wsum(square(p[0])); },
                                      {random_tensor(rng, r, c)}));
        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) { return wsum(scale(p[0], -2.5)); },
                                      {random_tensor(rng, r, c)}));
        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) { return wsum(softplus(p[0])); },
                                      {random_tensor(rng, r, c, -4.0, 4.0)}));
        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) { return wsum(sqrt(p[0])); },
                                      {random_tensor(rng, r, c, 0.5, 2.0)}));
        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) {
            return sum(mul_const(mean_rows(p[0]), weight_k));
        }, {random_tensor(rng, r, k)}));
        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) { return wsum(transpose(p[0])); },
                                      {random_tensor(rng, c, r)}));
        worst = std::max(worst,
                         checked([&](Tape&, const std::vector<Var>& p) { return wsum(broadcast_rows(p[0], r)); },
                               {random_tensor(rng, 1, c)}));
        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) { return wsum(fill(p[0], r, c)); },
                                      {random_tensor(rng, 1, 1)}));
        worst = std::max(worst, checked([&](Tape&, const std::vector<Var>& p) { return sum(column(p[0], c - 1)); },
                                      {random_tensor(rng, r, c)}));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("four-layer network gradients match central differences") {
    std::mt19937_64 rng(5);
    const MlpSpec spec{{6, 5, 5, 5, 5, 1}, 0.1, 3};
    double worst = 0.0;
    int accepted = 0;
    while (accepted < 20) {
        const Mlp net = init_parameters(spec, rng);
        const Tensor x = random_tensor(rng, 4, 6);
        const Tensor y = random_tensor(rng, 4, 1);
        std::vector<Tensor> params;
        for (std::size_t l = 0; l < spec.layers(); ++l) {
            params.push_back(net.weights[l]);
            params.push_back(net.biases[l]);
        }
        const auto build = [&](Tape& t, const std::vector<Var>& p) {
            BoundMlp b{&spec, {}, {}};
            for (std::size_t l = 0; l < spec.layers(); ++l) {
                b.weights.push_back(p[2 * l]);
                b.biases.push_back(p[2 * l + 1]);
            }
            const MlpOutput out = mlp_forward(b, t.constant(x));
            return scale(sum(square(sub(out.output, t.constant(y)))), 0.25);
        };
        if (const auto err = oracle::gradient_check(build, params)) {
            worst = std::max(worst, *err);
            ++accepted;
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("gradients are linear in the root") {
    std::mt19937_64 rng(3);
    const Tensor w0 = random_tensor(rng, 3, 4);
    const Tensor x = random_tensor(rng, 5, 3);
    const double a = 0.7, b = -1.3;
    const auto r1 = [&](Tape& t, Var w) { return sum(square(matmul(t.constant(x), w))); };
    const auto r2 = [&](Tape&, Var w) { return sum(log1p_abs(w)); };

    Tape t1;
    const Var w1 = t1.parameter(w0);
    t1.backward(r1(t1, w1));
    const Tensor g1 = w1.grad();
    Tape t2;
    const Var w2 = t2.parameter(w0);
    t2.backward(r2(t2, w2));
    const Tensor g2 = w2.grad();
    Tape t3;
    const Var w3 = t3.parameter(w0);
    t3.backward(add(scale(r1(t3, w3), a), scale(r2(t3, w3), b)));
    for (std::size_t i = 0; i < w0.size(); ++i) CHECK(std::abs(w3.grad()[i] - (a * g1[i] + b * g2[i])) < 1e-10);
}

TEST_CASE("identical tapes give bit-identical values and gradients") {
    const auto run = [] {
        std::mt19937_64 rng(9);
        const Mlp net = init_parameters(discriminator_spec(), rng);
        Tape t;
        const BoundMlp b = bind(t, net, true);
        const MlpOutput out = mlp_forward(b, t.constant(random_tensor(rng, 8, 50)));
        t.backward(sum(square(out.output)));
        std::vector<Tensor> g{out.output.value()};
        for (const Var& w : b.weights) g.push_back(w.grad());
        return g;
    };
    CHECK(run() == run());
}

TEST_CASE("input-gradient norm: identity and constant features") {
    std::mt19937_64 rng(1);
    Tape t;
    const Var x = t.constant(random_tensor(rng, 4, 7));
    CHECK(grad_norm_sq_wrt_input(mean_rows(x), x).value().item() == doctest::Approx(7.0).epsilon(1e-12));

    Tape u;
    const Var y = u.constant(random_tensor(rng, 4, 7));
    const Var zero_map = matmul(y, u.parameter(Tensor(7, 3)));
    CHECK(grad_norm_sq_wrt_input(mean_rows(zero_map), y).value().item() == 0.0);
}

TEST_CASE("input-gradient norm matches finite differences on small nets") {
    std::mt19937_64 rng(21);
    const MlpSpec spec{{6, 5, 5, 5, 5, 1}, 0.1, 3};
    for (int trial = 0; trial < 10; ++trial) {
        const Mlp net = init_parameters(spec, rng);
        const Tensor x = random_tensor(rng, 3, 6);
        Tape t;
        const BoundMlp b = bind(t, net, true);
        const Var xv = t.constant(x);
        const Var g = grad_norm_sq_wrt_input(mean_rows(mlp_forward(b, xv).features), xv);
        const double fd = oracle::fd_grad_norm_sq(net, x);
        CHECK(std::abs(g.value().item() - fd) <= 1e-3 * std::abs(fd));
    }
}

TEST_CASE("input-gradient norm is differentiable to the parameters") {
    std::mt19937_64 rng(8);
    const MlpSpec spec{{4, 3, 3, 3, 3, 1}, 0.1, 3};
    double worst = 0.0;
    int accepted = 0;
    while (accepted < 20) {
        const Mlp net = init_parameters(spec, rng);
        const Tensor x = random_tensor(rng, 3, 4);
        std::vector<Tensor> params;
        for (std::size_t l = 0; l < spec.layers(); ++l) {
            params.push_back(net.weights[l]);
            params.push_back(net.biases[l]);
        }
        const auto build = [&](Tape& t, const std::vector<Var>& p) {
            BoundMlp b{&spec, {}, {}};
            for (std::size_t l = 0; l < spec.layers(); ++l) {
                b.weights.push_back(p[2 * l]);
                b.biases.push_back(p[2 * l + 1]);
            }
            const Var xv = t.constant(x);
            return grad_norm_sq_wrt_input(mean_rows(mlp_forward(b, xv).features), xv);
        };
        if (const auto err = oracle::gradient_check(build, params)) {
            worst = std::max(worst, *err);
            ++accepted;
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("input-gradient norm rejects an input from another tape") {
    Tape a, b;
    const Var x = a.constant(Tensor(2, 2, 1.0));
    const Var y = b.constant(Tensor(2, 2, 1.0));
    CHECK_THROWS(grad_norm_sq_wrt_input(mean_rows(x), y));
}

TEST_CASE("validating tape rejects non-finite values") {
    Tape t(true);
    CHECK_THROWS_AS(t.constant(Tensor::from({{std::nan("")}})), std::domain_error);
    Tape loose;
    CHECK_NOTHROW(loose.constant(Tensor::from({{std::nan("")}})));
}
