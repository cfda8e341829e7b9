#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fnode/errors.hpp"
#include "fnode/integrate.hpp"
#include "fnode/nn.hpp"
#include "fnode/reference.hpp"
#include "fnode/rng.hpp"
#include "oracles.hpp"

using namespace fnode;
using nn::Activation;
using nn::LossForm;

namespace {

Array2d random_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Array2d a(rows, cols);
    for (double& v : a.flat()) v = rng.gaussian();
    return a;
}

}  // namespace

TEST_CASE("mlp_init: deterministic, zero biases, odd-activation zero map") {
    const auto a = nn::MlpModel::init({3, 8, 2}, 7);
    const auto b = nn::MlpModel::init({3, 8, 2}, 7);
    CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));

    for (int l = 0; l < a.n_layers(); ++l)
        for (double v : a.bias(l)) CHECK(v == 0.0);

    // tanh is odd and biases are zero, so zero input maps to exactly zero
    std::vector<double> in(3, 0.0), out(2, 99.0);
    a.forward(in, out);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);

    // init respects the 1/sqrt(fan_in) bound
    const double bound0 = 1.0 / std::sqrt(3.0);
    for (double w : a.weight(0)) CHECK(std::abs(w) <= bound0);

    CHECK_THROWS_AS(nn::MlpModel::init({4}, 0), InvalidInputError);
}

TEST_CASE("mlp_forward: identity single layer and hand-computed hidden layer") {
    nn::MlpModel ident({2, 2}, Activation::Tanh);
    ident.weight(0)[0] = 1.0;
    ident.weight(0)[3] = 1.0;
    std::vector<double> in = {0.3, -0.7}, out(2);
    ident.forward(in, out);
    CHECK(out[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(-0.7).epsilon(1e-15));

    // one hidden layer, hand evaluation
    nn::MlpModel m({2, 2, 1}, Activation::Tanh);
    auto w0 = m.weight(0);
    w0[0] = 0.5; w0[1] = -1.0; w0[2] = 2.0; w0[3] = 0.25;
    m.bias(0)[0] = 0.1;
    m.bias(0)[1] = -0.2;
    auto w1 = m.weight(1);
    w1[0] = 1.5; w1[1] = -0.5;
    m.bias(1)[0] = 0.05;
    const double x0 = 0.4, x1 = -0.6;
    const double h0 = std::tanh(0.5 * x0 - 1.0 * x1 + 0.1);
    const double h1 = std::tanh(2.0 * x0 + 0.25 * x1 - 0.2);
    const double expect = 1.5 * h0 - 0.5 * h1 + 0.05;
    std::vector<double> xin = {x0, x1}, yout(1);
    m.forward(xin, yout);
    CHECK(yout[0] == doctest::Approx(expect).epsilon(1e-12));

    CHECK_THROWS_AS(m.forward(std::vector<double>(3, 0.0), yout), ShapeError);
}

TEST_CASE("loss_and_grad: perfect fit gives zero loss and zero gradients") {
    const auto model = nn::MlpModel::init({3, 6, 2}, 11);
    const auto x = random_rows(5, 3, 1);
    Array2d y;
    nn::forward_batch(model, x, y);
    const auto lg = nn::loss_and_grad(model, x, y, LossForm::MeanSquared);
    CHECK(lg.loss < 1e-12);
    CHECK(oracle::max_abs(lg.grads) < 1e-12);
}

TEST_CASE("loss_and_grad: matches central finite differences on both forms and activations") {
    for (const auto act : {Activation::Tanh, Activation::Gelu}) {
        for (const auto form : {LossForm::MeanSquared, LossForm::MeanNorm}) {
            for (const auto& sizes :
                 {std::vector<int>{3, 2}, {3, 5, 2}, {3, 5, 4, 2}, {3, 5, 4, 3, 2}}) {
                auto model = nn::MlpModel::init(sizes, 23, act);
                const auto x = random_rows(4, 3, 5);
                const auto y = random_rows(4, 2, 6);
                const auto lg = nn::loss_and_grad(model, x, y, form);

                auto loss_at = [&](std::span<const double> p) {
                    nn::MlpModel probe = model;
                    std::copy(p.begin(), p.end(), probe.params().begin());
                    return nn::batch_loss(probe, x, y, form);
                };
                const auto fd = oracle::fd_gradient(
                    [&](std::span<const double> p) { return loss_at(p); },
                    std::vector<double>(model.params().begin(), model.params().end()));

                double worst = 0.0;
                for (std::size_t i = 0; i < fd.size(); ++i) {
                    const double denom = std::max({std::abs(fd[i]), std::abs(lg.grads[i]), 1e-8});
                    worst = std::max(worst, std::abs(fd[i] - lg.grads[i]) / denom);
                }
                CHECK(worst < 1e-4);
            }
        }
    }
}

TEST_CASE("loss_and_grad: duplicating every row changes nothing; weights honored") {
    const auto model = nn::MlpModel::init({3, 4, 2}, 3);
    const auto x = random_rows(6, 3, 8);
    const auto y = random_rows(6, 2, 9);
    const auto base = nn::loss_and_grad(model, x, y, LossForm::MeanSquared);

    Array2d x2(12, 3), y2(12, 2);
    for (std::size_t r = 0; r < 12; ++r) {
        std::copy(x.row(r % 6).begin(), x.row(r % 6).end(), x2.row(r).begin());
        std::copy(y.row(r % 6).begin(), y.row(r % 6).end(), y2.row(r).begin());
    }
    const auto doubled = nn::loss_and_grad(model, x2, y2, LossForm::MeanSquared);
    CHECK(doubled.loss == doctest::Approx(base.loss).epsilon(1e-12));
    for (std::size_t i = 0; i < base.grads.size(); ++i)
        CHECK(doubled.grads[i] == doctest::Approx(base.grads[i]).epsilon(1e-10));

    // zero-weight rows drop out entirely
    std::vector<double> w = {1, 1, 1, 0, 0, 0};
    Array2d xh(3, 3), yh(3, 2);
    for (std::size_t r = 0; r < 3; ++r) {
        std::copy(x.row(r).begin(), x.row(r).end(), xh.row(r).begin());
        std::copy(y.row(r).begin(), y.row(r).end(), yh.row(r).begin());
    }
    const auto weighted = nn::loss_and_grad(model, x, y, LossForm::MeanSquared, w);
    const auto head = nn::loss_and_grad(model, xh, yh, LossForm::MeanSquared);
    CHECK(weighted.loss == doctest::Approx(head.loss).epsilon(1e-12));

    CHECK_THROWS_AS(nn::loss_and_grad(model, Array2d(0, 3), Array2d(0, 2), LossForm::MeanSquared),
                    InvalidInputError);
    CHECK_THROWS_AS(nn::loss_and_grad(model, x, random_rows(6, 3, 1), LossForm::MeanSquared),
                    ShapeError);
}

TEST_CASE("loss forms: hand values on a single residual") {
    // single affine layer, zero weights: output = bias
    nn::MlpModel m({2, 2}, Activation::Tanh);
    Array2d x(1, 2, 0.0), y(1, 2);
    y(0, 0) = -3.0;
    y(0, 1) = -4.0;  // residual (3,4) after y_hat = 0
    CHECK(nn::batch_loss(m, x, y, LossForm::MeanNorm) == doctest::Approx(5.0));
    CHECK(nn::batch_loss(m, x, y, LossForm::MeanSquared) == doctest::Approx(25.0));
}

TEST_CASE("loss parity: omp path bitwise equals serial reference") {
    const auto model = nn::MlpModel::init({4, 16, 16, 3}, 77);
    const auto x = random_rows(515, 4, 2);  // odd count exercises ragged blocks
    const auto y = random_rows(515, 3, 4);
    for (const auto form : {LossForm::MeanSquared, LossForm::MeanNorm}) {
        const auto a = nn::loss_and_grad(model, x, y, form);
        const auto b = reference::loss_and_grad_serial(model, x, y, form);
        CHECK(a.loss == b.loss);
        CHECK(a.grads == b.grads);
    }
}

TEST_CASE("adam_step: fixed points, sign step, decoupled decay") {
    auto model = nn::MlpModel::init({2, 3, 1}, 5);
    const auto before = std::vector<double>(model.params().begin(), model.params().end());

    // zero gradients, no decay: parameters unchanged
    auto st = nn::AdamState::init(model.n_params(), 1e-3, 0.0);
    std::vector<double> zeros(model.n_params(), 0.0);
    nn::adam_step(model, zeros, st);
    CHECK(std::equal(model.params().begin(), model.params().end(), before.begin()));
    CHECK(st.step_count == 1);

    // first step moves by ~ -lr*sign(g)
    auto m2 = nn::MlpModel::init({2, 3, 1}, 5);
    auto st2 = nn::AdamState::init(m2.n_params(), 1e-3, 0.0);
    Rng rng(3);
    std::vector<double> g(m2.n_params());
    for (double& v : g) v = rng.gaussian() + (rng.uniform() > 0.5 ? 2.0 : -2.0);
    nn::adam_step(m2, g, st2);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double step = m2.params()[i] - before[i];
        CHECK(step == doctest::Approx(-1e-3 * (g[i] > 0 ? 1.0 : -1.0)).epsilon(1e-6));
    }

    // zero gradients with decay shrink by exactly (1 - lr*wd)
    auto m3 = nn::MlpModel::init({2, 3, 1}, 5);
    auto st3 = nn::AdamState::init(m3.n_params(), 0.01, 0.1);
    nn::adam_step(m3, zeros, st3);
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK(m3.params()[i] == doctest::Approx(before[i] * (1.0 - 0.01 * 0.1)).epsilon(1e-14));
}

TEST_CASE("training a linear model on a linear target reaches machine-level loss") {
    // f(x) = B x realizable by a single affine layer
    const Array2d b_true = [] {
        Array2d b(2, 3);
        b(0, 0) = 0.5; b(0, 1) = -1.0; b(0, 2) = 2.0;
        b(1, 0) = 1.0; b(1, 1) = 0.3; b(1, 2) = -0.7;
        return b;
    }();
    const auto x = random_rows(64, 3, 10);
    Array2d y(64, 2);
    for (std::size_t r = 0; r < 64; ++r)
        for (std::size_t i = 0; i < 2; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < 3; ++j) acc += b_true(i, j) * x(r, j);
            y(r, i) = acc;
        }
    auto model = nn::MlpModel::init({3, 2}, 1);
    auto st = nn::AdamState::init(model.n_params(), 1e-2, 0.0);
    double loss = 1.0;
    for (int it = 0; it < 5000 && loss > 1e-9; ++it) {
        auto lg = nn::loss_and_grad(model, x, y, LossForm::MeanSquared);
        loss = lg.loss;
        nn::adam_step(model, lg.grads, st);
    }
    CHECK(loss < 1e-8);
}

// ---------------------------------------------------------------------------
// integrator

TEST_CASE("integrate: zero field stays put; fixed steps land on output times") {
    integrate::IntegratorConfig cfg;
    cfg.method = integrate::Method::RK4;
    cfg.fixed_step = 0.1;
    const std::vector<double> times = {0.0, 0.35, 0.5, 1.0};
    const std::vector<double> y0 = {1.0, -2.0};
    const auto out = integrate::solve(
        [](double, std::span<const double>, std::span<double> dy) {
            std::fill(dy.begin(), dy.end(), 0.0);
        },
        y0, times, cfg);
    CHECK(out.rows() == 4);
    for (std::size_t r = 0; r < 4; ++r) {
        CHECK(out(r, 0) == 1.0);
        CHECK(out(r, 1) == -2.0);
    }
}

TEST_CASE("integrate: exponential decay against the analytic solution") {
    const auto rhs = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = -y[0];
    };
    const std::vector<double> y0 = {1.0};
    const std::vector<double> times = {0.0, 1.0};

    integrate::IntegratorConfig rk4;
    rk4.method = integrate::Method::RK4;
    rk4.fixed_step = 1e-3;
    const auto out = integrate::solve(rhs, y0, times, rk4);
    CHECK(std::abs(out(1, 0) - std::exp(-1.0)) < 1e-9);

    integrate::IntegratorConfig dp;
    dp.rtol = 1e-6;
    dp.atol = 1e-8;
    integrate::IntegrateStats stats_dp;
    const auto out2 = integrate::solve(rhs, y0, times, dp, &stats_dp);
    CHECK(std::abs(out2(1, 0) - std::exp(-1.0)) < 1e-5);

    integrate::IntegratorConfig rk4_fine;
    rk4_fine.method = integrate::Method::RK4;
    rk4_fine.fixed_step = 1e-4;
    integrate::IntegrateStats stats_rk;
    integrate::solve(rhs, y0, times, rk4_fine, &stats_rk);
    CHECK(stats_rk.rhs_evals >= 10 * stats_dp.rhs_evals);
}

TEST_CASE("integrate: order of accuracy on log-log slopes") {
    const auto rhs = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = -y[0];
    };
    const std::vector<double> y0 = {1.0};
    const std::vector<double> times = {0.0, 1.0};

    auto global_error = [&](integrate::Method m, double h) {
        integrate::IntegratorConfig cfg;
        cfg.method = m;
        cfg.fixed_step = h;
        const auto out = integrate::solve(rhs, y0, times, cfg);
        return std::abs(out(1, 0) - std::exp(-1.0));
    };

    // slope between h=1e-1 and h=1e-3
    const double rk_slope = std::log10(global_error(integrate::Method::RK4, 1e-1) /
                                       global_error(integrate::Method::RK4, 1e-3)) /
                            2.0;
    CHECK(rk_slope == doctest::Approx(4.0).epsilon(0.075));
    const double eu_slope = std::log10(global_error(integrate::Method::Euler, 1e-1) /
                                       global_error(integrate::Method::Euler, 1e-3)) /
                            2.0;
    CHECK(eu_slope == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("integrate: dopri5 error control and dense output on a driven system") {
    // y' = cos(5t) has solution sin(5t)/5; request awkward interior times
    const auto rhs = [](double t, std::span<const double>, std::span<double> dy) {
        dy[0] = std::cos(5.0 * t);
    };
    std::vector<double> times;
    for (int i = 0; i <= 40; ++i) times.push_back(0.05 * i + 0.013 * (i % 3));
    integrate::IntegratorConfig dp;
    dp.rtol = 1e-8;
    dp.atol = 1e-10;
    integrate::IntegrateStats stats;
    const auto out = integrate::solve(rhs, std::vector<double>{0.0}, times, dp, &stats);
    // node accuracy follows rtol; interior values carry the O(h^4) Hermite
    // interpolation error on top
    for (std::size_t i = 0; i < times.size(); ++i)
        CHECK(std::abs(out(i, 0) - std::sin(5.0 * times[i]) / 5.0) < 1e-5);
    CHECK(stats.max_accepted_error <= 1.0);  // accepted steps never exceed tolerance
    CHECK(stats.accepted > 0);

    // the interpolation error contracts when tighter tolerances shrink steps
    integrate::IntegratorConfig tight = dp;
    tight.rtol = 1e-12;
    tight.atol = 1e-12;
    const auto out2 = integrate::solve(rhs, std::vector<double>{0.0}, times, tight);
    double worst = 0.0, worst_tight = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        worst = std::max(worst, std::abs(out(i, 0) - std::sin(5.0 * times[i]) / 5.0));
        worst_tight = std::max(worst_tight, std::abs(out2(i, 0) - std::sin(5.0 * times[i]) / 5.0));
    }
    CHECK(worst_tight < 0.25 * worst);
}

TEST_CASE("integrate: time reversal via the reflected field returns to start") {
    // forward: y' = f(y, t); backward: z' = -f(z, T - t)
    const auto f = [](double t, std::span<const double> y, std::span<double> dy) {
        dy[0] = std::sin(y[0]) + 0.5 * std::cos(t);
        dy[1] = -0.3 * y[0];
    };
    integrate::IntegratorConfig rk4;
    rk4.method = integrate::Method::RK4;
    rk4.fixed_step = 1e-3;
    const std::vector<double> y0 = {0.4, -0.2};
    const std::vector<double> times = {0.0, 2.0};
    const auto fwd = integrate::solve(f, y0, times, rk4);
    const auto back = integrate::solve(
        [&](double t, std::span<const double> y, std::span<double> dy) {
            f(2.0 - t, y, dy);
            for (double& v : dy) v = -v;
        },
        fwd.row(1), times, rk4);
    CHECK(std::abs(back(1, 0) - y0[0]) < 1e-6);
    CHECK(std::abs(back(1, 1) - y0[1]) < 1e-6);
}

TEST_CASE("integrate: budget and divergence errors") {
    integrate::IntegratorConfig cfg;
    cfg.method = integrate::Method::RK4;
    cfg.fixed_step = 1e-6;
    cfg.max_steps = 10;
    const auto rhs = [](double, std::span<const double> y, std::span<double> dy) { dy[0] = y[0]; };
    CHECK_THROWS_AS(
        integrate::solve(rhs, std::vector<double>{1.0}, std::vector<double>{0.0, 1.0}, cfg),
        BudgetError);

    integrate::IntegratorConfig blow;
    blow.method = integrate::Method::RK4;
    blow.fixed_step = 0.5;
    CHECK_THROWS_AS(integrate::solve(
                        [](double, std::span<const double> y, std::span<double> dy) {
                            dy[0] = y[0] * y[0] * 1e4;
                        },
                        std::vector<double>{1.0}, std::vector<double>{0.0, 10.0}, blow),
                    DivergenceError);
}

TEST_CASE("integrate: call counter increments per invocation") {
    integrate::reset_call_count();
    integrate::IntegratorConfig cfg;
    cfg.method = integrate::Method::Euler;
    cfg.fixed_step = 0.5;
    const auto rhs = [](double, std::span<const double>, std::span<double> dy) { dy[0] = 1.0; };
    integrate::solve(rhs, std::vector<double>{0.0}, std::vector<double>{0.0, 1.0}, cfg);
    integrate::solve(rhs, std::vector<double>{0.0}, std::vector<double>{0.0, 1.0}, cfg);
    CHECK(integrate::call_count() == 2);
}
