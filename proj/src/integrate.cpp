#include "fnode/integrate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

#include "fnode/errors.hpp"

namespace fnode::integrate {

namespace {

std::atomic<std::uint64_t> g_calls{0};

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// Dormand-Prince 4(5) tableau.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                 A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;
constexpr double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9;
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200,
                 E6 = 22.0 / 525, E7 = -1.0 / 40;

class FixedStepper {
  public:
    FixedStepper(const Rhs& f, std::size_t dim, bool rk4) : f_(f), rk4_(rk4) {
        k1_.resize(dim);
        k2_.resize(dim);
        k3_.resize(dim);
        k4_.resize(dim);
        tmp_.resize(dim);
    }

    void step(double t, double h, std::vector<double>& y, IntegrateStats& stats) {
        const std::size_t d = y.size();
        f_(t, y, k1_);
        if (!rk4_) {
            for (std::size_t i = 0; i < d; ++i) y[i] += h * k1_[i];
            stats.rhs_evals += 1;
            return;
        }
        for (std::size_t i = 0; i < d; ++i) tmp_[i] = y[i] + 0.5 * h * k1_[i];
        f_(t + 0.5 * h, tmp_, k2_);
        for (std::size_t i = 0; i < d; ++i) tmp_[i] = y[i] + 0.5 * h * k2_[i];
        f_(t + 0.5 * h, tmp_, k3_);
        for (std::size_t i = 0; i < d; ++i) tmp_[i] = y[i] + h * k3_[i];
        f_(t + h, tmp_, k4_);
        for (std::size_t i = 0; i < d; ++i)
            y[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
        stats.rhs_evals += 4;
    }

  private:
    const Rhs& f_;
    bool rk4_;
    std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

Array2d solve_fixed(const Rhs& f, std::span<const double> y0, std::span<const double> times,
                    const IntegratorConfig& cfg, IntegrateStats& stats) {
    if (!cfg.fixed_step || !(*cfg.fixed_step > 0.0))
        throw InvalidInputError("integrate: Euler/RK4 require a positive fixed_step");
    const double h_max = *cfg.fixed_step;
    const std::size_t d = y0.size();

    Array2d out(times.size(), d);
    std::vector<double> y(y0.begin(), y0.end());
    std::copy(y.begin(), y.end(), out.row(0).begin());

    FixedStepper stepper(f, d, cfg.method == Method::RK4);
    long steps = 0;
    for (std::size_t seg = 0; seg + 1 < times.size(); ++seg) {
        const double t0 = times[seg], t1 = times[seg + 1];
        const double gap = t1 - t0;
        const long m = std::max<long>(1, static_cast<long>(std::ceil(gap / h_max - 1e-12)));
        const double h = gap / static_cast<double>(m);
        for (long i = 0; i < m; ++i) {
            if (++steps > cfg.max_steps)
                throw BudgetError("integrate: exceeded max_steps=" + std::to_string(cfg.max_steps));
            stepper.step(t0 + h * static_cast<double>(i), h, y, stats);
        }
        if (!all_finite(y))
            throw DivergenceError("integrate: state diverged before t=" + std::to_string(t1), t0);
        stats.accepted += m;
        std::copy(y.begin(), y.end(), out.row(seg + 1).begin());
    }
    return out;
}

Array2d solve_dopri5(const Rhs& f, std::span<const double> y0, std::span<const double> times,
                     const IntegratorConfig& cfg, IntegrateStats& stats) {
    if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0))
        throw InvalidInputError("integrate: Dopri5 requires positive rtol and atol");
    const std::size_t d = y0.size();
    const double t_end = times.back();

    Array2d out(times.size(), d);
    std::vector<double> y(y0.begin(), y0.end());
    std::copy(y.begin(), y.end(), out.row(0).begin());
    std::size_t next_out = 1;

    std::vector<double> k1(d), k2(d), k3(d), k4(d), k5(d), k6(d), k7(d), ynew(d), tmp(d);
    double t = times.front();

    f(t, y, k1);
    stats.rhs_evals += 1;

    // starting step from the scaled magnitudes of y and f
    double h;
    {
        double d0 = 0.0, d1 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double sc = cfg.atol + cfg.rtol * std::abs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1 += (k1[i] / sc) * (k1[i] / sc);
        }
        d0 = std::sqrt(d0 / static_cast<double>(d));
        d1 = std::sqrt(d1 / static_cast<double>(d));
        h = (d1 > 1e-10) ? 0.01 * d0 / d1 : 1e-6;
        h = std::min(h, t_end - t);
        if (!(h > 0.0)) h = 1e-6;
    }

    const double safety = 0.9, alpha = 0.17, beta = 0.04;
    double err_prev = 1.0;
    long steps = 0;

    while (t < t_end - 1e-14 * std::max(1.0, std::abs(t_end))) {
        if (++steps > cfg.max_steps)
            throw BudgetError("integrate: exceeded max_steps=" + std::to_string(cfg.max_steps));
        h = std::min(h, t_end - t);

        for (std::size_t i = 0; i < d; ++i) tmp[i] = y[i] + h * A21 * k1[i];
        f(t + C2 * h, tmp, k2);
        for (std::size_t i = 0; i < d; ++i) tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        f(t + C3 * h, tmp, k3);
        for (std::size_t i = 0; i < d; ++i)
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        f(t + C4 * h, tmp, k4);
        for (std::size_t i = 0; i < d; ++i)
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        f(t + C5 * h, tmp, k5);
        for (std::size_t i = 0; i < d; ++i)
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        f(t + h, tmp, k6);
        for (std::size_t i = 0; i < d; ++i)
            ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        f(t + h, ynew, k7);
        stats.rhs_evals += 6;

        if (!all_finite(ynew))
            throw DivergenceError("integrate: state diverged near t=" + std::to_string(t), t);

        double err = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] +
                                  E7 * k7[i]);
            const double sc = cfg.atol + cfg.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err += (e / sc) * (e / sc);
        }
        err = std::sqrt(err / static_cast<double>(d));

        if (err <= 1.0) {
            // dense output over [t, t+h] by cubic Hermite with f at both ends
            while (next_out < times.size() && times[next_out] <= t + h + 1e-14) {
                const double theta = std::clamp((times[next_out] - t) / h, 0.0, 1.0);
                const double h00 = (1 + 2 * theta) * (1 - theta) * (1 - theta);
                const double h10 = theta * (1 - theta) * (1 - theta);
                const double h01 = theta * theta * (3 - 2 * theta);
                const double h11 = theta * theta * (theta - 1);
                auto row = out.row(next_out);
                for (std::size_t i = 0; i < d; ++i)
                    row[i] = h00 * y[i] + h10 * h * k1[i] + h01 * ynew[i] + h11 * h * k7[i];
                ++next_out;
            }
            stats.accepted += 1;
            stats.max_accepted_error = std::max(stats.max_accepted_error, err);
            t += h;
            y.swap(ynew);
            k1.swap(k7);  // FSAL
            const double fac = safety * std::pow(err > 0 ? err : 1e-16, -alpha) *
                               std::pow(err_prev > 0 ? err_prev : 1e-16, beta);
            h *= std::clamp(fac, 0.2, 10.0);
            err_prev = std::max(err, 1e-4);
        } else {
            stats.rejected += 1;
            const double fac = safety * std::pow(err, -0.2);
            h *= std::clamp(fac, 0.1, 1.0);
        }
        if (!(h > 1e-15 * std::max(1.0, std::abs(t))))
            throw NumericalError("integrate: step size underflow at t=" + std::to_string(t));
    }
    // t may land exactly on remaining requested times (within tolerance)
    while (next_out < times.size() && times[next_out] <= t + 1e-12 * std::max(1.0, std::abs(t))) {
        std::copy(y.begin(), y.end(), out.row(next_out).begin());
        ++next_out;
    }
    if (next_out != times.size())
        throw InternalError("integrate: dense output did not cover all requested times");
    return out;
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::Euler: return "euler";
        case Method::RK4: return "rk4";
        case Method::Dopri5: return "dopri5";
    }
    throw InternalError("to_string(Method)");
}

Method method_from_string(const std::string& name) {
    if (name == "euler") return Method::Euler;
    if (name == "rk4") return Method::RK4;
    if (name == "dopri5") return Method::Dopri5;
    throw ConfigError("unknown integrator method: " + name);
}

Array2d solve(const Rhs& f, std::span<const double> y0, std::span<const double> times,
              const IntegratorConfig& config, IntegrateStats* stats) {
    g_calls.fetch_add(1, std::memory_order_relaxed);
    if (times.size() < 1) throw InvalidInputError("integrate: need at least one output time");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw InvalidInputError("integrate: times must be strictly increasing");
    if (!all_finite(y0)) throw InvalidInputError("integrate: initial state must be finite");

    IntegrateStats local;
    IntegrateStats& st = stats ? *stats : local;
    st = IntegrateStats{};

    if (times.size() == 1) {
        Array2d out(1, y0.size());
        std::copy(y0.begin(), y0.end(), out.row(0).begin());
        return out;
    }
    if (config.method == Method::Dopri5) return solve_dopri5(f, y0, times, config, st);
    return solve_fixed(f, y0, times, config, st);
}

std::uint64_t call_count() { return g_calls.load(); }
void reset_call_count() { g_calls.store(0); }

}  // namespace fnode::integrate
