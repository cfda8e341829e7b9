#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "fnode/array.hpp"

namespace fnode::integrate {

enum class Method { Euler, RK4, Dopri5 };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct IntegratorConfig {
    Method method = Method::Dopri5;
    std::optional<double> fixed_step;  // required for Euler / RK4
    double rtol = 1e-6;
    double atol = 1e-8;
    long max_steps = 50'000'000;
};

struct IntegrateStats {
    long accepted = 0;
    long rejected = 0;
    long rhs_evals = 0;
    double max_accepted_error = 0.0;  // scaled error of accepted Dopri5 steps (<= 1)
};

using Rhs = std::function<void(double t, std::span<const double> y, std::span<double> dy)>;

/// Integrates dy/dt = f(t, y) from times.front() to times.back(), emitting the
/// state at every requested time (row 0 is y0). Euler / RK4 subdivide each
/// output interval so steps land exactly on the requested times; Dopri5 runs
/// embedded 4(5) error control with a PI step controller and fills requested
/// times by cubic Hermite interpolation over each accepted step.
Array2d solve(const Rhs& f, std::span<const double> y0, std::span<const double> times,
              const IntegratorConfig& config, IntegrateStats* stats = nullptr);

/// Process-wide count of solve() invocations; the simulation-free property of
/// the trainer is asserted against this.
std::uint64_t call_count();
void reset_call_count();

}  // namespace fnode::integrate
