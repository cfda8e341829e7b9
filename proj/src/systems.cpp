#include "fnode/systems.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>

#include "fnode/errors.hpp"
#include "fnode/rng.hpp"

namespace fnode::systems {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kStateCap = 1e8;  // divergence tripwire during generation
}  // namespace

int SystemSpec::state_dim() const {
    switch (kind) {
        case SystemKind::Parametric2D: return 2;
        case SystemKind::Lorenz63: return 3;
        default: return space.points();
    }
}

int SystemSpec::control_dim() const {
    switch (kind) {
        case SystemKind::Parametric2D: return 2;
        case SystemKind::Lorenz63: return 1;
        default: return space.points();  // full control field
    }
}

SystemSpec SystemSpec::parametric2d(double horizon) {
    SystemSpec s;
    s.kind = SystemKind::Parametric2D;
    s.time_horizon = horizon;
    return s;
}

SystemSpec SystemSpec::lorenz63(double horizon) {
    SystemSpec s;
    s.kind = SystemKind::Lorenz63;
    s.time_horizon = horizon;
    s.init_scale = 10.0;  // box half-width around (0, 0, 25)
    return s;
}

SystemSpec SystemSpec::kdv(int nx, double horizon) {
    SystemSpec s;
    s.kind = SystemKind::KDV;
    s.time_horizon = horizon;
    s.space.grid1d = Grid1d{nx, 16.0 * std::numbers::pi, nx / 2};
    return s;
}

SystemSpec SystemSpec::dr(int nx, double horizon) {
    SystemSpec s;
    s.kind = SystemKind::DR;
    s.time_horizon = horizon;
    s.space.grid1d = Grid1d{nx, 1.0, nx / 2};
    return s;
}

SystemSpec SystemSpec::ks(int nx, double horizon) {
    SystemSpec s;
    s.kind = SystemKind::KS;
    s.time_horizon = horizon;
    s.space.grid1d = Grid1d{nx, 32.0 * std::numbers::pi, nx / 2};
    return s;
}

SystemSpec SystemSpec::ns(int nx, int ny, double horizon) {
    SystemSpec s;
    s.kind = SystemKind::NS;
    s.time_horizon = horizon;
    s.space.grid2d = spectral::Grid2d::full(nx, ny, 2.0, 2.0);
    return s;
}

void rhs_parametric2d(std::span<const double> s, std::span<const double> u,
                      std::span<double> out) {
    if (s.size() != 2 || u.size() != 2 || out.size() != 2)
        throw ShapeError("rhs_parametric2d: expects 2-vectors");
    const double c0 = s[0] * s[0] * s[0];
    const double c1 = s[1] * s[1] * s[1];
    out[0] = -0.1 * c0 + 2.0 * c1 + u[0];
    out[1] = -2.0 * c0 - 0.1 * c1 + u[1];
}

void rhs_lorenz63(std::span<const double> s, double rho, std::span<double> out) {
    if (s.size() != 3 || out.size() != 3) throw ShapeError("rhs_lorenz63: expects 3-vectors");
    out[0] = 10.0 * (s[1] - s[0]);
    out[1] = rho * s[0] - s[1] - s[0] * s[2];
    out[2] = s[0] * s[1] - (8.0 / 3.0) * s[2];
}

namespace {

std::vector<double> rhs_pde_1d(const SystemSpec& spec, std::span<const double> field,
                               std::span<const double> control) {
    const Grid1d& g = *spec.space.grid1d;
    const std::size_t n = static_cast<std::size_t>(g.nx);
    if (field.size() != n || control.size() != n)
        throw ShapeError("rhs_pde: field/control size does not match grid");
    const int full = g.nx / 2;
    std::vector<double> out(n);

    switch (spec.kind) {
        case SystemKind::KDV: {
            // ds/dt = s_xxx + u .* d/dx(s^2/2)
            const auto sxxx = spectral::spatial_derivative_1d(field, g.lx, 3, full);
            std::vector<double> half_sq(n);
            for (std::size_t i = 0; i < n; ++i) half_sq[i] = 0.5 * field[i] * field[i];
            const auto flux = spectral::spatial_derivative_1d(half_sq, g.lx, 1, full);
            for (std::size_t i = 0; i < n; ++i) out[i] = sxxx[i] + control[i] * flux[i];
            return out;
        }
        case SystemKind::DR: {
            // ds/dt = nu s_xx + r s^2 + u
            const auto sxx = spectral::spatial_derivative_1d(field, g.lx, 2, full);
            for (std::size_t i = 0; i < n; ++i)
                out[i] = spec.dr_diffusion * sxx[i] + spec.dr_reaction * field[i] * field[i] +
                         control[i];
            return out;
        }
        case SystemKind::KS: {
            // ds/dt = -d/dx(s^2/2) - s_xx - u .* s_xxxx
            std::vector<double> half_sq(n);
            for (std::size_t i = 0; i < n; ++i) half_sq[i] = 0.5 * field[i] * field[i];
            const auto flux = spectral::spatial_derivative_1d(half_sq, g.lx, 1, full);
            const auto sxx = spectral::spatial_derivative_1d(field, g.lx, 2, full);
            const auto sxxxx = spectral::spatial_derivative_1d(field, g.lx, 4, full);
            for (std::size_t i = 0; i < n; ++i)
                out[i] = -flux[i] - sxx[i] - control[i] * sxxxx[i];
            return out;
        }
        default:
            throw InvalidInputError("rhs_pde_1d: not a 1-D PDE system");
    }
}

std::vector<double> rhs_pde_ns(const SystemSpec& spec, std::span<const double> field,
                               std::span<const double> control) {
    const spectral::Grid2d& g = *spec.space.grid2d;
    const std::size_t n = static_cast<std::size_t>(g.nx) * static_cast<std::size_t>(g.ny);
    if (field.size() != n || control.size() != n)
        throw ShapeError("rhs_pde: field/control size does not match grid");
    const spectral::Grid2d full = spectral::Grid2d::full(g.nx, g.ny, g.lx, g.ly);

    Array2d w(static_cast<std::size_t>(g.nx), static_cast<std::size_t>(g.ny));
    std::copy(field.begin(), field.end(), w.data());

    // ds/dt = gamma_x s_y - gamma_y s_x + nu laplace(s) + u,  laplace(gamma) = -s
    const auto stream = spectral::ns_stream_features(w, full);
    const auto sx = spectral::spatial_derivative_2d(w, full, 1, 0);
    const auto sy = spectral::spatial_derivative_2d(w, full, 0, 1);
    const auto sxx = spectral::spatial_derivative_2d(w, full, 2, 0);
    const auto syy = spectral::spatial_derivative_2d(w, full, 0, 2);

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = stream.vx.data()[i] * sy.data()[i] - stream.vy.data()[i] * sx.data()[i] +
                 spec.ns_viscosity * (sxx.data()[i] + syy.data()[i]) + control[i];
    return out;
}

}  // namespace

std::vector<double> rhs_pde(const SystemSpec& spec, std::span<const double> field,
                            std::span<const double> control) {
    if (!spec.is_pde()) throw InvalidInputError("rhs_pde: spec is not a PDE system");
    if (spec.kind == SystemKind::NS) return rhs_pde_ns(spec, field, control);
    return rhs_pde_1d(spec, field, control);
}

std::vector<double> rhs_true(const SystemSpec& spec, std::span<const double> state,
                             std::span<const double> control) {
    switch (spec.kind) {
        case SystemKind::Parametric2D: {
            std::vector<double> out(2);
            rhs_parametric2d(state, control, out);
            return out;
        }
        case SystemKind::Lorenz63: {
            std::vector<double> out(3);
            rhs_lorenz63(state, control[0], out);
            return out;
        }
        default:
            return rhs_pde(spec, state, control);
    }
}

std::vector<double> pde_initial_profile(const SystemSpec& spec) {
    const Grid1d& g = *spec.space.grid1d;
    std::vector<double> s(static_cast<std::size_t>(g.nx));
    for (int i = 0; i < g.nx; ++i) {
        const double phase = kTwoPi * i / g.nx;  // 2*pi*x/L
        switch (spec.kind) {
            case SystemKind::KDV:
            case SystemKind::KS:
                s[static_cast<std::size_t>(i)] = 2.0 * std::cos(phase) * (1.0 + std::sin(phase));
                break;
            case SystemKind::DR:
                s[static_cast<std::size_t>(i)] = std::cos(phase);
                break;
            default:
                throw InvalidInputError("pde_initial_profile: no closed-form initial state");
        }
    }
    return s;
}

std::vector<double> pde_control_profile(const SystemSpec& spec) {
    const Grid1d& g = *spec.space.grid1d;
    std::vector<double> gx(static_cast<std::size_t>(g.nx));
    for (int i = 0; i < g.nx; ++i)
        gx[static_cast<std::size_t>(i)] = std::sin(kTwoPi * i / g.nx);
    return gx;
}

double stable_step_bound(const SystemSpec& spec) {
    // Explicit RK4 absolute-stability radii: ~2.79 on the negative real axis,
    // ~2.83 on the imaginary axis. Nonlinear terms get a 0.5 safety factor via
    // the caller's oversampling; divergence checks catch the rest.
    switch (spec.kind) {
        case SystemKind::Parametric2D:
        case SystemKind::Lorenz63:
            return std::numeric_limits<double>::infinity();
        case SystemKind::KDV: {
            const Grid1d& g = *spec.space.grid1d;
            const double kmax = kTwoPi / g.lx * (g.nx / 2);
            return 2.8 / (kmax * kmax * kmax);
        }
        case SystemKind::DR: {
            const Grid1d& g = *spec.space.grid1d;
            const double kmax = kTwoPi / g.lx * (g.nx / 2);
            return 2.79 / (spec.dr_diffusion * kmax * kmax);
        }
        case SystemKind::KS: {
            const Grid1d& g = *spec.space.grid1d;
            const double kmax = kTwoPi / g.lx * (g.nx / 2);
            const double u_max = 6.0;  // conservative bound on the hyperviscosity control
            return 2.79 / (kmax * kmax + u_max * kmax * kmax * kmax * kmax);
        }
        case SystemKind::NS: {
            const spectral::Grid2d& g = *spec.space.grid2d;
            const double kx = kTwoPi / g.lx * (g.nx / 2);
            const double ky = kTwoPi / g.ly * (g.ny / 2);
            return 2.79 / (spec.ns_viscosity * (kx * kx + ky * ky) + 1e-30);
        }
    }
    throw InternalError("stable_step_bound: unknown system");
}

namespace {

// One fixed-step RK4 stride from t to t+h with linearly interpolated control.
void rk4_step(const SystemSpec& spec, std::vector<double>& s, double t, double h,
              const std::function<std::vector<double>(double)>& control_at) {
    const std::size_t d = s.size();
    const auto u1 = control_at(t);
    const auto u2 = control_at(t + 0.5 * h);
    const auto u4 = control_at(t + h);

    const auto k1 = rhs_true(spec, s, u1);
    std::vector<double> tmp(d);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = s[i] + 0.5 * h * k1[i];
    const auto k2 = rhs_true(spec, tmp, u2);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = s[i] + 0.5 * h * k2[i];
    const auto k3 = rhs_true(spec, tmp, u2);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = s[i] + h * k3[i];
    const auto k4 = rhs_true(spec, tmp, u4);
    for (std::size_t i = 0; i < d; ++i)
        s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

std::vector<double> initial_state(const SystemSpec& spec, std::uint64_t seed,
                                  const GenerateOptions& opts) {
    switch (spec.kind) {
        case SystemKind::Parametric2D: {
            Rng rng(seed);
            return {spec.init_scale * rng.uniform(-1.0, 1.0),
                    spec.init_scale * rng.uniform(-1.0, 1.0)};
        }
        case SystemKind::Lorenz63: {
            Rng rng(seed);
            // box around the attractor center (0, 0, 25)
            return {spec.init_scale * rng.uniform(-1.0, 1.0),
                    spec.init_scale * rng.uniform(-1.0, 1.0),
                    25.0 + spec.init_scale * rng.uniform(-1.0, 1.0)};
        }
        case SystemKind::NS: {
            const spectral::Grid2d& g = *spec.space.grid2d;
            const Array2d f =
                grf::sample_grid2d(g.nx, g.ny, g.lx, g.ly, opts.ns_init_grf, seed);
            return std::vector<double>(f.data(), f.data() + f.size());
        }
        default:
            return pde_initial_profile(spec);
    }
}

// Control values on the sampling grid, one row per time step.
Array2d sample_controls(const SystemSpec& spec, const std::vector<double>& times,
                        const GenerateOptions& opts, std::uint64_t sample_seed) {
    const std::size_t n = times.size();
    const std::size_t cd = static_cast<std::size_t>(spec.control_dim());
    Array2d u(n, cd);
    switch (spec.kind) {
        case SystemKind::Parametric2D:
        case SystemKind::Lorenz63: {
            for (std::size_t c = 0; c < cd; ++c) {
                const auto comp = grf::sample_1d(times, opts.control_grf,
                                                 derive_seed(sample_seed, 1000 + c));
                for (std::size_t t = 0; t < n; ++t) u(t, c) = comp[t];
            }
            return u;
        }
        case SystemKind::KDV:
        case SystemKind::DR:
        case SystemKind::KS: {
            const auto gx = pde_control_profile(spec);
            const auto u1 = grf::sample_1d(times, opts.control_grf,
                                           derive_seed(sample_seed, "control_t"));
            for (std::size_t t = 0; t < n; ++t)
                for (std::size_t i = 0; i < cd; ++i) u(t, i) = gx[i] + u1[t];
            return u;
        }
        case SystemKind::NS: {
            const spectral::Grid2d& g = *spec.space.grid2d;
            const Array2d u0 = grf::sample_grid2d(g.nx, g.ny, g.lx, g.ly, opts.ns_space_grf,
                                                  derive_seed(sample_seed, "control_xy"));
            const auto u1 = grf::sample_1d(times, opts.control_grf,
                                           derive_seed(sample_seed, "control_t"));
            for (std::size_t t = 0; t < n; ++t)
                for (std::size_t i = 0; i < cd; ++i) u(t, i) = u0.data()[i] + u1[t];
            return u;
        }
    }
    throw InternalError("sample_controls: unknown system");
}

Trajectory generate_one(const SystemSpec& spec, const GenerateOptions& opts,
                        std::size_t sample_index) {
    const std::uint64_t sample_seed = derive_seed(opts.seed, sample_index);
    const int n = opts.n_points;
    const double dt = spec.time_horizon / (n - 1);

    Trajectory tr;
    tr.times.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) tr.times[static_cast<std::size_t>(i)] = dt * i;

    tr.controls = sample_controls(spec, tr.times, opts, sample_seed);
    const std::size_t cd = tr.controls.cols();

    auto control_at = [&](double t) {
        std::vector<double> out(cd);
        const double pos = std::clamp(t / dt, 0.0, static_cast<double>(n - 1));
        const std::size_t i = std::min(static_cast<std::size_t>(pos),
                                       static_cast<std::size_t>(n - 2));
        const double frac = pos - static_cast<double>(i);
        for (std::size_t c = 0; c < cd; ++c)
            out[c] = tr.controls(i, c) * (1.0 - frac) + tr.controls(i + 1, c) * frac;
        return out;
    };

    std::vector<double> s = initial_state(spec, derive_seed(sample_seed, "init"), opts);
    tr.states = Array2d(static_cast<std::size_t>(n), s.size());
    std::copy(s.begin(), s.end(), tr.states.row(0).begin());

    const double h_cap = std::min(dt / opts.oversample, stable_step_bound(spec));
    const int substeps = std::max(1, static_cast<int>(std::ceil(dt / h_cap)));
    const double h = dt / substeps;

    for (int step = 0; step + 1 < n; ++step) {
        const double t0 = tr.times[static_cast<std::size_t>(step)];
        for (int sub = 0; sub < substeps; ++sub) rk4_step(spec, s, t0 + sub * h, h, control_at);
        for (double v : s)
            if (!std::isfinite(v) || std::abs(v) > kStateCap)
                throw DivergenceError("generate_dataset: sample " + std::to_string(sample_index) +
                                          " diverged near t=" +
                                          std::to_string(t0 + dt),
                                      t0);
        std::copy(s.begin(), s.end(), tr.states.row(static_cast<std::size_t>(step) + 1).begin());
    }
    return tr;
}

}  // namespace

TimeSeriesDataset generate_dataset(const SystemSpec& spec, const GenerateOptions& opts) {
    if (opts.n_points < 8) throw InvalidInputError("generate_dataset: n_points must be >= 8");
    if (opts.n_samples < 1) throw InvalidInputError("generate_dataset: n_samples must be >= 1");

    TimeSeriesDataset ds;
    ds.kind = spec.kind;
    ds.space = spec.space;
    ds.samples.resize(static_cast<std::size_t>(opts.n_samples));

    std::atomic<bool> failed{false};
    std::string failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(opts.n_samples); ++i) {
        if (failed.load()) continue;
        try {
            ds.samples[static_cast<std::size_t>(i)] =
                generate_one(spec, opts, static_cast<std::size_t>(i));
        } catch (const std::exception& e) {
            bool expected = false;
            if (failed.compare_exchange_strong(expected, true)) failure = e.what();
        }
    }
    if (failed.load()) throw DivergenceError(failure, 0.0);

    if (opts.noise_sd > 0.0) {
        // noise std = sigma_sd * mean(|clean data|) over the whole dataset
        double abs_sum = 0.0;
        std::size_t count = 0;
        for (const auto& tr : ds.samples) {
            for (double v : tr.states.flat()) abs_sum += std::abs(v);
            count += tr.states.size();
        }
        const double sd = opts.noise_sd * (abs_sum / static_cast<double>(count));
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(ds.samples.size()); ++i) {
            Rng rng(derive_seed(derive_seed(opts.seed, "noise"), static_cast<std::uint64_t>(i)));
            for (double& v : ds.samples[static_cast<std::size_t>(i)].states.flat())
                v += sd * rng.gaussian();
        }
    }

    ds.validate();
    return ds;
}

}  // namespace fnode::systems
