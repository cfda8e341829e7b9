#pragma once

#include <cstdint>
#include <span>

#include "fnode/dataset.hpp"
#include "fnode/grf.hpp"

namespace fnode::systems {

/// Identity and parameters of one benchmark system. Factory functions carry
/// the published domain sizes and coefficients; everything stays overridable.
struct SystemSpec {
    SystemKind kind = SystemKind::Parametric2D;
    SpaceInfo space;
    double time_horizon = 10.0;

    double dr_diffusion = 0.01;
    double dr_reaction = 0.01;
    double ns_viscosity = 0.001;
    double init_scale = 1.0;  // half-width of the uniform box for random initial states

    bool is_pde() const { return space.is_pde(); }
    int state_dim() const;
    int control_dim() const;

    static SystemSpec parametric2d(double horizon = 10.0);
    static SystemSpec lorenz63(double horizon = 10.0);
    static SystemSpec kdv(int nx = 64, double horizon = 20.0);
    static SystemSpec dr(int nx = 64, double horizon = 1.0);
    static SystemSpec ks(int nx = 64, double horizon = 20.0);
    static SystemSpec ns(int nx = 32, int ny = 32, double horizon = 10.0);
};

/// ds/dt = A s^3 + u (cube elementwise), A = [[-0.1, 2.0], [-2.0, -0.1]].
void rhs_parametric2d(std::span<const double> s, std::span<const double> u,
                      std::span<double> out);

/// (10(y-x), rho*x - y - x z, x y - (8/3) z).
void rhs_lorenz63(std::span<const double> s, double rho, std::span<double> out);

/// Pseudospectral right-hand side of the named PDE on the spec's grid, full
/// spectral band. `control` is the control field at the same instant.
std::vector<double> rhs_pde(const SystemSpec& spec, std::span<const double> field,
                            std::span<const double> control);

/// Dispatches to the system's RHS given state and control vectors.
std::vector<double> rhs_true(const SystemSpec& spec, std::span<const double> state,
                             std::span<const double> control);

/// Closed-form initial profile for KDV/DR/KS.
std::vector<double> pde_initial_profile(const SystemSpec& spec);

/// Spatial control profile g(x) with u(x,t) = g(x) + u1(t) for the 1-D PDEs.
std::vector<double> pde_control_profile(const SystemSpec& spec);

/// Largest stable explicit RK4 step for the system's linear terms (infinite
/// when the system is non-stiff at the modeled scales).
double stable_step_bound(const SystemSpec& spec);

struct GenerateOptions {
    int n_samples = 0;
    int n_points = 0;
    std::uint64_t seed = 0;
    double noise_sd = 0.0;          // sigma_sd: noise std as a fraction of mean |data|
    grf::GrfConfig control_grf;     // time-dependent control component
    grf::GrfConfig ns_space_grf;    // NS u0(x,y)
    grf::GrfConfig ns_init_grf;     // NS initial vorticity
    int oversample = 20;            // reference RK4 substeps per sample interval
};

/// Integrates the true dynamics under freshly sampled controls. Controls are
/// sampled on the output grid and defined between samples by linear
/// interpolation (the same convention rollouts use). Per-sample seeds derive
/// from (seed, sample index), so generation order cannot change results.
TimeSeriesDataset generate_dataset(const SystemSpec& spec, const GenerateOptions& opts);

}  // namespace fnode::systems
