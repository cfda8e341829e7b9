#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fnode/array.hpp"

namespace fnode::grf {

/// Gaussian random field with squared-exponential covariance
/// k(x1, x2) = exp(-||x1 - x2||^2 / (2 l^2)); samples are mean + c * L z.
struct GrfConfig {
    double mean = 0.0;
    double length_scale = 1.0;
    double output_scale = 1.0;
    double jitter = 1e-8;
};

/// RBF covariance over points given as a flat row-major (n x dim) block,
/// dim in {1, 2}. Returns a row-major n x n matrix with unit diagonal.
Array2d covariance(std::span<const double> points, int dim, double length_scale);

/// One seeded draw. The Cholesky factor of covariance + jitter*I feeds a
/// deterministic standard-normal stream; jitter escalates tenfold up to 1e-4
/// before giving up with a NumericalError.
std::vector<double> sample(std::span<const double> points, int dim, const GrfConfig& config,
                           std::uint64_t seed);

/// Convenience wrappers for the two point sets used in practice.
std::vector<double> sample_1d(std::span<const double> coords, const GrfConfig& config,
                              std::uint64_t seed);
/// Row-major nx x ny field over the rectangle [0,lx) x [0,ly).
Array2d sample_grid2d(int nx, int ny, double lx, double ly, const GrfConfig& config,
                      std::uint64_t seed);

}  // namespace fnode::grf
