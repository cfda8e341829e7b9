#pragma once

#include <complex>
#include <span>
#include <vector>

#include "fnode/array.hpp"

namespace fnode::spectral {

using Complex = std::complex<double>;
/// Unnormalized forward coefficients ordered by FFT bin index
/// (bin j carries signed wavenumber k_j, see signed_wavenumbers).
using Spectrum = std::vector<Complex>;

/// Signed integer wavenumbers {0,...,ceil(n/2)-1, -floor(n/2),...,-1} in bin
/// order. For even n the Nyquist bin sits at j = n/2 with k = -n/2.
std::vector<int> signed_wavenumbers(int n);

/// Precomputed frequencies and truncation cutoff for one periodic axis.
struct SpectralPlan {
    int n_points = 0;
    double period = 0.0;
    int cutoff = 0;
    std::vector<double> signed_freqs;  // 2*pi*k_j/period per bin

    /// Validates n_points >= 2, period > 0 and 1 <= cutoff <= floor(n/2).
    static SpectralPlan create(int n_points, double period, int cutoff);
};

/// Periodic rectangle sampled nx x ny with per-axis truncation cutoffs.
struct Grid2d {
    int nx = 0, ny = 0;
    double lx = 0.0, ly = 0.0;
    int cutoff_x = 0, cutoff_y = 0;

    static Grid2d create(int nx, int ny, double lx, double ly, int cutoff_x, int cutoff_y);
    /// Full-band grid (cutoffs at nx/2, ny/2).
    static Grid2d full(int nx, int ny, double lx, double ly);
    double dx() const { return lx / nx; }
    double dy() const { return ly / ny; }
};

/// Forward DFT, coefficient k = sum_n s_n e^{-i 2 pi n k / N}.
Spectrum dft(std::span<const double> series);
/// Inverse of dft up to the 1/N factor; checks the imaginary residue and
/// returns the real part.
std::vector<double> idft_real(const Spectrum& coeffs);

/// Row-major 2-D transforms; field is nx rows by ny columns.
Spectrum dft2(const Array2d& field);
Array2d idft2_real(const Spectrum& coeffs, int nx, int ny);

/// d/dt by multiplying coefficients with i*omega_k, zeroing |k| > cutoff and
/// the Nyquist bin (odd derivative order), then inverting.
std::vector<double> temporal_derivative(std::span<const double> series, const SpectralPlan& plan);

/// d^order/dx^order on a periodic 1-D field of physical length `length`,
/// truncated at |k| > cutoff. order must be in {0,...,4}.
std::vector<double> spatial_derivative_1d(std::span<const double> field, double length,
                                          int order, int cutoff);

/// d^{p+q}/dx^p dy^q with per-axis truncation from the grid. p + q <= 4.
Array2d spatial_derivative_2d(const Array2d& field, const Grid2d& grid, int p, int q);

/// Velocity components recovered from vorticity through the stream function
/// gamma with laplacian(gamma) = -vorticity: vx = d gamma/dx, vy = d gamma/dy,
/// i.e. the inverse-Laplacian spectral features i*kx/(kx^2+ky^2) and
/// i*ky/(kx^2+ky^2). The (0,0) mode is gauged to zero.
struct StreamFeatures {
    Array2d vx, vy;
};
StreamFeatures ns_stream_features(const Array2d& vorticity, const Grid2d& grid);

/// Number of distinct spatial-derivative terms up to total order max_order in
/// spatial_dim dimensions: S_1(d) = d+1, S_D(d) = sum_{i<=d} S_{D-1}(i).
long derivative_term_count(int spatial_dim, int max_order);

/// Trigonometric resampling onto new_n points (zero padding / truncation of
/// the spectrum with Nyquist splitting). Exact for band-limited fields.
std::vector<double> resample_1d(std::span<const double> field, int new_n);
Array2d resample_2d(const Array2d& field, int new_nx, int new_ny);

}  // namespace fnode::spectral
