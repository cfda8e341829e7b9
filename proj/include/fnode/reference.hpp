#pragma once

#include <span>

#include "fnode/grf.hpp"
#include "fnode/nn.hpp"
#include "fnode/spectral.hpp"
#include "fnode/training.hpp"

namespace fnode::reference {

/// Serial counterparts of the OpenMP kernels, kept for parity tests and the
/// bench tool. Reductions follow the exact block order of the parallel paths,
/// so those comparisons are bitwise; the direct-summation transforms differ
/// from the FFT route only by roundoff.

/// Direct O(N^2) evaluation of the unnormalized forward DFT.
spectral::Spectrum dft_direct(std::span<const double> series);

/// Direct O(N^2) inverse (real part, 1/N convention).
std::vector<double> idft_direct_real(const spectral::Spectrum& coeffs);

/// Serial single-thread batch loss/gradient with the production block order.
nn::LossGradResult loss_and_grad_serial(const nn::MlpModel& model, const Array2d& inputs,
                                        const Array2d& targets, nn::LossForm form,
                                        std::span<const double> row_weights = {});

/// Serial RBF covariance.
Array2d covariance_serial(std::span<const double> points, int dim, double length_scale);

/// Serial Fourier gradient targets (same seam bridge, sample by sample).
training::TargetSet build_targets_serial(const TimeSeriesDataset& ds, int cutoff,
                                         int detrend_order = 2, double seam_fraction = 0.05);

}  // namespace fnode::reference
