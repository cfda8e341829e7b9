#include "fnode/reference.hpp"

#include <cmath>
#include <numbers>

#include "fnode/errors.hpp"

namespace fnode::reference {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

spectral::Spectrum dft_direct(std::span<const double> series) {
    const std::size_t n = series.size();
    if (n < 2) throw InvalidInputError("dft_direct: need at least 2 samples");
    spectral::Spectrum out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double angle = -kTwoPi * static_cast<double>(i) * static_cast<double>(k) /
                                 static_cast<double>(n);
            acc += series[i] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        out[k] = acc;
    }
    return out;
}

std::vector<double> idft_direct_real(const spectral::Spectrum& coeffs) {
    const std::size_t n = coeffs.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const double angle = kTwoPi * static_cast<double>(i) * static_cast<double>(k) /
                                 static_cast<double>(n);
            acc += coeffs[k] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        out[i] = acc.real() / static_cast<double>(n);
    }
    return out;
}

nn::LossGradResult loss_and_grad_serial(const nn::MlpModel& model, const Array2d& inputs,
                                        const Array2d& targets, nn::LossForm form,
                                        std::span<const double> row_weights) {
    if (inputs.rows() == 0) throw InvalidInputError("loss_and_grad_serial: empty batch");
    const std::size_t rows = inputs.rows();
    const std::size_t d_out = targets.cols();
    const std::size_t n_blocks = nn::reduction_block_count(rows);
    const std::size_t per_block = (rows + n_blocks - 1) / n_blocks;

    double weight_total = 0.0;
    if (row_weights.empty()) {
        weight_total = static_cast<double>(rows);
    } else {
        for (double w : row_weights) weight_total += w;
    }

    std::vector<std::vector<double>> block_grads(n_blocks);
    std::vector<double> block_loss(n_blocks, 0.0);
    nn::MlpWorkspace ws(model);
    std::vector<double> y(d_out), cot(d_out);

    for (std::size_t b = 0; b < n_blocks; ++b) {
        auto& grads = block_grads[b];
        grads.assign(model.n_params(), 0.0);
        const std::size_t lo = b * per_block;
        const std::size_t hi = std::min(rows, lo + per_block);
        double loss_sum = 0.0;
        for (std::size_t r = lo; r < hi; ++r) {
            const double w = row_weights.empty() ? 1.0 : row_weights[r];
            if (w == 0.0) continue;
            ws.forward(model, inputs.row(r), y);
            double sq = 0.0;
            for (std::size_t c = 0; c < d_out; ++c) {
                const double res = y[c] - targets(r, c);
                cot[c] = res;
                sq += res * res;
            }
            if (form == nn::LossForm::MeanSquared) {
                loss_sum += w * sq;
                for (double& v : cot) v *= 2.0 * w / weight_total;
            } else {
                const double norm = std::sqrt(sq);
                loss_sum += w * norm;
                const double scale = norm > 0.0 ? w / (weight_total * norm) : 0.0;
                for (double& v : cot) v *= scale;
            }
            ws.backward(model, cot, grads);
        }
        block_loss[b] = loss_sum;
    }

    nn::LossGradResult out;
    out.grads.assign(model.n_params(), 0.0);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        loss_sum += block_loss[b];
        for (std::size_t i = 0; i < out.grads.size(); ++i) out.grads[i] += block_grads[b][i];
    }
    out.loss = loss_sum / weight_total;
    return out;
}

Array2d covariance_serial(std::span<const double> points, int dim, double length_scale) {
    if (dim != 1 && dim != 2) throw InvalidInputError("covariance_serial: dim must be 1 or 2");
    const std::size_t n = points.size() / static_cast<std::size_t>(dim);
    const double inv2l2 = 1.0 / (2.0 * length_scale * length_scale);
    Array2d k(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double d2 = 0.0;
            for (int c = 0; c < dim; ++c) {
                const double d = points[i * dim + static_cast<std::size_t>(c)] -
                                 points[j * dim + static_cast<std::size_t>(c)];
                d2 += d * d;
            }
            k(i, j) = std::exp(-d2 * inv2l2);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) k(j, i) = k(i, j);
    return k;
}

training::TargetSet build_targets_serial(const TimeSeriesDataset& ds, int cutoff,
                                         int detrend_order, double seam_fraction) {
    ds.validate();
    if (!ds.uniform_spacing())
        throw InvalidInputError("build_targets_serial: requires uniform sampling");
    const std::size_t n = ds.n_points();
    const std::size_t sd = ds.state_dim();
    const double dt = ds.dt();
    const double period = dt * static_cast<double>(n);
    if (cutoff < 1 || cutoff > static_cast<int>(n) / 2)
        throw InvalidInputError("build_targets_serial: cutoff out of range");

    training::TargetSet out;
    out.targets.assign(ds.n_samples(), Array2d(n, sd));
    out.time_weights.assign(n, 1.0);
    const std::size_t seam = static_cast<std::size_t>(std::floor(seam_fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < seam && i < n; ++i) {
        out.time_weights[i] = 0.0;
        out.time_weights[n - 1 - i] = 0.0;
    }

    const auto wavenumbers = spectral::signed_wavenumbers(static_cast<int>(n));
    std::vector<double> series(n), detrended(n), slope(n);

    for (std::size_t s = 0; s < ds.n_samples(); ++s) {
        for (std::size_t c = 0; c < sd; ++c) {
            for (std::size_t t = 0; t < n; ++t) series[t] = ds.samples[s].states(t, c);

            double value_gap = 0.0, slope_gap = 0.0;
            if (detrend_order >= 1) {
                const double s_wrap = 4.0 * series[n - 1] - 6.0 * series[n - 2] +
                                      4.0 * series[n - 3] - series[n - 4];
                value_gap = s_wrap - series[0];
                if (detrend_order >= 2) {
                    const double d0 = (-11.0 * series[0] + 18.0 * series[1] - 9.0 * series[2] +
                                       2.0 * series[3]) /
                                      (6.0 * dt);
                    const double d1 = (11.0 * s_wrap - 18.0 * series[n - 1] + 9.0 * series[n - 2] -
                                       2.0 * series[n - 3]) /
                                      (6.0 * dt);
                    slope_gap = d1 - d0;
                }
            }
            for (std::size_t t = 0; t < n; ++t) {
                const double tau = static_cast<double>(t) / static_cast<double>(n);
                detrended[t] = series[t] - value_gap * tau -
                               slope_gap * period * (0.5 * tau * tau - 0.5 * tau);
                slope[t] = (detrend_order >= 1 ? value_gap / period : 0.0) +
                           (detrend_order >= 2 ? slope_gap * (tau - 0.5) : 0.0);
            }

            auto coeffs = dft_direct(detrended);
            for (std::size_t j = 0; j < n; ++j) {
                const int k = wavenumbers[j];
                const bool nyquist = n % 2 == 0 && j == n / 2;
                if (std::abs(k) > cutoff || nyquist) {
                    coeffs[j] = {0.0, 0.0};
                } else {
                    coeffs[j] *= std::complex<double>(0.0, kTwoPi * k / period);
                }
            }
            const auto deriv = idft_direct_real(coeffs);
            for (std::size_t t = 0; t < n; ++t) out.targets[s](t, c) = deriv[t] + slope[t];
        }
    }
    return out;
}

}  // namespace fnode::reference
