#include "fnode/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "fnode/errors.hpp"

namespace fnode::spectral {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// One shared FFTW plan per (n0, n1, sign). Planning is not thread-safe, so it
// sits behind a mutex; execution uses the new-array interface on caller
// buffers, which is safe concurrently. UNALIGNED keeps new-array execution
// valid for any buffer the caller hands us.
class PlanCache {
  public:
    fftw_plan get(int n0, int n1, int sign) {
        const auto key = std::make_tuple(n0, n1, sign);
        std::scoped_lock lock(mu_);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        const std::size_t n = static_cast<std::size_t>(n0) * (n1 > 0 ? n1 : 1);
        fftw_complex* in = fftw_alloc_complex(n);
        fftw_complex* out = fftw_alloc_complex(n);
        fftw_plan p = n1 > 0
                          ? fftw_plan_dft_2d(n0, n1, in, out, sign, FFTW_ESTIMATE | FFTW_UNALIGNED)
                          : fftw_plan_dft_1d(n0, in, out, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(in);
        fftw_free(out);
        plans_.emplace(key, p);
        return p;
    }

  private:
    std::mutex mu_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

void exec_dft(int n0, int n1, int sign, const Complex* in, Complex* out) {
    fftw_plan p = plan_cache().get(n0, n1, sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

void require_finite(std::span<const double> series, const char* what) {
    for (double v : series)
        if (!std::isfinite(v)) throw InvalidInputError(std::string(what) + ": non-finite input");
}

// Imaginary residue left after inverting what should be a real field. The
// bound scales with the field so large-amplitude states do not trip it.
std::vector<double> take_real_checked(const Spectrum& inv, const char* what) {
    double max_imag = 0.0, max_real = 0.0;
    for (const Complex& c : inv) {
        max_imag = std::max(max_imag, std::abs(c.imag()));
        max_real = std::max(max_real, std::abs(c.real()));
    }
    if (max_imag > 1e-8 * std::max(1.0, max_real))
        throw InternalError(std::string(what) + ": imaginary residue " +
                            std::to_string(max_imag) + " exceeds tolerance");
    std::vector<double> out(inv.size());
    for (std::size_t i = 0; i < inv.size(); ++i) out[i] = inv[i].real();
    return out;
}

}  // namespace

std::vector<int> signed_wavenumbers(int n) {
    std::vector<int> k(static_cast<std::size_t>(n));
    const int half = (n + 1) / 2;  // ceil(n/2)
    for (int j = 0; j < n; ++j) k[static_cast<std::size_t>(j)] = j < half ? j : j - n;
    return k;
}

SpectralPlan SpectralPlan::create(int n_points, double period, int cutoff) {
    if (n_points < 2) throw InvalidInputError("SpectralPlan: n_points must be >= 2");
    if (!(period > 0.0)) throw InvalidInputError("SpectralPlan: period must be positive");
    if (cutoff < 1 || cutoff > n_points / 2)
        throw InvalidInputError("SpectralPlan: cutoff must satisfy 1 <= K <= floor(N/2), got K=" +
                                std::to_string(cutoff) + " N=" + std::to_string(n_points));
    SpectralPlan plan;
    plan.n_points = n_points;
    plan.period = period;
    plan.cutoff = cutoff;
    plan.signed_freqs.resize(static_cast<std::size_t>(n_points));
    const auto k = signed_wavenumbers(n_points);
    for (int j = 0; j < n_points; ++j)
        plan.signed_freqs[static_cast<std::size_t>(j)] = kTwoPi * k[static_cast<std::size_t>(j)] / period;
    return plan;
}

Grid2d Grid2d::create(int nx, int ny, double lx, double ly, int cutoff_x, int cutoff_y) {
    if (nx < 4 || ny < 4) throw InvalidInputError("Grid2d: nx, ny must be >= 4");
    if (!(lx > 0.0) || !(ly > 0.0)) throw InvalidInputError("Grid2d: lengths must be positive");
    if (cutoff_x < 1 || cutoff_x > nx / 2 || cutoff_y < 1 || cutoff_y > ny / 2)
        throw InvalidInputError("Grid2d: cutoffs must satisfy 1 <= K <= N/2");
    return Grid2d{nx, ny, lx, ly, cutoff_x, cutoff_y};
}

Grid2d Grid2d::full(int nx, int ny, double lx, double ly) {
    return create(nx, ny, lx, ly, nx / 2, ny / 2);
}

Spectrum dft(std::span<const double> series) {
    if (series.size() < 2) throw InvalidInputError("dft: need at least 2 samples");
    require_finite(series, "dft");
    Spectrum in(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) in[i] = Complex(series[i], 0.0);
    Spectrum out(series.size());
    exec_dft(static_cast<int>(series.size()), 0, FFTW_FORWARD, in.data(), out.data());
    return out;
}

std::vector<double> idft_real(const Spectrum& coeffs) {
    if (coeffs.size() < 2) throw InvalidInputError("idft_real: need at least 2 coefficients");
    Spectrum inv(coeffs.size());
    exec_dft(static_cast<int>(coeffs.size()), 0, FFTW_BACKWARD, coeffs.data(), inv.data());
    const double scale = 1.0 / static_cast<double>(coeffs.size());
    for (Complex& c : inv) c *= scale;
    return take_real_checked(inv, "idft_real");
}

Spectrum dft2(const Array2d& field) {
    if (field.rows() < 2 || field.cols() < 2) throw InvalidInputError("dft2: need >= 2x2 field");
    require_finite(field.flat(), "dft2");
    Spectrum in(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) in[i] = Complex(field.data()[i], 0.0);
    Spectrum out(field.size());
    exec_dft(static_cast<int>(field.rows()), static_cast<int>(field.cols()), FFTW_FORWARD,
             in.data(), out.data());
    return out;
}

Array2d idft2_real(const Spectrum& coeffs, int nx, int ny) {
    if (coeffs.size() != static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny))
        throw ShapeError("idft2_real: coefficient count does not match nx*ny");
    Spectrum inv(coeffs.size());
    exec_dft(nx, ny, FFTW_BACKWARD, coeffs.data(), inv.data());
    const double scale = 1.0 / static_cast<double>(coeffs.size());
    for (Complex& c : inv) c *= scale;
    const auto real = take_real_checked(inv, "idft2_real");
    Array2d out(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny));
    std::copy(real.begin(), real.end(), out.data());
    return out;
}

std::vector<double> temporal_derivative(std::span<const double> series, const SpectralPlan& plan) {
    if (series.size() != static_cast<std::size_t>(plan.n_points))
        throw ShapeError("temporal_derivative: series length " + std::to_string(series.size()) +
                         " does not match plan n_points " + std::to_string(plan.n_points));
    Spectrum coeffs = dft(series);
    const auto k = signed_wavenumbers(plan.n_points);
    const bool even = plan.n_points % 2 == 0;
    for (int j = 0; j < plan.n_points; ++j) {
        const std::size_t ju = static_cast<std::size_t>(j);
        const bool nyquist = even && j == plan.n_points / 2;
        if (std::abs(k[ju]) > plan.cutoff || nyquist) {
            coeffs[ju] = Complex(0.0, 0.0);
        } else {
            coeffs[ju] *= Complex(0.0, plan.signed_freqs[ju]);
        }
    }
    return idft_real(coeffs);
}

std::vector<double> spatial_derivative_1d(std::span<const double> field, double length, int order,
                                          int cutoff) {
    if (order < 0 || order > 4)
        throw UnsupportedOrderError("spatial_derivative_1d: order must be in {0,...,4}, got " +
                                    std::to_string(order));
    if (field.size() < 4) throw InvalidInputError("spatial_derivative_1d: field length must be >= 4");
    if (!(length > 0.0)) throw InvalidInputError("spatial_derivative_1d: length must be positive");
    const int n = static_cast<int>(field.size());
    if (cutoff < 1 || cutoff > n / 2)
        throw InvalidInputError("spatial_derivative_1d: cutoff out of range");

    Spectrum coeffs = dft(field);
    const auto k = signed_wavenumbers(n);
    const bool even = n % 2 == 0;
    const bool odd_order = order % 2 == 1;
    for (int j = 0; j < n; ++j) {
        const std::size_t ju = static_cast<std::size_t>(j);
        const bool nyquist = even && j == n / 2;
        if (std::abs(k[ju]) > cutoff || (nyquist && odd_order)) {
            coeffs[ju] = Complex(0.0, 0.0);
            continue;
        }
        const Complex ik(0.0, kTwoPi * k[ju] / length);
        Complex factor(1.0, 0.0);
        for (int m = 0; m < order; ++m) factor *= ik;
        coeffs[ju] *= factor;
    }
    return idft_real(coeffs);
}

Array2d spatial_derivative_2d(const Array2d& field, const Grid2d& grid, int p, int q) {
    if (p < 0 || q < 0 || p + q > 4)
        throw UnsupportedOrderError("spatial_derivative_2d: need p,q >= 0 and p+q <= 4");
    field.require_shape(static_cast<std::size_t>(grid.nx), static_cast<std::size_t>(grid.ny),
                        "spatial_derivative_2d");

    Spectrum coeffs = dft2(field);
    const auto kx = signed_wavenumbers(grid.nx);
    const auto ky = signed_wavenumbers(grid.ny);
    const bool even_x = grid.nx % 2 == 0, even_y = grid.ny % 2 == 0;
    for (int jx = 0; jx < grid.nx; ++jx) {
        const bool nyq_x = even_x && jx == grid.nx / 2;
        const Complex ikx(0.0, kTwoPi * kx[static_cast<std::size_t>(jx)] / grid.lx);
        for (int jy = 0; jy < grid.ny; ++jy) {
            const std::size_t idx = static_cast<std::size_t>(jx) * grid.ny + jy;
            const bool nyq_y = even_y && jy == grid.ny / 2;
            if (std::abs(kx[static_cast<std::size_t>(jx)]) > grid.cutoff_x ||
                std::abs(ky[static_cast<std::size_t>(jy)]) > grid.cutoff_y ||
                (nyq_x && p % 2 == 1) || (nyq_y && q % 2 == 1)) {
                coeffs[idx] = Complex(0.0, 0.0);
                continue;
            }
            const Complex iky(0.0, kTwoPi * ky[static_cast<std::size_t>(jy)] / grid.ly);
            Complex factor(1.0, 0.0);
            for (int m = 0; m < p; ++m) factor *= ikx;
            for (int m = 0; m < q; ++m) factor *= iky;
            coeffs[idx] *= factor;
        }
    }
    return idft2_real(coeffs, grid.nx, grid.ny);
}

StreamFeatures ns_stream_features(const Array2d& vorticity, const Grid2d& grid) {
    vorticity.require_shape(static_cast<std::size_t>(grid.nx), static_cast<std::size_t>(grid.ny),
                            "ns_stream_features");
    const Spectrum coeffs = dft2(vorticity);
    Spectrum cx(coeffs.size()), cy(coeffs.size());
    const auto kxi = signed_wavenumbers(grid.nx);
    const auto kyi = signed_wavenumbers(grid.ny);
    const bool even_x = grid.nx % 2 == 0, even_y = grid.ny % 2 == 0;
    for (int jx = 0; jx < grid.nx; ++jx) {
        const double kx = kTwoPi * kxi[static_cast<std::size_t>(jx)] / grid.lx;
        const bool nyq_x = even_x && jx == grid.nx / 2;
        for (int jy = 0; jy < grid.ny; ++jy) {
            const std::size_t idx = static_cast<std::size_t>(jx) * grid.ny + jy;
            const double ky = kTwoPi * kyi[static_cast<std::size_t>(jy)] / grid.ly;
            const bool nyq_y = even_y && jy == grid.ny / 2;
            const double k2 = kx * kx + ky * ky;
            if (k2 == 0.0) {  // gauge: stream function defined up to a constant
                cx[idx] = cy[idx] = Complex(0.0, 0.0);
                continue;
            }
            cx[idx] = nyq_x ? Complex(0.0, 0.0) : Complex(0.0, kx / k2) * coeffs[idx];
            cy[idx] = nyq_y ? Complex(0.0, 0.0) : Complex(0.0, ky / k2) * coeffs[idx];
        }
    }
    StreamFeatures out;
    out.vx = idft2_real(cx, grid.nx, grid.ny);
    out.vy = idft2_real(cy, grid.nx, grid.ny);
    return out;
}

long derivative_term_count(int spatial_dim, int max_order) {
    if (spatial_dim < 1) throw InvalidInputError("derivative_term_count: spatial_dim must be >= 1");
    if (max_order < 0) throw InvalidInputError("derivative_term_count: max_order must be >= 0");
    // S_1(d) = d+1; S_D(d) = sum_{i=0}^{d} S_{D-1}(i)
    std::vector<long> s(static_cast<std::size_t>(max_order) + 1);
    for (int d = 0; d <= max_order; ++d) s[static_cast<std::size_t>(d)] = d + 1;
    for (int dim = 2; dim <= spatial_dim; ++dim) {
        long running = 0;
        for (int d = 0; d <= max_order; ++d) {
            running += s[static_cast<std::size_t>(d)];
            s[static_cast<std::size_t>(d)] = running;
        }
    }
    return s[static_cast<std::size_t>(max_order)];
}

namespace {

// Spectrum-domain resampling n -> m: copy representable modes, split or fold
// the Nyquist bin, rescale by m/n to account for the unnormalized transform.
Spectrum resample_spectrum(const Spectrum& c, int n, int m) {
    Spectrum d(static_cast<std::size_t>(m), Complex(0.0, 0.0));
    const auto k_old = signed_wavenumbers(n);
    auto bin_of = [m](int k) { return static_cast<std::size_t>(k >= 0 ? k : k + m); };
    const int new_half = m / 2;
    for (int j = 0; j < n; ++j) {
        const int k = k_old[static_cast<std::size_t>(j)];
        const Complex v = c[static_cast<std::size_t>(j)];
        const bool old_nyquist = n % 2 == 0 && j == n / 2;
        if (old_nyquist) {
            const int a = n / 2;
            if (a < new_half) {  // upsampling: split the cosine across +/- bins
                d[bin_of(a)] += 0.5 * v;
                d[bin_of(-a)] += 0.5 * v;
            } else if (a == new_half && m % 2 == 0) {
                d[bin_of(-a)] += v;
            }  // else dropped
            continue;
        }
        if (std::abs(k) < new_half || (std::abs(k) == new_half && m % 2 == 1)) {
            d[bin_of(k)] += v;
        } else if (std::abs(k) == new_half && m % 2 == 0) {
            d[static_cast<std::size_t>(new_half)] += v;  // folds into the new Nyquist
        }  // else dropped
    }
    const double scale = static_cast<double>(m) / static_cast<double>(n);
    for (Complex& v : d) v *= scale;
    return d;
}

}  // namespace

std::vector<double> resample_1d(std::span<const double> field, int new_n) {
    if (new_n < 2) throw InvalidInputError("resample_1d: new_n must be >= 2");
    const int n = static_cast<int>(field.size());
    if (n == new_n) return std::vector<double>(field.begin(), field.end());
    const Spectrum d = resample_spectrum(dft(field), n, new_n);
    return idft_real(d);
}

Array2d resample_2d(const Array2d& field, int new_nx, int new_ny) {
    // Trigonometric interpolation is separable: resample columns, then rows.
    Array2d mid(static_cast<std::size_t>(new_nx), field.cols());
    std::vector<double> col(field.rows());
    for (std::size_t c = 0; c < field.cols(); ++c) {
        for (std::size_t r = 0; r < field.rows(); ++r) col[r] = field(r, c);
        const auto rc = resample_1d(col, new_nx);
        for (std::size_t r = 0; r < rc.size(); ++r) mid(r, c) = rc[r];
    }
    Array2d out(static_cast<std::size_t>(new_nx), static_cast<std::size_t>(new_ny));
    for (std::size_t r = 0; r < mid.rows(); ++r) {
        const auto rr = resample_1d(mid.row(r), new_ny);
        std::copy(rr.begin(), rr.end(), out.row(r).begin());
    }
    return out;
}

}  // namespace fnode::spectral
