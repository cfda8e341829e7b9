#include "fnode/grf.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>

#include "fnode/errors.hpp"
#include "fnode/rng.hpp"

namespace fnode::grf {

Array2d covariance(std::span<const double> points, int dim, double length_scale) {
    if (dim != 1 && dim != 2) throw InvalidInputError("grf::covariance: dim must be 1 or 2");
    if (!(length_scale > 0.0)) throw InvalidInputError("grf::covariance: length_scale must be > 0");
    if (points.empty() || points.size() % static_cast<std::size_t>(dim) != 0)
        throw InvalidInputError("grf::covariance: point block size must be a positive multiple of dim");
    const std::size_t n = points.size() / static_cast<std::size_t>(dim);
    const double inv2l2 = 1.0 / (2.0 * length_scale * length_scale);
    Array2d k(n, n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        const std::size_t iu = static_cast<std::size_t>(i);
        k(iu, iu) = 1.0;
        for (std::size_t j = iu + 1; j < n; ++j) {
            double d2 = 0.0;
            for (int c = 0; c < dim; ++c) {
                const double d = points[iu * dim + static_cast<std::size_t>(c)] -
                                 points[j * dim + static_cast<std::size_t>(c)];
                d2 += d * d;
            }
            k(iu, j) = std::exp(-d2 * inv2l2);
        }
    }
    // mirror the upper triangle
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) k(j, i) = k(i, j);
    return k;
}

std::vector<double> sample(std::span<const double> points, int dim, const GrfConfig& config,
                           std::uint64_t seed) {
    if (!(config.length_scale > 0.0)) throw InvalidInputError("grf::sample: length_scale must be > 0");
    if (!(config.jitter > 0.0)) throw InvalidInputError("grf::sample: jitter must be > 0");
    const Array2d cov = covariance(points, dim, config.length_scale);
    const std::size_t n = cov.rows();

    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> kmat(cov.data(), static_cast<Eigen::Index>(n),
                               static_cast<Eigen::Index>(n));

    Mat l;
    bool ok = false;
    for (double jitter = config.jitter; jitter <= 1e-4 * (1.0 + 1e-12); jitter *= 10.0) {
        Mat a = kmat;
        a.diagonal().array() += jitter;
        Eigen::LLT<Mat> llt(a);
        if (llt.info() == Eigen::Success) {
            l = llt.matrixL();
            ok = true;
            break;
        }
    }
    if (!ok) throw NumericalError("grf::sample: covariance not positive definite after jitter escalation");

    Rng rng(seed);
    Eigen::VectorXd z(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) z[static_cast<Eigen::Index>(i)] = rng.gaussian();

    const Eigen::VectorXd lz = l * z;
    std::vector<double> out(n);
    // mean + c*(L z): the zero-mean field scales exactly with c
    for (std::size_t i = 0; i < n; ++i)
        out[i] = config.mean + config.output_scale * lz[static_cast<Eigen::Index>(i)];
    return out;
}

std::vector<double> sample_1d(std::span<const double> coords, const GrfConfig& config,
                              std::uint64_t seed) {
    return sample(coords, 1, config, seed);
}

Array2d sample_grid2d(int nx, int ny, double lx, double ly, const GrfConfig& config,
                      std::uint64_t seed) {
    if (nx < 1 || ny < 1) throw InvalidInputError("grf::sample_grid2d: grid must be non-empty");
    std::vector<double> pts;
    pts.reserve(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * 2);
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            pts.push_back(lx * i / nx);
            pts.push_back(ly * j / ny);
        }
    }
    const auto flat = sample(pts, 2, config, seed);
    Array2d out(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny));
    std::copy(flat.begin(), flat.end(), out.data());
    return out;
}

}  // namespace fnode::grf
