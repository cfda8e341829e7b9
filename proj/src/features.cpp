#include "fnode/features.hpp"

#include <algorithm>
#include <cmath>

#include "fnode/errors.hpp"

namespace fnode::features {

void FeatureSpec::validate(const SpaceInfo& space) const {
    if (!space.is_pde()) {
        if (!spatial_orders.empty())
            throw InvalidInputError("FeatureSpec: ODE systems take no spatial gradients");
        if (ns_priors) throw InvalidInputError("FeatureSpec: stream priors require a 2-D grid");
        return;
    }
    if (spatial_orders.empty())
        throw InvalidInputError("FeatureSpec: PDE systems need at least one spatial order");
    for (auto [p, q] : spatial_orders) {
        if (p < 0 || q < 0 || p + q < 1 || p + q > 4)
            throw InvalidInputError("FeatureSpec: spatial orders must satisfy 1 <= p+q <= 4");
        if (space.grid1d && q != 0)
            throw InvalidInputError("FeatureSpec: 1-D grids cannot take y-derivatives");
    }
    if (ns_priors && !space.grid2d)
        throw InvalidInputError("FeatureSpec: stream priors require a 2-D grid");
}

int FeatureSpec::feature_dim(const SpaceInfo& space, int state_dim, int control_dim) const {
    if (!space.is_pde()) return state_dim + (includes_control ? control_dim : 0);
    // pointwise: scalar field value, scalar control value, derivative stack
    int d = 1 + (includes_control ? 1 : 0) + static_cast<int>(spatial_orders.size());
    if (ns_priors) d += 2;
    return d;
}

FeatureSpec FeatureSpec::defaults_for(SystemKind kind) {
    FeatureSpec spec;
    switch (kind) {
        case SystemKind::Parametric2D:
        case SystemKind::Lorenz63:
            break;
        case SystemKind::KDV:
        case SystemKind::DR:
        case SystemKind::KS:
            spec.spatial_orders = {{1, 0}, {2, 0}, {3, 0}, {4, 0}};
            break;
        case SystemKind::NS:
            spec.spatial_orders = {{1, 0}, {0, 1}, {2, 0}, {0, 2}};
            spec.ns_priors = true;
            break;
    }
    return spec;
}

Normalizer Normalizer::fit(const Array2d& rows) {
    if (rows.rows() == 0) throw InvalidInputError("Normalizer: no rows");
    const std::size_t d = rows.cols();
    Normalizer n;
    n.mean.assign(d, 0.0);
    n.inv_std.assign(d, 1.0);
    for (std::size_t r = 0; r < rows.rows(); ++r)
        for (std::size_t c = 0; c < d; ++c) n.mean[c] += rows(r, c);
    const double inv_count = 1.0 / static_cast<double>(rows.rows());
    for (double& m : n.mean) m *= inv_count;
    std::vector<double> var(d, 0.0);
    for (std::size_t r = 0; r < rows.rows(); ++r)
        for (std::size_t c = 0; c < d; ++c) {
            const double x = rows(r, c) - n.mean[c];
            var[c] += x * x;
        }
    for (std::size_t c = 0; c < d; ++c) {
        const double sd = std::sqrt(var[c] * inv_count);
        n.inv_std[c] = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
    return n;
}

Normalizer Normalizer::identity(int dim) {
    Normalizer n;
    n.mean.assign(static_cast<std::size_t>(dim), 0.0);
    n.inv_std.assign(static_cast<std::size_t>(dim), 1.0);
    return n;
}

void Normalizer::apply(std::span<double> row) const {
    if (row.size() != mean.size()) throw ShapeError("Normalizer: row length mismatch");
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - mean[c]) * inv_std[c];
}

void Normalizer::apply_rows(Array2d& rows) const {
    if (rows.cols() != mean.size()) throw ShapeError("Normalizer: column count mismatch");
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows.rows()); ++r)
        for (std::size_t c = 0; c < rows.cols(); ++c)
            rows(static_cast<std::size_t>(r), c) =
                (rows(static_cast<std::size_t>(r), c) - mean[c]) * inv_std[c];
}

void snapshot_features(const FeatureSpec& spec, const SpaceInfo& space,
                       std::span<const double> state, std::span<const double> control,
                       Array2d& rows, std::size_t row_offset) {
    if (!space.is_pde()) {
        auto row = rows.row(row_offset);
        std::size_t at = 0;
        for (double v : state) row[at++] = v;
        if (spec.includes_control)
            for (double v : control) row[at++] = v;
        if (at != rows.cols()) throw ShapeError("snapshot_features: row width mismatch");
        return;
    }

    const std::size_t n_pts = static_cast<std::size_t>(space.points());
    if (state.size() != n_pts || (spec.includes_control && control.size() != n_pts))
        throw ShapeError("snapshot_features: field size does not match grid");

    std::vector<std::vector<double>> stacks;
    stacks.reserve(spec.spatial_orders.size() + 2);
    if (space.grid1d) {
        const Grid1d& g = *space.grid1d;
        for (auto [p, q] : spec.spatial_orders)
            stacks.push_back(spectral::spatial_derivative_1d(state, g.lx, p, g.cutoff));
    } else {
        const spectral::Grid2d& g = *space.grid2d;
        Array2d field(static_cast<std::size_t>(g.nx), static_cast<std::size_t>(g.ny));
        std::copy(state.begin(), state.end(), field.data());
        for (auto [p, q] : spec.spatial_orders) {
            Array2d der = spectral::spatial_derivative_2d(field, g, p, q);
            stacks.emplace_back(der.data(), der.data() + der.size());
        }
        if (spec.ns_priors) {
            auto stream = spectral::ns_stream_features(field, g);
            stacks.emplace_back(stream.vx.data(), stream.vx.data() + stream.vx.size());
            stacks.emplace_back(stream.vy.data(), stream.vy.data() + stream.vy.size());
        }
    }

    for (std::size_t i = 0; i < n_pts; ++i) {
        auto row = rows.row(row_offset + i);
        std::size_t at = 0;
        row[at++] = state[i];
        if (spec.includes_control) row[at++] = control[i];
        for (const auto& s : stacks) row[at++] = s[i];
        if (at != rows.cols()) throw ShapeError("snapshot_features: row width mismatch");
    }
}

Array2d dataset_features(const FeatureSpec& spec, const TimeSeriesDataset& ds) {
    spec.validate(ds.space);
    const std::size_t n_pts = static_cast<std::size_t>(ds.space.points());
    const std::size_t d_i = static_cast<std::size_t>(spec.feature_dim(
        ds.space, static_cast<int>(ds.state_dim()), static_cast<int>(ds.control_dim())));
    const std::size_t n = ds.n_points();
    const std::size_t rows_per_sample = n * n_pts;
    Array2d rows(ds.n_samples() * rows_per_sample, d_i);

    const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(ds.n_samples() * n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t idx = 0; idx < total; ++idx) {
        const std::size_t s = static_cast<std::size_t>(idx) / n;
        const std::size_t t = static_cast<std::size_t>(idx) % n;
        const auto& tr = ds.samples[s];
        snapshot_features(spec, ds.space, tr.states.row(t), tr.controls.row(t), rows,
                          s * rows_per_sample + t * n_pts);
    }
    return rows;
}

}  // namespace fnode::features
