#pragma once

#include <span>
#include <utility>
#include <vector>

#include "fnode/array.hpp"
#include "fnode/dataset.hpp"

namespace fnode::features {

/// What the vector-field network sees at one point: state, control (when
/// included), spatial derivatives in listed order, stream-function priors
/// last (NS only).
struct FeatureSpec {
    bool includes_control = true;
    std::vector<std::pair<int, int>> spatial_orders;  // (p, q); q = 0 on 1-D grids
    bool ns_priors = false;

    void validate(const SpaceInfo& space) const;
    /// Per-point feature length for a dataset with this space layout.
    int feature_dim(const SpaceInfo& space, int state_dim, int control_dim) const;

    /// Published defaults: ODEs take state+control; 1-D PDEs add d/dx..d4/dx4;
    /// NS adds (1,0),(0,1),(2,0),(0,2) plus the two inverse-Laplacian priors.
    static FeatureSpec defaults_for(SystemKind kind);
};

/// Per-dimension standardization fitted on training rows; stored in the
/// checkpoint so rollouts see the same scaling.
struct Normalizer {
    std::vector<double> mean, inv_std;

    static Normalizer fit(const Array2d& rows);
    static Normalizer identity(int dim);
    void apply_rows(Array2d& rows) const;
    void apply(std::span<double> row) const;
};

/// Rows of network input for one time snapshot. For ODE systems the result is
/// a single row [state, control]; for PDE systems one row per grid point.
/// `rows` must be pre-shaped (space points x feature_dim).
void snapshot_features(const FeatureSpec& spec, const SpaceInfo& space,
                       std::span<const double> state, std::span<const double> control,
                       Array2d& rows, std::size_t row_offset = 0);

/// Rows for every (sample, time, point) of a dataset, sample-major.
Array2d dataset_features(const FeatureSpec& spec, const TimeSeriesDataset& ds);

}  // namespace fnode::features
