#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fnode/array.hpp"
#include "fnode/spectral.hpp"

namespace fnode {

enum class SystemKind { Parametric2D, Lorenz63, KDV, DR, KS, NS };

std::string to_string(SystemKind kind);
SystemKind system_kind_from_string(const std::string& name);

/// Periodic 1-D sampling line for the 1-D PDE systems.
struct Grid1d {
    int nx = 0;
    double lx = 0.0;
    int cutoff = 0;  // spatial truncation for derivative features
    double dx() const { return lx / nx; }
};

/// Spatial metadata carried by PDE datasets; absent for ODE systems.
struct SpaceInfo {
    std::optional<Grid1d> grid1d;
    std::optional<spectral::Grid2d> grid2d;

    bool is_pde() const { return grid1d.has_value() || grid2d.has_value(); }
    /// Number of spatial sample points (1 for ODE states).
    int points() const {
        if (grid1d) return grid1d->nx;
        if (grid2d) return grid2d->nx * grid2d->ny;
        return 1;
    }
};

/// One recorded trajectory: times (N), states (N x state_dim) and the control
/// evaluated at the same instants (N x control_dim). For PDE systems
/// state_dim is the flattened grid size and the control is the full field.
struct Trajectory {
    std::vector<double> times;
    Array2d states;
    Array2d controls;

    std::span<const double> initial_state() const { return states.row(0); }
};

struct TimeSeriesDataset {
    SystemKind kind = SystemKind::Parametric2D;
    SpaceInfo space;
    std::vector<Trajectory> samples;

    std::size_t n_samples() const { return samples.size(); }
    std::size_t n_points() const { return samples.empty() ? 0 : samples[0].times.size(); }
    std::size_t state_dim() const { return samples.empty() ? 0 : samples[0].states.cols(); }
    std::size_t control_dim() const { return samples.empty() ? 0 : samples[0].controls.cols(); }

    /// True when every gap matches the first one to 1e-9 (absolute).
    bool uniform_spacing() const;
    double dt() const;

    /// Shared shapes, strictly increasing times. Throws on violation.
    void validate() const;
};

/// Dataset container format: one JSON header line (dims, times, dtype tag,
/// endianness, config hash, grid metadata) followed by little-endian float64
/// blocks for each declared array, row-major, samples outermost.
void save_dataset(const TimeSeriesDataset& ds, const std::filesystem::path& path,
                  const std::string& config_hash);

/// expected_hash, when non-empty, must match the stored config hash.
TimeSeriesDataset load_dataset(const std::filesystem::path& path,
                               const std::string& expected_hash = {});

std::string dataset_config_hash(const std::filesystem::path& path);

}  // namespace fnode
