#pragma once

#include <filesystem>
#include <string>

#include "fnode/dataset.hpp"
#include "fnode/features.hpp"
#include "fnode/integrate.hpp"
#include "fnode/nn.hpp"

namespace fnode {

/// Everything needed to evaluate a trained vector field on new data.
struct TrainedModel {
    nn::MlpModel mlp;
    features::Normalizer norm;
    features::FeatureSpec feature_spec;
    SystemKind kind = SystemKind::Parametric2D;
    SpaceInfo space;

    /// ds/dt for the current state given the control at that instant.
    std::vector<double> eval_rhs(std::span<const double> state,
                                 std::span<const double> control) const;
};

/// Right-hand side closure over a recorded control series (piecewise-linear in
/// time). Throws InvalidInputError when asked outside [times.front - eps,
/// times.back + eps].
integrate::Rhs make_model_rhs(const TrainedModel& model, const Array2d& controls,
                              std::span<const double> times);

/// Integrates the learned dynamics from s0, emitting states at `times`.
Array2d rollout(const TrainedModel& model, std::span<const double> s0, const Array2d& controls,
                std::span<const double> times, const integrate::IntegratorConfig& config);

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::string method;     // fnode | mid | node_euler
    std::string data_hash;  // fingerprint of the generating data config
    std::string loss_form;
};

/// Checkpoint format: one JSON header line (layer sizes, activation, seed,
/// feature spec, normalization, system/grid, hashes) followed by the raw
/// little-endian float64 parameter block in layer order.
void save_checkpoint(const TrainedModel& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path);

struct LoadedCheckpoint {
    TrainedModel model;
    CheckpointMeta meta;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fnode
