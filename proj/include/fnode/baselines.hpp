#pragma once

#include <functional>

#include "fnode/training.hpp"

namespace fnode::baselines {

/// Second-order central differences in the interior, first-order one-sided at
/// the endpoints. Uniform loss weights (no periodicity assumption to protect).
training::TargetSet central_difference_targets(const TimeSeriesDataset& ds);

struct NodeConfig {
    int epochs = 0;
    int segment_length = 10;
    int batch_size = 256;  // approximate rows (segment steps) per optimizer step
    double lr = 1e-3;
    double weight_decay = 1e-5;
    std::uint64_t seed = 0;
    int hidden_dim = 128;
    int hidden_layers = 3;
    nn::Activation activation = nn::Activation::Tanh;
};

struct NodeResult {
    TrainedModel model;
    training::TrainHistory history;
    double best_val_loss = 0.0;
    long skipped_segments = 0;
};

/// Discretize-then-optimize NODE baseline: mean squared multi-step rollout
/// error over fixed-length segments with random starts per epoch, gradients
/// through the unrolled Euler steps. Segments that blow up mid-unroll are
/// skipped and counted.
NodeResult node_euler_train(const TimeSeriesDataset& train_ds, const TimeSeriesDataset& val_ds,
                            const NodeConfig& config);

/// Euler-unroll loss of an arbitrary vector field over deterministic
/// contiguous segments; the validation metric, also handy for oracle tests.
using PointRhs =
    std::function<std::vector<double>(std::span<const double> state, std::span<const double> control)>;
double node_rollout_loss(const TimeSeriesDataset& ds, const PointRhs& rhs, int segment_length);

}  // namespace fnode::baselines
