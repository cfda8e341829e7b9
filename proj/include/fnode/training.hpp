#pragma once

#include <optional>
#include <vector>

#include "fnode/checkpoint.hpp"
#include "fnode/dataset.hpp"
#include "fnode/nn.hpp"

namespace fnode::training {

enum class TargetMethod { Fourier, CentralDifference };

struct TrainConfig {
    int cutoff = 0;  // temporal truncation K; must satisfy K <= N/2
    int epochs = 0;
    int batch_size = 256;
    double lr = 1e-3;
    double weight_decay = 1e-5;
    nn::LossForm loss_form = nn::LossForm::MeanSquared;
    int augmentation_rounds = 0;
    std::optional<double> validation_threshold;  // absent: 1.05 x best val of a 200-epoch pilot
    std::uint64_t seed = 0;

    // gradient-target construction
    TargetMethod target_method = TargetMethod::Fourier;
    double seam_fraction = 0.05;  // loss weight zeroed on the first/last fraction of each series
    int detrend_order = 2;        // 0 = raw DFT, 1 = value-gap bridge, 2 = value+slope bridge

    // network shape
    int hidden_dim = 128;
    int hidden_layers = 3;
    nn::Activation activation = nn::Activation::Tanh;
};

/// Estimated d(state)/dt series, one (N x state_dim) block per sample, plus
/// the shared per-time loss weights (seam down-weighting).
struct TargetSet {
    std::vector<Array2d> targets;
    std::vector<double> time_weights;
};

/// Fourier gradient targets. The series is made seam-periodic before the DFT
/// by subtracting a polynomial carrying the value gap (order >= 1) and slope
/// gap (order >= 2) across the wrap point; the bridge slope is added back to
/// the spectral derivative. Requires uniform sampling and K <= floor(N/2).
TargetSet build_targets(const TimeSeriesDataset& ds, int cutoff, int detrend_order = 2,
                        double seam_fraction = 0.05);

/// Pointwise feature vector in spec order: state, control, spatial gradients,
/// stream priors last. Thin wrapper over features::snapshot_features for
/// single-snapshot use.
std::vector<double> assemble_features(const features::FeatureSpec& spec, const SpaceInfo& space,
                                      std::span<const double> state,
                                      std::span<const double> control);

/// Eq.-style flow-matching loss of a model against target rows.
double flow_matching_loss(const nn::MlpModel& model, const Array2d& inputs, const Array2d& targets,
                          nn::LossForm form, std::span<const double> row_weights = {});

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double wall_time_s = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> rows;
};

struct TrainResult {
    TrainedModel model;
    TrainHistory history;
    double best_val_loss = 0.0;
};

/// Mini-batch Adam on precomputed gradient targets. Targets are built once
/// (per augmentation round); no integrator runs inside this loop.
TrainResult train(nn::MlpModel model, const TimeSeriesDataset& train_ds,
                  const TimeSeriesDataset& val_ds, const features::FeatureSpec& spec,
                  const TrainConfig& config);

/// Inserts model-predicted states at every interval midpoint (N -> 2N-1).
/// Original rows are preserved bit-exactly; midpoint controls are linear
/// interpolations. On rollout divergence the original dataset is returned and
/// *aborted is set.
TimeSeriesDataset augment_dataset(const TrainedModel& model, const TimeSeriesDataset& ds,
                                  const integrate::IntegratorConfig& config,
                                  bool* aborted = nullptr);

/// Full feedback loop: train, then while validation loss exceeds the
/// threshold and rounds remain, augment (doubling the usable cutoff, capped
/// at the new floor(N/2)) and continue training the same model.
TrainResult train_with_augmentation(const TimeSeriesDataset& train_ds,
                                    const TimeSeriesDataset& val_ds,
                                    const features::FeatureSpec& spec, TrainConfig config,
                                    const integrate::IntegratorConfig& integ);

/// Deterministic split helper (val_fraction tail samples go to validation).
std::pair<TimeSeriesDataset, TimeSeriesDataset> split_dataset(const TimeSeriesDataset& ds,
                                                              double val_fraction);

}  // namespace fnode::training
