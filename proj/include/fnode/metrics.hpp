#pragma once

#include <filesystem>
#include <vector>

#include "fnode/checkpoint.hpp"
#include "fnode/dataset.hpp"

namespace fnode::metrics {

struct SampleMetric {
    std::size_t index = 0;
    double mse = 0.0;
    double mae = 0.0;
};

struct MetricsReport {
    std::vector<SampleMetric> per_sample;
    double mse_mean = 0.0, mse_median = 0.0, mse_q25 = 0.0, mse_q75 = 0.0;
    double mae_mean = 0.0, mae_median = 0.0;

    static MetricsReport from_samples(std::vector<SampleMetric> rows);
};

/// Rolls each trajectory out from its recorded initial state under its
/// recorded controls and scores against the stored states. Divergent rollouts
/// land as mse = inf rows rather than failures.
MetricsReport evaluate_rollouts(const TrainedModel& model, const TimeSeriesDataset& ds,
                                const integrate::IntegratorConfig& config);

/// CSV: one row per sample plus aggregate rows; shortest-round-trip number
/// formatting so reruns are byte-identical.
void write_metrics_csv(const MetricsReport& report, const std::filesystem::path& path);

double quantile(std::vector<double> sorted_values, double q);

}  // namespace fnode::metrics
