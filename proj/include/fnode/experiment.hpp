#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "fnode/baselines.hpp"
#include "fnode/grf.hpp"
#include "fnode/metrics.hpp"
#include "fnode/systems.hpp"
#include "fnode/training.hpp"

namespace fnode::experiment {

/// Everything one run needs, parsed strictly (unknown keys rejected) from a
/// single JSON document with a schema_version field.
struct ExperimentConfig {
    int schema_version = 1;
    std::string name;
    std::string method = "fnode";  // fnode | mid | node_euler
    std::string condition;         // compare-table label, e.g. "ntr=20"

    systems::SystemSpec system;
    grf::GrfConfig control_grf;
    grf::GrfConfig ns_space_grf;
    grf::GrfConfig ns_init_grf;

    struct DataConfig {
        int n_train = 0, n_val = 0, n_test = 0;
        int n_points = 0;
        double noise_sd = 0.0;
        std::uint64_t seed = 0;
        int oversample = 20;
    } data;

    training::TrainConfig train;
    int node_segment_length = 10;

    features::FeatureSpec feature_spec;
    integrate::IntegratorConfig integrator;
    std::string output_dir;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Fingerprint of the data-generating sections only (system, GRFs, data);
/// training hyperparameters may change without invalidating datasets.
std::string data_hash(const ExperimentConfig& cfg);

/// Writes train/val/test dataset files plus manifest.json into out_dir.
/// Noise (when configured) lands on train and validation; the test split
/// stays clean so prediction error is measured against the true dynamics.
void run_generate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Trains per cfg.method on datasets in data_dir (hash-checked against the
/// manifest); writes checkpoint.fnck, history.csv, summary.json, timings.csv.
void run_train(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_dir);

/// Rolls out a checkpoint on one dataset split and writes metrics_<split>.csv.
metrics::MetricsReport run_evaluate(const std::filesystem::path& checkpoint_path,
                                    const std::filesystem::path& data_dir,
                                    const std::string& split,
                                    const std::filesystem::path& out_dir,
                                    const integrate::IntegratorConfig& integ);

/// One row per method, one MSE column per condition, training seconds last;
/// rows sorted by method name. Requires every (method, condition) cell.
void run_compare(const std::vector<std::filesystem::path>& run_dirs,
                 const std::filesystem::path& out_csv);

/// Zero-shot super-resolution: regenerates the test split at target_nx
/// (same seeds, so the same controls and initial profiles), rolls the coarse
/// checkpoint out on the fine grid from the spectrally upsampled initial
/// state, and scores against the fine-grid truth.
metrics::MetricsReport run_superres(const std::filesystem::path& checkpoint_path,
                                    const std::filesystem::path& data_dir, int target_nx,
                                    const std::filesystem::path& out_dir,
                                    const integrate::IntegratorConfig& integ);

}  // namespace fnode::experiment
