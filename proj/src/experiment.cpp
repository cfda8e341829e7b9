#include "fnode/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "fnode/errors.hpp"
#include "fnode/io_util.hpp"
#include "fnode/rng.hpp"

namespace fnode::experiment {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!allowed.contains(key))
            throw ConfigError("config: unknown key \"" + key + "\" in " + where);
}

double get_num(const json& j, const char* key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}

int get_int(const json& j, const char* key, int fallback) {
    return j.contains(key) ? j.at(key).get<int>() : fallback;
}

grf::GrfConfig parse_grf(const json& j, const std::string& where) {
    reject_unknown_keys(j, {"mean", "length_scale", "output_scale", "jitter"}, where);
    grf::GrfConfig g;
    g.mean = get_num(j, "mean", 0.0);
    g.length_scale = get_num(j, "length_scale", 1.0);
    g.output_scale = get_num(j, "output_scale", 1.0);
    g.jitter = get_num(j, "jitter", 1e-8);
    if (!(g.length_scale > 0.0)) throw ConfigError("config: " + where + ".length_scale must be > 0");
    if (!(g.jitter > 0.0)) throw ConfigError("config: " + where + ".jitter must be > 0");
    return g;
}

json grf_to_json(const grf::GrfConfig& g) {
    return {{"mean", g.mean},
            {"length_scale", g.length_scale},
            {"output_scale", g.output_scale},
            {"jitter", g.jitter}};
}

systems::SystemSpec parse_system(const json& j) {
    reject_unknown_keys(j,
                        {"kind", "time_horizon", "nx", "ny", "spatial_cutoff", "init_scale",
                         "dr_diffusion", "dr_reaction", "ns_viscosity"},
                        "system");
    const SystemKind kind = system_kind_from_string(j.at("kind").get<std::string>());
    systems::SystemSpec spec;
    switch (kind) {
        case SystemKind::Parametric2D:
            spec = systems::SystemSpec::parametric2d(get_num(j, "time_horizon", 10.0));
            break;
        case SystemKind::Lorenz63:
            spec = systems::SystemSpec::lorenz63(get_num(j, "time_horizon", 10.0));
            break;
        case SystemKind::KDV:
            spec = systems::SystemSpec::kdv(get_int(j, "nx", 64), get_num(j, "time_horizon", 20.0));
            break;
        case SystemKind::DR:
            spec = systems::SystemSpec::dr(get_int(j, "nx", 64), get_num(j, "time_horizon", 1.0));
            break;
        case SystemKind::KS:
            spec = systems::SystemSpec::ks(get_int(j, "nx", 64), get_num(j, "time_horizon", 20.0));
            break;
        case SystemKind::NS:
            spec = systems::SystemSpec::ns(get_int(j, "nx", 32), get_int(j, "ny", get_int(j, "nx", 32)),
                                           get_num(j, "time_horizon", 10.0));
            break;
    }
    spec.init_scale = get_num(j, "init_scale", spec.init_scale);
    spec.dr_diffusion = get_num(j, "dr_diffusion", spec.dr_diffusion);
    spec.dr_reaction = get_num(j, "dr_reaction", spec.dr_reaction);
    spec.ns_viscosity = get_num(j, "ns_viscosity", spec.ns_viscosity);
    if (j.contains("spatial_cutoff")) {
        const int cut = j.at("spatial_cutoff").get<int>();
        if (spec.space.grid1d) spec.space.grid1d->cutoff = cut;
        if (spec.space.grid2d) {
            spec.space.grid2d->cutoff_x = cut;
            spec.space.grid2d->cutoff_y = cut;
        }
    }
    return spec;
}

json system_to_json(const systems::SystemSpec& s) {
    json j;
    j["kind"] = to_string(s.kind);
    j["time_horizon"] = s.time_horizon;
    j["init_scale"] = s.init_scale;
    if (s.space.grid1d) {
        j["nx"] = s.space.grid1d->nx;
        j["spatial_cutoff"] = s.space.grid1d->cutoff;
    }
    if (s.space.grid2d) {
        j["nx"] = s.space.grid2d->nx;
        j["ny"] = s.space.grid2d->ny;
        j["spatial_cutoff"] = s.space.grid2d->cutoff_x;
    }
    if (s.kind == SystemKind::DR) {
        j["dr_diffusion"] = s.dr_diffusion;
        j["dr_reaction"] = s.dr_reaction;
    }
    if (s.kind == SystemKind::NS) j["ns_viscosity"] = s.ns_viscosity;
    return j;
}

nn::LossForm loss_form_from_string(const std::string& s) {
    if (s == "mean_squared") return nn::LossForm::MeanSquared;
    if (s == "mean_norm") return nn::LossForm::MeanNorm;
    throw ConfigError("config: unknown loss_form " + s);
}

std::string to_string(nn::LossForm f) {
    return f == nn::LossForm::MeanSquared ? "mean_squared" : "mean_norm";
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    reject_unknown_keys(j,
                        {"schema_version", "name", "method", "condition", "system", "grf",
                         "ns_space_grf", "ns_init_grf", "data", "train", "features", "integrator",
                         "output_dir"},
                        "top level");
    ExperimentConfig cfg;
    cfg.schema_version = j.at("schema_version").get<int>();
    if (cfg.schema_version != 1) throw ConfigError("config: unsupported schema_version");
    cfg.name = j.value("name", "experiment");
    cfg.method = j.value("method", "fnode");
    if (cfg.method != "fnode" && cfg.method != "mid" && cfg.method != "node_euler")
        throw ConfigError("config: method must be fnode | mid | node_euler");
    cfg.condition = j.value("condition", "");

    cfg.system = parse_system(j.at("system"));
    cfg.control_grf = parse_grf(j.at("grf"), "grf");
    cfg.ns_space_grf =
        j.contains("ns_space_grf") ? parse_grf(j.at("ns_space_grf"), "ns_space_grf") : cfg.control_grf;
    if (j.contains("ns_init_grf")) {
        cfg.ns_init_grf = parse_grf(j.at("ns_init_grf"), "ns_init_grf");
    } else {
        cfg.ns_init_grf = grf::GrfConfig{0.0, 0.4, 1.0, 1e-8};
    }

    {
        const json& d = j.at("data");
        reject_unknown_keys(
            d, {"n_train", "n_val", "n_test", "n_points", "noise_sd", "seed", "oversample"},
            "data");
        cfg.data.n_train = d.at("n_train").get<int>();
        cfg.data.n_val = d.at("n_val").get<int>();
        cfg.data.n_test = d.at("n_test").get<int>();
        cfg.data.n_points = d.at("n_points").get<int>();
        cfg.data.noise_sd = get_num(d, "noise_sd", 0.0);
        cfg.data.seed = d.at("seed").get<std::uint64_t>();
        cfg.data.oversample = get_int(d, "oversample", 20);
        if (cfg.data.n_train < 1 || cfg.data.n_val < 1 || cfg.data.n_test < 1)
            throw ConfigError("config: data.n_train/n_val/n_test must each be >= 1");
        if (cfg.data.n_points < 8) throw ConfigError("config: data.n_points must be >= 8");
        if (cfg.data.noise_sd < 0.0) throw ConfigError("config: data.noise_sd must be >= 0");
    }

    {
        const json& t = j.at("train");
        reject_unknown_keys(t,
                            {"cutoff", "epochs", "batch_size", "lr", "weight_decay", "loss_form",
                             "augmentation_rounds", "validation_threshold", "seed",
                             "seam_fraction", "detrend_order", "hidden_dim", "hidden_layers",
                             "activation", "segment_length"},
                            "train");
        cfg.train.cutoff = t.at("cutoff").get<int>();
        cfg.train.epochs = t.at("epochs").get<int>();
        cfg.train.batch_size = get_int(t, "batch_size", 256);
        cfg.train.lr = get_num(t, "lr", 1e-3);
        cfg.train.weight_decay = get_num(t, "weight_decay", 1e-5);
        cfg.train.loss_form = loss_form_from_string(t.value("loss_form", "mean_squared"));
        cfg.train.augmentation_rounds = get_int(t, "augmentation_rounds", 0);
        if (t.contains("validation_threshold") && !t.at("validation_threshold").is_null())
            cfg.train.validation_threshold = t.at("validation_threshold").get<double>();
        cfg.train.seed = t.value("seed", cfg.data.seed);
        cfg.train.seam_fraction = get_num(t, "seam_fraction", 0.05);
        cfg.train.detrend_order = get_int(t, "detrend_order", 2);
        cfg.train.hidden_dim = get_int(t, "hidden_dim", 128);
        cfg.train.hidden_layers = get_int(t, "hidden_layers", 3);
        cfg.train.activation = nn::activation_from_string(t.value("activation", "tanh"));
        cfg.node_segment_length = get_int(t, "segment_length", 10);
        cfg.train.target_method = cfg.method == "mid" ? training::TargetMethod::CentralDifference
                                                      : training::TargetMethod::Fourier;

        if (cfg.train.epochs < 1) throw ConfigError("config: train.epochs must be >= 1");
        if (cfg.train.cutoff < 1) throw ConfigError("config: train.cutoff must be >= 1");
        if (cfg.train.cutoff > cfg.data.n_points / 2)
            throw ConfigError("config: train.cutoff exceeds floor(n_points/2) (Nyquist bound)");
        if (cfg.train.augmentation_rounds < 0)
            throw ConfigError("config: train.augmentation_rounds must be >= 0");
        if (cfg.train.seam_fraction < 0.0 || cfg.train.seam_fraction >= 0.5)
            throw ConfigError("config: train.seam_fraction must lie in [0, 0.5)");
        if (cfg.train.detrend_order < 0 || cfg.train.detrend_order > 2)
            throw ConfigError("config: train.detrend_order must be 0, 1, or 2");
    }

    if (j.contains("features")) {
        const json& f = j.at("features");
        reject_unknown_keys(f, {"includes_control", "spatial_orders", "ns_priors"}, "features");
        cfg.feature_spec.includes_control = f.value("includes_control", true);
        if (f.contains("spatial_orders"))
            cfg.feature_spec.spatial_orders =
                f.at("spatial_orders").get<std::vector<std::pair<int, int>>>();
        cfg.feature_spec.ns_priors = f.value("ns_priors", false);
        if (!f.contains("spatial_orders") && cfg.system.is_pde())
            cfg.feature_spec = features::FeatureSpec::defaults_for(cfg.system.kind);
    } else {
        cfg.feature_spec = features::FeatureSpec::defaults_for(cfg.system.kind);
    }
    cfg.feature_spec.validate(cfg.system.space);

    if (j.contains("integrator")) {
        const json& i = j.at("integrator");
        reject_unknown_keys(i, {"method", "fixed_step", "rtol", "atol", "max_steps"}, "integrator");
        cfg.integrator.method = integrate::method_from_string(i.value("method", "dopri5"));
        if (i.contains("fixed_step") && !i.at("fixed_step").is_null())
            cfg.integrator.fixed_step = i.at("fixed_step").get<double>();
        cfg.integrator.rtol = get_num(i, "rtol", 1e-6);
        cfg.integrator.atol = get_num(i, "atol", 1e-8);
        cfg.integrator.max_steps = static_cast<long>(get_num(i, "max_steps", 50'000'000.0));
        if (cfg.integrator.method != integrate::Method::Dopri5 && !cfg.integrator.fixed_step)
            throw ConfigError("config: integrator.fixed_step required for euler/rk4");
    }

    cfg.output_dir = j.value("output_dir", "");
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    return parse_config(j);
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["schema_version"] = cfg.schema_version;
    j["name"] = cfg.name;
    j["method"] = cfg.method;
    j["condition"] = cfg.condition;
    j["system"] = system_to_json(cfg.system);
    j["grf"] = grf_to_json(cfg.control_grf);
    if (cfg.system.kind == SystemKind::NS) {
        j["ns_space_grf"] = grf_to_json(cfg.ns_space_grf);
        j["ns_init_grf"] = grf_to_json(cfg.ns_init_grf);
    }
    j["data"] = {{"n_train", cfg.data.n_train}, {"n_val", cfg.data.n_val},
                 {"n_test", cfg.data.n_test},   {"n_points", cfg.data.n_points},
                 {"noise_sd", cfg.data.noise_sd}, {"seed", cfg.data.seed},
                 {"oversample", cfg.data.oversample}};
    j["train"] = {{"cutoff", cfg.train.cutoff},
                  {"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"lr", cfg.train.lr},
                  {"weight_decay", cfg.train.weight_decay},
                  {"loss_form", to_string(cfg.train.loss_form)},
                  {"augmentation_rounds", cfg.train.augmentation_rounds},
                  {"seed", cfg.train.seed},
                  {"seam_fraction", cfg.train.seam_fraction},
                  {"detrend_order", cfg.train.detrend_order},
                  {"hidden_dim", cfg.train.hidden_dim},
                  {"hidden_layers", cfg.train.hidden_layers},
                  {"activation", nn::to_string(cfg.train.activation)},
                  {"segment_length", cfg.node_segment_length}};
    if (cfg.train.validation_threshold)
        j["train"]["validation_threshold"] = *cfg.train.validation_threshold;
    j["features"] = {{"includes_control", cfg.feature_spec.includes_control},
                     {"spatial_orders", cfg.feature_spec.spatial_orders},
                     {"ns_priors", cfg.feature_spec.ns_priors}};
    j["integrator"] = {{"method", integrate::to_string(cfg.integrator.method)},
                       {"rtol", cfg.integrator.rtol},
                       {"atol", cfg.integrator.atol},
                       {"max_steps", cfg.integrator.max_steps}};
    if (cfg.integrator.fixed_step) j["integrator"]["fixed_step"] = *cfg.integrator.fixed_step;
    j["output_dir"] = cfg.output_dir;
    return j;
}

std::string data_hash(const ExperimentConfig& cfg) {
    json j;
    j["system"] = system_to_json(cfg.system);
    j["grf"] = grf_to_json(cfg.control_grf);
    if (cfg.system.kind == SystemKind::NS) {
        j["ns_space_grf"] = grf_to_json(cfg.ns_space_grf);
        j["ns_init_grf"] = grf_to_json(cfg.ns_init_grf);
    }
    j["data"] = {{"n_train", cfg.data.n_train}, {"n_val", cfg.data.n_val},
                 {"n_test", cfg.data.n_test},   {"n_points", cfg.data.n_points},
                 {"noise_sd", cfg.data.noise_sd}, {"seed", cfg.data.seed},
                 {"oversample", cfg.data.oversample}};
    return fnv1a_hex(j.dump());
}

namespace {

systems::GenerateOptions options_for_split(const ExperimentConfig& cfg, const std::string& split) {
    systems::GenerateOptions o;
    o.n_points = cfg.data.n_points;
    o.seed = derive_seed(cfg.data.seed, split);
    o.control_grf = cfg.control_grf;
    o.ns_space_grf = cfg.ns_space_grf;
    o.ns_init_grf = cfg.ns_init_grf;
    o.oversample = cfg.data.oversample;
    if (split == "train") {
        o.n_samples = cfg.data.n_train;
        o.noise_sd = cfg.data.noise_sd;
    } else if (split == "val") {
        o.n_samples = cfg.data.n_val;
        o.noise_sd = cfg.data.noise_sd;
    } else if (split == "test") {
        o.n_samples = cfg.data.n_test;
        o.noise_sd = 0.0;  // score predictions against clean truth
    } else {
        throw InvalidInputError("unknown split: " + split);
    }
    return o;
}

void write_timings(const std::filesystem::path& out_dir, const std::string& phase,
                   double seconds) {
    atomic_write_file(out_dir / ("timings_" + phase + ".csv"),
                      "phase,seconds\n" + phase + "," + format_double(seconds) + "\n");
}

json read_json_file(const std::filesystem::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_history_csv(const training::TrainHistory& history,
                       const std::filesystem::path& path) {
    std::string out = "epoch,train_loss,val_loss,wall_time_s\n";
    for (const auto& r : history.rows) {
        out += std::to_string(r.epoch);
        out += ',';
        out += format_double(r.train_loss);
        out += ',';
        out += format_double(r.val_loss);
        out += ',';
        out += format_double(r.wall_time_s);
        out += '\n';
    }
    atomic_write_file(path, out);
}

}  // namespace

void run_generate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    std::filesystem::create_directories(out_dir);
    const std::string hash = data_hash(cfg);

    for (const std::string split : {"train", "val", "test"}) {
        const auto ds = systems::generate_dataset(cfg.system, options_for_split(cfg, split));
        save_dataset(ds, out_dir / (split + ".fnds"), hash);
    }
    json manifest;
    manifest["schema_version"] = 1;
    manifest["data_hash"] = hash;
    manifest["config"] = config_to_json(cfg);
    manifest["files"] = {{"train", "train.fnds"}, {"val", "val.fnds"}, {"test", "test.fnds"}};
    atomic_write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    write_timings(out_dir, "generate",
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

void run_train(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    const json manifest = read_json_file(data_dir / "manifest.json");
    const std::string expected = data_hash(cfg);
    if (manifest.at("data_hash").get<std::string>() != expected)
        throw ConfigError("train: manifest data hash does not match this config; refusing to train");

    const auto train_ds = load_dataset(data_dir / "train.fnds", expected);
    const auto val_ds = load_dataset(data_dir / "val.fnds", expected);
    std::filesystem::create_directories(out_dir);

    TrainedModel model;
    training::TrainHistory history;
    double best_val = 0.0;

    if (cfg.method == "node_euler") {
        baselines::NodeConfig nc;
        nc.epochs = cfg.train.epochs;
        nc.segment_length = cfg.node_segment_length;
        nc.batch_size = cfg.train.batch_size;
        nc.lr = cfg.train.lr;
        nc.weight_decay = cfg.train.weight_decay;
        nc.seed = cfg.train.seed;
        nc.hidden_dim = cfg.train.hidden_dim;
        nc.hidden_layers = cfg.train.hidden_layers;
        nc.activation = cfg.train.activation;
        auto res = baselines::node_euler_train(train_ds, val_ds, nc);
        model = std::move(res.model);
        history = std::move(res.history);
        best_val = res.best_val_loss;
    } else {
        auto res = training::train_with_augmentation(train_ds, val_ds, cfg.feature_spec, cfg.train,
                                                     cfg.integrator);
        model = std::move(res.model);
        history = std::move(res.history);
        best_val = res.best_val_loss;
    }

    CheckpointMeta meta;
    meta.seed = cfg.train.seed;
    meta.method = cfg.method;
    meta.data_hash = expected;
    meta.loss_form = cfg.train.loss_form == nn::LossForm::MeanSquared ? "mean_squared" : "mean_norm";
    save_checkpoint(model, meta, out_dir / "checkpoint.fnck");
    write_history_csv(history, out_dir / "history.csv");

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json summary;
    summary["name"] = cfg.name;
    summary["method"] = cfg.method;
    summary["condition"] = cfg.condition;
    summary["system"] = to_string(cfg.system.kind);
    summary["data_hash"] = expected;
    summary["best_val_loss"] = best_val;
    summary["train_seconds"] = seconds;
    atomic_write_file(out_dir / "summary.json", summary.dump(2) + "\n");
    write_timings(out_dir, "train", seconds);
}

metrics::MetricsReport run_evaluate(const std::filesystem::path& checkpoint_path,
                                    const std::filesystem::path& data_dir,
                                    const std::string& split,
                                    const std::filesystem::path& out_dir,
                                    const integrate::IntegratorConfig& integ) {
    const auto t0 = std::chrono::steady_clock::now();
    auto loaded = load_checkpoint(checkpoint_path);
    const auto ds = load_dataset(data_dir / (split + ".fnds"));
    if (ds.n_samples() == 0) throw InvalidInputError("evaluate: empty split");

    const int d_i = loaded.model.feature_spec.feature_dim(
        ds.space, static_cast<int>(ds.state_dim()), static_cast<int>(ds.control_dim()));
    if (d_i != loaded.model.mlp.input_dim())
        throw ShapeError("evaluate: checkpoint feature spec does not match dataset dims");

    const auto report = metrics::evaluate_rollouts(loaded.model, ds, integ);
    std::filesystem::create_directories(out_dir);
    metrics::write_metrics_csv(report, out_dir / ("metrics_" + split + ".csv"));

    // fold headline numbers into the run summary for cmd_compare
    const auto summary_path = out_dir / "summary.json";
    json summary;
    if (std::filesystem::exists(summary_path)) summary = read_json_file(summary_path);
    if (!summary.contains("method")) summary["method"] = loaded.meta.method;
    if (!summary.contains("condition")) summary["condition"] = "";
    summary["mse_mean_" + split] = report.mse_mean;
    summary["mse_median_" + split] = report.mse_median;
    summary["mae_mean_" + split] = report.mae_mean;
    atomic_write_file(summary_path, summary.dump(2) + "\n");
    write_timings(out_dir, "evaluate_" + split,
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return report;
}

void run_compare(const std::vector<std::filesystem::path>& run_dirs,
                 const std::filesystem::path& out_csv) {
    if (run_dirs.size() < 2) throw InvalidInputError("compare: need at least 2 completed runs");

    struct Cell {
        double mse = 0.0;
        double seconds = 0.0;
    };
    std::map<std::string, std::map<std::string, Cell>> table;  // method -> condition -> cell
    std::set<std::string> conditions;

    for (const auto& dir : run_dirs) {
        const auto path = dir / "summary.json";
        if (!std::filesystem::exists(path))
            throw InvalidInputError("compare: missing run artifacts in " + dir.string());
        const json s = read_json_file(path);
        if (!s.contains("mse_mean_test") || !s.contains("train_seconds"))
            throw InvalidInputError("compare: run in " + dir.string() +
                                    " lacks evaluation or training results");
        const std::string method = s.at("method").get<std::string>();
        const std::string condition = s.value("condition", "");
        if (table[method].contains(condition))
            throw InvalidInputError("compare: duplicate (method, condition) = (" + method + ", " +
                                    condition + ")");
        table[method][condition] = {s.at("mse_mean_test").get<double>(),
                                    s.at("train_seconds").get<double>()};
        conditions.insert(condition);
    }

    std::string out = "method";
    for (const auto& c : conditions) out += ",mse[" + (c.empty() ? std::string("default") : c) + "]";
    out += ",train_seconds\n";
    for (const auto& [method, cells] : table) {  // std::map keeps methods sorted
        out += method;
        double sec_sum = 0.0;
        for (const auto& c : conditions) {
            const auto it = cells.find(c);
            if (it == cells.end())
                throw InvalidInputError("compare: missing run for method " + method +
                                        " under condition \"" + c + "\"");
            out += ',' + format_double(it->second.mse);
            sec_sum += it->second.seconds;
        }
        out += ',' + format_double(sec_sum / static_cast<double>(conditions.size()));
        out += '\n';
    }
    std::filesystem::create_directories(out_csv.parent_path().empty() ? "." : out_csv.parent_path());
    atomic_write_file(out_csv, out);
}

metrics::MetricsReport run_superres(const std::filesystem::path& checkpoint_path,
                                    const std::filesystem::path& data_dir, int target_nx,
                                    const std::filesystem::path& out_dir,
                                    const integrate::IntegratorConfig& integ) {
    auto loaded = load_checkpoint(checkpoint_path);
    if (!loaded.model.space.is_pde())
        throw InvalidInputError("superres: checkpoint does not describe a PDE model");

    const json manifest = read_json_file(data_dir / "manifest.json");
    ExperimentConfig cfg = parse_config(manifest.at("config"));
    if (!cfg.system.is_pde()) throw InvalidInputError("superres: dataset is not a PDE system");

    const int coarse_nx =
        cfg.system.space.grid1d ? cfg.system.space.grid1d->nx : cfg.system.space.grid2d->nx;
    if (target_nx < coarse_nx)
        throw InvalidInputError("superres: target_nx must be >= the training resolution");
    if (target_nx == coarse_nx)
        return run_evaluate(checkpoint_path, data_dir, "test", out_dir, integ);

    const auto coarse = load_dataset(data_dir / "test.fnds", data_hash(cfg));

    // same seeds on a finer grid: identical control draws, finer truth
    ExperimentConfig fine_cfg = cfg;
    const int factor = target_nx / coarse_nx;
    if (fine_cfg.system.space.grid1d) {
        fine_cfg.system.space.grid1d->nx = target_nx;
        fine_cfg.system.space.grid1d->cutoff =
            std::min(target_nx / 2, cfg.system.space.grid1d->cutoff * factor);
    } else {
        auto& g = *fine_cfg.system.space.grid2d;
        const int target_ny = g.ny * factor;
        fine_cfg.system.space.grid2d = spectral::Grid2d::create(
            target_nx, target_ny, g.lx, g.ly, std::min(target_nx / 2, g.cutoff_x * factor),
            std::min(target_ny / 2, g.cutoff_y * factor));
    }
    const auto fine =
        systems::generate_dataset(fine_cfg.system, options_for_split(fine_cfg, "test"));
    if (fine.n_samples() != coarse.n_samples() || fine.n_points() != coarse.n_points())
        throw InternalError("superres: fine regeneration shape mismatch");

    TrainedModel fine_model = loaded.model;
    fine_model.space = fine_cfg.system.space;

    std::vector<metrics::SampleMetric> rows(fine.n_samples());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(fine.n_samples()); ++i) {
        const auto& ctr = coarse.samples[static_cast<std::size_t>(i)];
        const auto& ftr = fine.samples[static_cast<std::size_t>(i)];
        metrics::SampleMetric m;
        m.index = static_cast<std::size_t>(i);
        try {
            std::vector<double> s0;
            if (coarse.space.grid1d) {
                s0 = spectral::resample_1d(ctr.initial_state(), target_nx);
            } else {
                Array2d field(static_cast<std::size_t>(coarse.space.grid2d->nx),
                              static_cast<std::size_t>(coarse.space.grid2d->ny));
                std::copy(ctr.initial_state().begin(), ctr.initial_state().end(), field.data());
                const Array2d up = spectral::resample_2d(field, fine_cfg.system.space.grid2d->nx,
                                                         fine_cfg.system.space.grid2d->ny);
                s0.assign(up.data(), up.data() + up.size());
            }
            const Array2d pred = rollout(fine_model, s0, ftr.controls, ftr.times, integ);
            double se = 0.0, ae = 0.0;
            for (std::size_t r = 0; r < pred.rows(); ++r)
                for (std::size_t c = 0; c < pred.cols(); ++c) {
                    const double d = pred(r, c) - ftr.states(r, c);
                    se += d * d;
                    ae += std::abs(d);
                }
            const double inv = 1.0 / static_cast<double>(pred.rows() * pred.cols());
            m.mse = se * inv;
            m.mae = ae * inv;
        } catch (const NumericalError&) {
            m.mse = std::numeric_limits<double>::infinity();
            m.mae = std::numeric_limits<double>::infinity();
        }
        rows[static_cast<std::size_t>(i)] = m;
    }

    const auto report = metrics::MetricsReport::from_samples(std::move(rows));
    std::filesystem::create_directories(out_dir);
    metrics::write_metrics_csv(report,
                               out_dir / ("metrics_superres_nx" + std::to_string(target_nx) + ".csv"));
    return report;
}

}  // namespace fnode::experiment
