#include "fnode/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>

#include "fnode/errors.hpp"
#include "fnode/rng.hpp"

namespace fnode::training {

namespace {

// Extrapolates s(t0 + T) (one step past the last sample) and the end slopes
// with one-sided cubic stencils, then removes a polynomial carrying the value
// gap (order >= 1) and slope gap (order >= 2) across the wrap point. Returns
// the slope of the removed bridge so callers can add it back.
struct SeamBridge {
    std::vector<double> detrended;
    std::vector<double> bridge_slope;
};

SeamBridge bridge_series(std::span<const double> s, double dt, int order) {
    const std::size_t n = s.size();
    SeamBridge out;
    out.detrended.assign(s.begin(), s.end());
    out.bridge_slope.assign(n, 0.0);
    if (order <= 0) return out;
    if (n < 4) throw InvalidInputError("build_targets: need at least 4 points for seam bridge");

    const double period = dt * static_cast<double>(n);
    const double s_wrap = 4.0 * s[n - 1] - 6.0 * s[n - 2] + 4.0 * s[n - 3] - s[n - 4];
    const double value_gap = s_wrap - s[0];

    double slope_gap = 0.0;
    if (order >= 2) {
        const double d_start = (-11.0 * s[0] + 18.0 * s[1] - 9.0 * s[2] + 2.0 * s[3]) / (6.0 * dt);
        const double d_wrap =
            (11.0 * s_wrap - 18.0 * s[n - 1] + 9.0 * s[n - 2] - 2.0 * s[n - 3]) / (6.0 * dt);
        slope_gap = d_wrap - d_start;
    }

    for (std::size_t i = 0; i < n; ++i) {
        const double tau = static_cast<double>(i) / static_cast<double>(n);
        const double bridge = value_gap * tau + slope_gap * period * (0.5 * tau * tau - 0.5 * tau);
        out.detrended[i] -= bridge;
        out.bridge_slope[i] = value_gap / period + slope_gap * (tau - 0.5);
    }
    return out;
}

std::vector<double> seam_weights(std::size_t n, double seam_fraction) {
    std::vector<double> w(n, 1.0);
    const std::size_t cut = static_cast<std::size_t>(std::floor(seam_fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < cut && i < n; ++i) {
        w[i] = 0.0;
        w[n - 1 - i] = 0.0;
    }
    return w;
}

}  // namespace

TargetSet build_targets(const TimeSeriesDataset& ds, int cutoff, int detrend_order,
                        double seam_fraction) {
    ds.validate();
    if (!ds.uniform_spacing())
        throw InvalidInputError(
            "build_targets: non-uniform sampling is unsupported (needs a nonuniform transform)");
    const std::size_t n = ds.n_points();
    const std::size_t sd = ds.state_dim();
    const double dt = ds.dt();
    const auto plan = spectral::SpectralPlan::create(static_cast<int>(n),
                                                     dt * static_cast<double>(n), cutoff);

    TargetSet out;
    out.targets.assign(ds.n_samples(), Array2d(n, sd));
    out.time_weights = seam_weights(n, seam_fraction);

    const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(ds.n_samples() * sd);
    std::atomic<bool> failed{false};
    std::string failure;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t idx = 0; idx < total; ++idx) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            const std::size_t s = static_cast<std::size_t>(idx) / sd;
            const std::size_t c = static_cast<std::size_t>(idx) % sd;
            std::vector<double> series(n);
            for (std::size_t t = 0; t < n; ++t) series[t] = ds.samples[s].states(t, c);
            const auto bridged = bridge_series(series, dt, detrend_order);
            const auto deriv = spectral::temporal_derivative(bridged.detrended, plan);
            for (std::size_t t = 0; t < n; ++t)
                out.targets[s](t, c) = deriv[t] + bridged.bridge_slope[t];
        } catch (const std::exception& e) {
            bool expected = false;
            if (failed.compare_exchange_strong(expected, true)) failure = e.what();
        }
    }
    if (failed.load()) throw NumericalError("build_targets: " + failure);
    return out;
}

std::vector<double> assemble_features(const features::FeatureSpec& spec, const SpaceInfo& space,
                                      std::span<const double> state,
                                      std::span<const double> control) {
    spec.validate(space);
    const std::size_t pts = space.is_pde() ? static_cast<std::size_t>(space.points()) : 1;
    const std::size_t d_i = static_cast<std::size_t>(
        spec.feature_dim(space, static_cast<int>(state.size()), static_cast<int>(control.size())));
    Array2d rows(pts, d_i);
    features::snapshot_features(spec, space, state, control, rows);
    return std::vector<double>(rows.data(), rows.data() + rows.size());
}

double flow_matching_loss(const nn::MlpModel& model, const Array2d& inputs, const Array2d& targets,
                          nn::LossForm form, std::span<const double> row_weights) {
    return nn::batch_loss(model, inputs, targets, form, row_weights);
}

namespace {

struct TrainMatrix {
    Array2d x, y;
};

// Network input rows and target rows for all loss-active (sample, time)
// snapshots. Seam-weighted rows (weight zero) are dropped here.
TrainMatrix build_matrix(const TimeSeriesDataset& ds, const TargetSet& targets,
                         const features::FeatureSpec& spec) {
    const std::size_t n = ds.n_points();
    const std::size_t pts = static_cast<std::size_t>(ds.space.points());
    std::vector<std::size_t> active;
    active.reserve(n);
    for (std::size_t t = 0; t < n; ++t)
        if (targets.time_weights[t] > 0.0) active.push_back(t);
    if (active.empty()) throw InvalidInputError("train: seam fraction removed every time point");

    const std::size_t d_i = static_cast<std::size_t>(spec.feature_dim(
        ds.space, static_cast<int>(ds.state_dim()), static_cast<int>(ds.control_dim())));
    const std::size_t d_o = ds.space.is_pde() ? 1 : ds.state_dim();
    TrainMatrix m;
    m.x = Array2d(ds.n_samples() * active.size() * pts, d_i);
    m.y = Array2d(ds.n_samples() * active.size() * pts, d_o);

    const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(ds.n_samples() * active.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t idx = 0; idx < total; ++idx) {
        const std::size_t s = static_cast<std::size_t>(idx) / active.size();
        const std::size_t t = active[static_cast<std::size_t>(idx) % active.size()];
        const std::size_t row0 = static_cast<std::size_t>(idx) * pts;
        const auto& tr = ds.samples[s];
        features::snapshot_features(spec, ds.space, tr.states.row(t), tr.controls.row(t), m.x, row0);
        if (ds.space.is_pde()) {
            for (std::size_t p = 0; p < pts; ++p) m.y(row0 + p, 0) = targets.targets[s](t, p);
        } else {
            for (std::size_t c = 0; c < d_o; ++c) m.y(row0, c) = targets.targets[s](t, c);
        }
    }
    return m;
}

TargetSet targets_for(const TimeSeriesDataset& ds, const TrainConfig& cfg, bool cap_cutoff) {
    if (cfg.target_method == TargetMethod::CentralDifference) {
        // central differences need no seam handling; see module baselines
        TargetSet out;
        const std::size_t n = ds.n_points(), sd = ds.state_dim();
        const double dt = ds.dt();
        out.targets.assign(ds.n_samples(), Array2d(n, sd));
        out.time_weights.assign(n, 1.0);
        for (std::size_t s = 0; s < ds.n_samples(); ++s) {
            const auto& st = ds.samples[s].states;
            for (std::size_t c = 0; c < sd; ++c) {
                out.targets[s](0, c) = (st(1, c) - st(0, c)) / dt;
                for (std::size_t t = 1; t + 1 < n; ++t)
                    out.targets[s](t, c) = (st(t + 1, c) - st(t - 1, c)) / (2.0 * dt);
                out.targets[s](n - 1, c) = (st(n - 1, c) - st(n - 2, c)) / dt;
            }
        }
        return out;
    }
    int k = cfg.cutoff;
    if (cap_cutoff) k = std::min(k, static_cast<int>(ds.n_points()) / 2);
    return build_targets(ds, k, cfg.detrend_order, cfg.seam_fraction);
}

}  // namespace

TrainResult train(nn::MlpModel model, const TimeSeriesDataset& train_ds,
                  const TimeSeriesDataset& val_ds, const features::FeatureSpec& spec,
                  const TrainConfig& config) {
    if (config.epochs < 1) throw InvalidInputError("train: epochs must be >= 1");
    if (config.batch_size < 1) throw InvalidInputError("train: batch_size must be >= 1");
    spec.validate(train_ds.space);

    const auto t_start = std::chrono::steady_clock::now();

    const TargetSet train_targets = targets_for(train_ds, config, /*cap_cutoff=*/false);
    const TargetSet val_targets = targets_for(val_ds, config, /*cap_cutoff=*/true);
    TrainMatrix tm = build_matrix(train_ds, train_targets, spec);
    TrainMatrix vm = build_matrix(val_ds, val_targets, spec);

    const auto norm = features::Normalizer::fit(tm.x);
    norm.apply_rows(tm.x);
    norm.apply_rows(vm.x);

    if (tm.x.cols() != static_cast<std::size_t>(model.input_dim()) ||
        tm.y.cols() != static_cast<std::size_t>(model.output_dim()))
        throw ShapeError("train: model dims do not match feature/target dims");

    auto adam = nn::AdamState::init(model.n_params(), config.lr, config.weight_decay);
    Rng shuffle_rng(derive_seed(config.seed, "shuffle"));

    const std::size_t rows = tm.x.rows();
    std::vector<std::size_t> perm(rows);
    for (std::size_t i = 0; i < rows; ++i) perm[i] = i;
    const std::size_t bs = static_cast<std::size_t>(config.batch_size);

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    Array2d xb, yb;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        // Fisher-Yates with our own stream (library shuffles are unspecified)
        for (std::size_t i = rows - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(shuffle_rng.next_u64() % (i + 1));
            std::swap(perm[i], perm[j]);
        }
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < rows; start += bs) {
            const std::size_t count = std::min(bs, rows - start);
            xb = Array2d(count, tm.x.cols());
            yb = Array2d(count, tm.y.cols());
            for (std::size_t r = 0; r < count; ++r) {
                const std::size_t src = perm[start + r];
                std::copy(tm.x.row(src).begin(), tm.x.row(src).end(), xb.row(r).begin());
                std::copy(tm.y.row(src).begin(), tm.y.row(src).end(), yb.row(r).begin());
            }
            nn::LossGradResult lg;
            try {
                lg = nn::loss_and_grad(model, xb, yb, config.loss_form);
            } catch (const NumericalError& e) {
                throw NumericalError("train: diverged at epoch " + std::to_string(epoch) + ": " +
                                     e.what());
            }
            nn::adam_step(model, lg.grads, adam);
            loss_sum += lg.loss * static_cast<double>(count);
        }
        const double train_loss = loss_sum / static_cast<double>(rows);
        const double val_loss = nn::batch_loss(model, vm.x, vm.y, config.loss_form);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw NumericalError("train: diverged at epoch " + std::to_string(epoch));
        result.best_val_loss = std::min(result.best_val_loss, val_loss);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        result.history.rows.push_back({epoch, train_loss, val_loss, wall});
    }

    result.model.mlp = std::move(model);
    result.model.norm = norm;
    result.model.feature_spec = spec;
    result.model.kind = train_ds.kind;
    result.model.space = train_ds.space;
    return result;
}

TimeSeriesDataset augment_dataset(const TrainedModel& model, const TimeSeriesDataset& ds,
                                  const integrate::IntegratorConfig& config, bool* aborted) {
    ds.validate();
    if (!ds.uniform_spacing())
        throw InvalidInputError("augment_dataset: requires uniform sampling");
    if (aborted) *aborted = false;

    TimeSeriesDataset out;
    out.kind = ds.kind;
    out.space = ds.space;
    out.samples.resize(ds.n_samples());

    const std::size_t n = ds.n_points();
    const std::size_t n2 = 2 * n - 1;
    std::atomic<bool> failed{false};

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(ds.n_samples()); ++si) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            const auto& tr = ds.samples[static_cast<std::size_t>(si)];
            const auto rhs = make_model_rhs(model, tr.controls, tr.times);

            Trajectory nt;
            nt.times.resize(n2);
            nt.states = Array2d(n2, tr.states.cols());
            nt.controls = Array2d(n2, tr.controls.cols());
            for (std::size_t t = 0; t < n; ++t) {
                nt.times[2 * t] = tr.times[t];
                std::copy(tr.states.row(t).begin(), tr.states.row(t).end(),
                          nt.states.row(2 * t).begin());
                std::copy(tr.controls.row(t).begin(), tr.controls.row(t).end(),
                          nt.controls.row(2 * t).begin());
            }
            for (std::size_t t = 0; t + 1 < n; ++t) {
                const double mid = 0.5 * (tr.times[t] + tr.times[t + 1]);
                nt.times[2 * t + 1] = mid;
                for (std::size_t c = 0; c < tr.controls.cols(); ++c)
                    nt.controls(2 * t + 1, c) = 0.5 * (tr.controls(t, c) + tr.controls(t + 1, c));
                const double span[2] = {tr.times[t], mid};
                const Array2d seg = integrate::solve(rhs, tr.states.row(t), span, config);
                std::copy(seg.row(1).begin(), seg.row(1).end(),
                          nt.states.row(2 * t + 1).begin());
            }
            out.samples[static_cast<std::size_t>(si)] = std::move(nt);
        } catch (const std::exception&) {
            failed.store(true, std::memory_order_relaxed);
        }
    }

    if (failed.load()) {
        if (aborted) *aborted = true;
        return ds;  // untouched original
    }
    out.validate();
    return out;
}

TrainResult train_with_augmentation(const TimeSeriesDataset& train_ds,
                                    const TimeSeriesDataset& val_ds,
                                    const features::FeatureSpec& spec, TrainConfig config,
                                    const integrate::IntegratorConfig& integ) {
    if (config.augmentation_rounds < 0)
        throw InvalidInputError("train_with_augmentation: rounds must be >= 0");

    const std::size_t d_i = static_cast<std::size_t>(spec.feature_dim(
        train_ds.space, static_cast<int>(train_ds.state_dim()),
        static_cast<int>(train_ds.control_dim())));
    const std::size_t d_o = train_ds.space.is_pde() ? 1 : train_ds.state_dim();
    std::vector<int> sizes;
    sizes.push_back(static_cast<int>(d_i));
    for (int l = 0; l < config.hidden_layers; ++l) sizes.push_back(config.hidden_dim);
    sizes.push_back(static_cast<int>(d_o));

    nn::MlpModel model =
        nn::MlpModel::init(sizes, derive_seed(config.seed, "init"), config.activation);

    double threshold;
    if (config.validation_threshold) {
        threshold = *config.validation_threshold;
    } else {
        // pilot run to place the "good enough" bar
        TrainConfig pilot = config;
        pilot.epochs = std::min(200, config.epochs);
        pilot.augmentation_rounds = 0;
        const auto pilot_res = train(model, train_ds, val_ds, spec, pilot);
        threshold = 1.05 * pilot_res.best_val_loss;
    }

    TimeSeriesDataset ds = train_ds;
    TrainResult final_result;
    int epoch_offset = 0;
    double wall_offset = 0.0;

    for (int round = 0;; ++round) {
        if (config.cutoff > static_cast<int>(ds.n_points()) / 2)
            throw InvalidInputError("train_with_augmentation: cutoff exceeds floor(N/2)");
        TrainResult res = train(std::move(model), ds, val_ds, spec, config);
        model = res.model.mlp;  // keep training the same parameters next round

        for (auto row : res.history.rows) {
            row.epoch += epoch_offset;
            row.wall_time_s += wall_offset;
            final_result.history.rows.push_back(row);
        }
        epoch_offset += config.epochs;
        wall_offset = final_result.history.rows.back().wall_time_s;
        final_result.best_val_loss = res.best_val_loss;
        final_result.model = std::move(res.model);
        final_result.model.mlp = model;

        if (round >= config.augmentation_rounds || res.best_val_loss <= threshold) break;

        bool aborted = false;
        TimeSeriesDataset next = augment_dataset(final_result.model, ds, integ, &aborted);
        if (aborted) break;  // keep the model trained so far
        ds = std::move(next);
        config.cutoff = std::min(2 * config.cutoff, static_cast<int>(ds.n_points()) / 2);
    }
    return final_result;
}

std::pair<TimeSeriesDataset, TimeSeriesDataset> split_dataset(const TimeSeriesDataset& ds,
                                                              double val_fraction) {
    if (ds.n_samples() < 2) throw InvalidInputError("split_dataset: need at least 2 samples");
    if (!(val_fraction > 0.0) || !(val_fraction < 1.0))
        throw InvalidInputError("split_dataset: fraction must be in (0, 1)");
    std::size_t n_val = static_cast<std::size_t>(
        std::lround(val_fraction * static_cast<double>(ds.n_samples())));
    n_val = std::clamp<std::size_t>(n_val, 1, ds.n_samples() - 1);

    TimeSeriesDataset train = ds, val = ds;
    train.samples.assign(ds.samples.begin(),
                         ds.samples.end() - static_cast<std::ptrdiff_t>(n_val));
    val.samples.assign(ds.samples.end() - static_cast<std::ptrdiff_t>(n_val), ds.samples.end());
    return {std::move(train), std::move(val)};
}

}  // namespace fnode::training
