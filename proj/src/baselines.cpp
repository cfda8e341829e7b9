#include "fnode/baselines.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>

#include "fnode/errors.hpp"
#include "fnode/rng.hpp"

namespace fnode::baselines {

training::TargetSet central_difference_targets(const TimeSeriesDataset& ds) {
    ds.validate();
    if (!ds.uniform_spacing())
        throw InvalidInputError("central_difference_targets: requires uniform sampling");
    const std::size_t n = ds.n_points();
    if (n < 3) throw InvalidInputError("central_difference_targets: need at least 3 points");
    const std::size_t sd = ds.state_dim();
    const double dt = ds.dt();

    training::TargetSet out;
    out.targets.assign(ds.n_samples(), Array2d(n, sd));
    out.time_weights.assign(n, 1.0);
    for (std::size_t s = 0; s < ds.n_samples(); ++s) {
        const auto& st = ds.samples[s].states;
        auto& tg = out.targets[s];
        for (std::size_t c = 0; c < sd; ++c) {
            tg(0, c) = (st(1, c) - st(0, c)) / dt;
            for (std::size_t t = 1; t + 1 < n; ++t)
                tg(t, c) = (st(t + 1, c) - st(t - 1, c)) / (2.0 * dt);
            tg(n - 1, c) = (st(n - 1, c) - st(n - 2, c)) / dt;
        }
    }
    return out;
}

namespace {

constexpr double kUnrollCap = 1e6;  // states past this are treated as divergence

struct SegmentBatchResult {
    double loss_sum = 0.0;       // sum over residual rows of ||r||^2
    long rows = 0;               // residual rows that contributed
    long skipped = 0;            // segments dropped for divergence
    std::vector<double> grads;   // d(sum of row losses)/d(theta)
};

// Forward + BPTT over one batch of segments. Work is spread over a fixed
// block grid; per-block results merge in index order (bitwise deterministic
// for any thread count). Gradients are of the SUM of row losses; the caller
// rescales by the realized row count.
SegmentBatchResult segment_batch_grad(const nn::MlpModel& model,
                                      const features::Normalizer& norm,
                                      const TimeSeriesDataset& ds,
                                      std::span<const std::pair<std::size_t, std::size_t>> segments,
                                      int seg_len) {
    const std::size_t sd = ds.state_dim();
    const std::size_t cd = ds.control_dim();
    const std::size_t d_i = sd + cd;
    const double dt = ds.dt();

    const std::size_t n_blocks = nn::reduction_block_count(segments.size());
    const std::size_t per_block = n_blocks == 0 ? 0 : (segments.size() + n_blocks - 1) / n_blocks;

    std::vector<SegmentBatchResult> blocks(n_blocks);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
        auto& blk = blocks[static_cast<std::size_t>(b)];
        blk.grads.assign(model.n_params(), 0.0);
        const std::size_t lo = static_cast<std::size_t>(b) * per_block;
        const std::size_t hi = std::min(segments.size(), lo + per_block);

        std::vector<nn::MlpWorkspace> steps;
        steps.reserve(static_cast<std::size_t>(seg_len));
        for (int k = 0; k < seg_len; ++k) steps.emplace_back(model);

        std::vector<double> x(d_i), f(sd), lambda(sd), xgrad(d_i), cot(sd);
        Array2d shat(static_cast<std::size_t>(seg_len) + 1, sd);
        Array2d resid(static_cast<std::size_t>(seg_len), sd);

        for (std::size_t si = lo; si < hi; ++si) {
            const auto [traj, start] = segments[si];
            const auto& tr = ds.samples[traj];

            bool dead = false;
            std::copy(tr.states.row(start).begin(), tr.states.row(start).end(),
                      shat.row(0).begin());
            double seg_loss = 0.0;
            for (int k = 0; k < seg_len; ++k) {
                const std::size_t ku = static_cast<std::size_t>(k);
                for (std::size_t c = 0; c < sd; ++c) x[c] = shat(ku, c);
                for (std::size_t c = 0; c < cd; ++c) x[sd + c] = tr.controls(start + ku, c);
                norm.apply(x);
                steps[ku].forward(model, x, f);
                bool bad = false;
                for (std::size_t c = 0; c < sd; ++c) {
                    const double next = shat(ku, c) + dt * f[c];
                    shat(ku + 1, c) = next;
                    const double r = next - tr.states(start + ku + 1, c);
                    resid(ku, c) = r;
                    seg_loss += r * r;
                    if (!std::isfinite(next) || std::abs(next) > kUnrollCap) bad = true;
                }
                if (bad) {
                    dead = true;
                    break;
                }
            }
            if (dead || !std::isfinite(seg_loss)) {
                blk.skipped += 1;
                continue;
            }

            blk.loss_sum += seg_loss;
            blk.rows += seg_len;

            std::fill(lambda.begin(), lambda.end(), 0.0);
            for (int k = seg_len - 1; k >= 0; --k) {
                const std::size_t ku = static_cast<std::size_t>(k);
                for (std::size_t c = 0; c < sd; ++c) lambda[c] += 2.0 * resid(ku, c);
                for (std::size_t c = 0; c < sd; ++c) cot[c] = dt * lambda[c];
                steps[ku].backward(model, cot, blk.grads, xgrad);
                // x was standardized; pull the cotangent back to raw state units
                for (std::size_t c = 0; c < sd; ++c) lambda[c] += xgrad[c] * norm.inv_std[c];
            }
        }
    }

    SegmentBatchResult total;
    total.grads.assign(model.n_params(), 0.0);
    for (const auto& blk : blocks) {
        total.loss_sum += blk.loss_sum;
        total.rows += blk.rows;
        total.skipped += blk.skipped;
        for (std::size_t i = 0; i < total.grads.size(); ++i) total.grads[i] += blk.grads[i];
    }
    return total;
}

features::FeatureSpec state_control_spec() {
    features::FeatureSpec spec;
    spec.includes_control = true;
    return spec;
}

}  // namespace

double node_rollout_loss(const TimeSeriesDataset& ds, const PointRhs& rhs, int segment_length) {
    ds.validate();
    const std::size_t n = ds.n_points();
    const std::size_t sd = ds.state_dim();
    const double dt = ds.dt();
    const std::size_t l = static_cast<std::size_t>(segment_length);
    if (l < 1 || l + 1 > n) throw InvalidInputError("node_rollout_loss: bad segment length");

    double loss = 0.0;
    long rows = 0;
    std::vector<double> s(sd);
    for (const auto& tr : ds.samples) {
        for (std::size_t start = 0; start + l < n; start += l) {
            std::copy(tr.states.row(start).begin(), tr.states.row(start).end(), s.begin());
            for (std::size_t k = 0; k < l; ++k) {
                const auto f = rhs(s, tr.controls.row(start + k));
                double sq = 0.0;
                for (std::size_t c = 0; c < sd; ++c) {
                    s[c] += dt * f[c];
                    const double r = s[c] - tr.states(start + k + 1, c);
                    sq += r * r;
                }
                loss += sq;
                rows += 1;
            }
        }
    }
    if (rows == 0) throw InvalidInputError("node_rollout_loss: no full segments fit");
    return loss / static_cast<double>(rows);
}

NodeResult node_euler_train(const TimeSeriesDataset& train_ds, const TimeSeriesDataset& val_ds,
                            const NodeConfig& config) {
    train_ds.validate();
    val_ds.validate();
    if (!train_ds.uniform_spacing())
        throw InvalidInputError("node_euler_train: requires uniform sampling");
    if (config.epochs < 1) throw InvalidInputError("node_euler_train: epochs must be >= 1");
    const std::size_t n = train_ds.n_points();
    const std::size_t seg_len = static_cast<std::size_t>(config.segment_length);
    if (seg_len < 1 || seg_len + 1 > n)
        throw InvalidInputError("node_euler_train: segment_length must fit the series");

    const auto t_start = std::chrono::steady_clock::now();

    const std::size_t sd = train_ds.state_dim();
    const std::size_t cd = train_ds.control_dim();
    std::vector<int> sizes;
    sizes.push_back(static_cast<int>(sd + cd));
    for (int l = 0; l < config.hidden_layers; ++l) sizes.push_back(config.hidden_dim);
    sizes.push_back(static_cast<int>(sd));
    nn::MlpModel model =
        nn::MlpModel::init(sizes, derive_seed(config.seed, "init"), config.activation);

    // standardize [state, control] rows exactly like the flow-matching path
    const auto spec = state_control_spec();
    Array2d all_rows = features::dataset_features(spec, train_ds);
    const auto norm = features::Normalizer::fit(all_rows);

    const std::size_t segs_per_traj = std::max<std::size_t>(1, n / seg_len);
    const std::size_t max_start = n - 1 - seg_len;
    const std::size_t segs_per_batch =
        std::max<std::size_t>(1, static_cast<std::size_t>(config.batch_size) / seg_len);

    auto adam = nn::AdamState::init(model.n_params(), config.lr, config.weight_decay);
    Rng rng(derive_seed(config.seed, "segments"));

    auto model_rhs = [&](std::span<const double> state,
                         std::span<const double> control) -> std::vector<double> {
        std::vector<double> x(sd + cd);
        for (std::size_t c = 0; c < sd; ++c) x[c] = state[c];
        for (std::size_t c = 0; c < cd; ++c) x[sd + c] = control[c];
        norm.apply(x);
        std::vector<double> f(sd);
        model.forward(x, f);
        return f;
    };

    NodeResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();

    std::vector<std::pair<std::size_t, std::size_t>> segments;
    segments.reserve(train_ds.n_samples() * segs_per_traj);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        segments.clear();
        for (std::size_t traj = 0; traj < train_ds.n_samples(); ++traj)
            for (std::size_t k = 0; k < segs_per_traj; ++k)
                segments.emplace_back(traj, static_cast<std::size_t>(rng.next_u64() % (max_start + 1)));
        // shuffle so batches mix trajectories
        for (std::size_t i = segments.size() - 1; i > 0; --i)
            std::swap(segments[i], segments[static_cast<std::size_t>(rng.next_u64() % (i + 1))]);

        double loss_sum = 0.0;
        long row_sum = 0;
        for (std::size_t at = 0; at < segments.size(); at += segs_per_batch) {
            const std::size_t count = std::min(segs_per_batch, segments.size() - at);
            auto batch = segment_batch_grad(
                model, norm, train_ds,
                std::span(segments.data() + at, count), static_cast<int>(seg_len));
            result.skipped_segments += batch.skipped;
            if (batch.rows == 0) continue;  // whole batch diverged
            const double inv_rows = 1.0 / static_cast<double>(batch.rows);
            for (double& g : batch.grads) g *= inv_rows;
            nn::adam_step(model, batch.grads, adam);
            loss_sum += batch.loss_sum;
            row_sum += batch.rows;
        }
        const double train_loss =
            row_sum > 0 ? loss_sum / static_cast<double>(row_sum)
                        : std::numeric_limits<double>::quiet_NaN();
        double val_loss;
        try {
            val_loss = node_rollout_loss(val_ds, model_rhs, static_cast<int>(seg_len));
        } catch (const NumericalError&) {
            val_loss = std::numeric_limits<double>::quiet_NaN();
        }
        if (!std::isfinite(train_loss))
            throw NumericalError("node_euler_train: diverged at epoch " + std::to_string(epoch));
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

}  // namespace fnode::baselines
