#include "fnode/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

#include "fnode/errors.hpp"
#include "fnode/io_util.hpp"

namespace fnode {

using nlohmann::json;

std::vector<double> TrainedModel::eval_rhs(std::span<const double> state,
                                           std::span<const double> control) const {
    const std::size_t n_pts = static_cast<std::size_t>(space.points());
    const std::size_t d_i = static_cast<std::size_t>(mlp.input_dim());
    Array2d rows(space.is_pde() ? n_pts : 1, d_i);
    features::snapshot_features(feature_spec, space, state, control, rows);
    norm.apply_rows(rows);

    if (!space.is_pde()) {
        std::vector<double> out(static_cast<std::size_t>(mlp.output_dim()));
        mlp.forward(rows.row(0), out);
        return out;
    }
    Array2d y;
    nn::forward_batch(mlp, rows, y);
    if (y.cols() != 1) throw ShapeError("eval_rhs: PDE networks must be scalar-valued per point");
    return std::vector<double>(y.data(), y.data() + y.rows());
}

integrate::Rhs make_model_rhs(const TrainedModel& model, const Array2d& controls,
                              std::span<const double> times) {
    if (controls.rows() != times.size())
        throw ShapeError("make_model_rhs: control rows must match times");
    if (times.size() < 2) throw InvalidInputError("make_model_rhs: need at least 2 time points");

    // copy the series so the closure owns its data
    std::vector<double> ts(times.begin(), times.end());
    Array2d us = controls;
    const double t0 = ts.front(), t1 = ts.back();
    const double eps = 1e-9 * std::max(1.0, std::abs(t1 - t0));

    return [model = &model, ts = std::move(ts), us = std::move(us), t0, t1, eps](
               double t, std::span<const double> y, std::span<double> dy) {
        if (t < t0 - eps || t > t1 + eps)
            throw InvalidInputError("rollout: control interpolation out of range at t=" +
                                    std::to_string(t));
        const double tc = std::clamp(t, t0, t1);
        const auto it = std::upper_bound(ts.begin(), ts.end(), tc);
        const std::size_t hi = std::min<std::size_t>(
            static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - ts.begin())), ts.size() - 1);
        const std::size_t lo = hi - 1;
        const double gap = ts[hi] - ts[lo];
        const double frac = gap > 0.0 ? (tc - ts[lo]) / gap : 0.0;
        std::vector<double> u(us.cols());
        for (std::size_t c = 0; c < u.size(); ++c)
            u[c] = us(lo, c) * (1.0 - frac) + us(hi, c) * frac;
        const auto out = model->eval_rhs(y, u);
        std::copy(out.begin(), out.end(), dy.begin());
    };
}

Array2d rollout(const TrainedModel& model, std::span<const double> s0, const Array2d& controls,
                std::span<const double> times, const integrate::IntegratorConfig& config) {
    const auto rhs = make_model_rhs(model, controls, times);
    return integrate::solve(rhs, s0, times, config);
}

namespace {

json space_to_json(const SpaceInfo& space) {
    json g;
    if (space.grid1d) {
        g = {{"kind", "grid1d"},
             {"nx", space.grid1d->nx},
             {"lx", space.grid1d->lx},
             {"cutoff", space.grid1d->cutoff}};
    } else if (space.grid2d) {
        g = {{"kind", "grid2d"},     {"nx", space.grid2d->nx},
             {"ny", space.grid2d->ny}, {"lx", space.grid2d->lx},
             {"ly", space.grid2d->ly}, {"cutoff_x", space.grid2d->cutoff_x},
             {"cutoff_y", space.grid2d->cutoff_y}};
    } else {
        g = {{"kind", "none"}};
    }
    return g;
}

SpaceInfo space_from_json(const json& g) {
    SpaceInfo space;
    const std::string kind = g.at("kind").get<std::string>();
    if (kind == "grid1d") {
        space.grid1d =
            Grid1d{g.at("nx").get<int>(), g.at("lx").get<double>(), g.at("cutoff").get<int>()};
    } else if (kind == "grid2d") {
        space.grid2d = spectral::Grid2d::create(
            g.at("nx").get<int>(), g.at("ny").get<int>(), g.at("lx").get<double>(),
            g.at("ly").get<double>(), g.at("cutoff_x").get<int>(), g.at("cutoff_y").get<int>());
    }
    return space;
}

}  // namespace

void save_checkpoint(const TrainedModel& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
    json header;
    header["schema_version"] = 1;
    header["format"] = "fnode-checkpoint";
    header["dtype"] = "float64";
    header["endianness"] = "little";
    header["layer_sizes"] = model.mlp.layer_sizes();
    header["activation"] = nn::to_string(model.mlp.activation());
    header["seed"] = meta.seed;
    header["method"] = meta.method;
    header["data_hash"] = meta.data_hash;
    header["loss_form"] = meta.loss_form;
    header["system"] = to_string(model.kind);
    header["grid"] = space_to_json(model.space);
    header["feature_spec"] = {{"includes_control", model.feature_spec.includes_control},
                              {"spatial_orders", model.feature_spec.spatial_orders},
                              {"ns_priors", model.feature_spec.ns_priors}};
    header["normalization"] = {{"mean", model.norm.mean}, {"inv_std", model.norm.inv_std}};

    std::string out = header.dump();
    out.push_back('\n');
    append_f64_block(out, model.mlp.params());
    atomic_write_file(path, out);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    const std::size_t nl = bytes.find('\n');
    if (nl == std::string::npos) throw ConfigError("checkpoint: missing header line");
    const json header = json::parse(bytes.substr(0, nl));
    if (header.value("format", "") != "fnode-checkpoint")
        throw ConfigError("checkpoint: wrong format tag");

    LoadedCheckpoint lc;
    lc.model.mlp = nn::MlpModel(header.at("layer_sizes").get<std::vector<int>>(),
                                nn::activation_from_string(header.at("activation").get<std::string>()));
    lc.model.kind = system_kind_from_string(header.at("system").get<std::string>());
    lc.model.space = space_from_json(header.at("grid"));
    lc.model.feature_spec.includes_control =
        header.at("feature_spec").at("includes_control").get<bool>();
    lc.model.feature_spec.spatial_orders =
        header.at("feature_spec").at("spatial_orders").get<std::vector<std::pair<int, int>>>();
    lc.model.feature_spec.ns_priors = header.at("feature_spec").at("ns_priors").get<bool>();
    lc.model.norm.mean = header.at("normalization").at("mean").get<std::vector<double>>();
    lc.model.norm.inv_std = header.at("normalization").at("inv_std").get<std::vector<double>>();
    lc.meta.seed = header.at("seed").get<std::uint64_t>();
    lc.meta.method = header.at("method").get<std::string>();
    lc.meta.data_hash = header.at("data_hash").get<std::string>();
    lc.meta.loss_form = header.at("loss_form").get<std::string>();

    std::size_t offset = nl + 1;
    const auto params = read_f64_block(bytes, offset, lc.model.mlp.n_params());
    if (offset != bytes.size()) throw ConfigError("checkpoint: trailing bytes");
    std::copy(params.begin(), params.end(), lc.model.mlp.params().begin());
    return lc;
}

}  // namespace fnode
