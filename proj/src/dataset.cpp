#include "fnode/dataset.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

#include "fnode/errors.hpp"
#include "fnode/io_util.hpp"

namespace fnode {

using nlohmann::json;

std::string to_string(SystemKind kind) {
    switch (kind) {
        case SystemKind::Parametric2D: return "parametric2d";
        case SystemKind::Lorenz63: return "lorenz63";
        case SystemKind::KDV: return "kdv";
        case SystemKind::DR: return "dr";
        case SystemKind::KS: return "ks";
        case SystemKind::NS: return "ns";
    }
    throw InternalError("to_string(SystemKind): unknown value");
}

SystemKind system_kind_from_string(const std::string& name) {
    if (name == "parametric2d") return SystemKind::Parametric2D;
    if (name == "lorenz63") return SystemKind::Lorenz63;
    if (name == "kdv") return SystemKind::KDV;
    if (name == "dr") return SystemKind::DR;
    if (name == "ks") return SystemKind::KS;
    if (name == "ns") return SystemKind::NS;
    throw ConfigError("unknown system kind: " + name);
}

bool TimeSeriesDataset::uniform_spacing() const {
    if (samples.empty() || samples[0].times.size() < 2) return false;
    const auto& t = samples[0].times;
    const double step = t[1] - t[0];
    for (const auto& s : samples) {
        for (std::size_t i = 1; i < s.times.size(); ++i)
            if (std::abs((s.times[i] - s.times[i - 1]) - step) > 1e-9) return false;
    }
    return true;
}

double TimeSeriesDataset::dt() const {
    if (samples.empty() || samples[0].times.size() < 2)
        throw InvalidInputError("dataset.dt(): need at least 2 points");
    return samples[0].times[1] - samples[0].times[0];
}

void TimeSeriesDataset::validate() const {
    if (samples.empty()) throw InvalidInputError("dataset: no samples");
    const std::size_t n = samples[0].times.size();
    const std::size_t sd = samples[0].states.cols();
    const std::size_t cd = samples[0].controls.cols();
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto& tr = samples[s];
        if (tr.times.size() != n || tr.states.rows() != n || tr.controls.rows() != n ||
            tr.states.cols() != sd || tr.controls.cols() != cd)
            throw ShapeError("dataset: sample " + std::to_string(s) + " has inconsistent shapes");
        for (std::size_t i = 1; i < n; ++i)
            if (!(tr.times[i] > tr.times[i - 1]))
                throw InvalidInputError("dataset: times not strictly increasing in sample " +
                                        std::to_string(s));
    }
    if (space.is_pde() && sd != static_cast<std::size_t>(space.points()))
        throw ShapeError("dataset: state dim does not match grid size");
}

namespace {

json grid_to_json(const SpaceInfo& space) {
    json g;
    if (space.grid1d) {
        g["kind"] = "grid1d";
        g["nx"] = space.grid1d->nx;
        g["lx"] = space.grid1d->lx;
        g["cutoff"] = space.grid1d->cutoff;
    } else if (space.grid2d) {
        g["kind"] = "grid2d";
        g["nx"] = space.grid2d->nx;
        g["ny"] = space.grid2d->ny;
        g["lx"] = space.grid2d->lx;
        g["ly"] = space.grid2d->ly;
        g["cutoff_x"] = space.grid2d->cutoff_x;
        g["cutoff_y"] = space.grid2d->cutoff_y;
    } else {
        g["kind"] = "none";
    }
    return g;
}

SpaceInfo grid_from_json(const json& g) {
    SpaceInfo space;
    const std::string kind = g.at("kind").get<std::string>();
    if (kind == "grid1d") {
        space.grid1d = Grid1d{g.at("nx").get<int>(), g.at("lx").get<double>(),
                              g.at("cutoff").get<int>()};
    } else if (kind == "grid2d") {
        space.grid2d = spectral::Grid2d::create(g.at("nx").get<int>(), g.at("ny").get<int>(),
                                                g.at("lx").get<double>(), g.at("ly").get<double>(),
                                                g.at("cutoff_x").get<int>(),
                                                g.at("cutoff_y").get<int>());
    } else if (kind != "none") {
        throw ConfigError("dataset header: unknown grid kind " + kind);
    }
    return space;
}

}  // namespace

void save_dataset(const TimeSeriesDataset& ds, const std::filesystem::path& path,
                  const std::string& config_hash) {
    ds.validate();
    const std::size_t s = ds.n_samples(), n = ds.n_points();
    const std::size_t sd = ds.state_dim(), cd = ds.control_dim();

    json header;
    header["schema_version"] = 1;
    header["format"] = "fnode-dataset";
    header["dtype"] = "float64";
    header["endianness"] = "little";
    header["config_hash"] = config_hash;
    header["system"] = to_string(ds.kind);
    header["grid"] = grid_to_json(ds.space);
    header["n_samples"] = s;
    header["n_points"] = n;
    header["state_dim"] = sd;
    header["control_dim"] = cd;
    header["times"] = ds.samples[0].times;
    header["arrays"] = json::array({json{{"name", "states"}, {"shape", {s, n, sd}}},
                                    json{{"name", "controls"}, {"shape", {s, n, cd}}}});

    std::string out = header.dump();
    out.push_back('\n');
    for (const auto& tr : ds.samples) append_f64_block(out, tr.states.flat());
    for (const auto& tr : ds.samples) append_f64_block(out, tr.controls.flat());
    atomic_write_file(path, out);
}

namespace {

json read_header(const std::string& bytes, std::size_t& offset) {
    const std::size_t nl = bytes.find('\n');
    if (nl == std::string::npos) throw ConfigError("dataset file: missing header line");
    offset = nl + 1;
    json header = json::parse(bytes.substr(0, nl));
    if (header.value("format", "") != "fnode-dataset")
        throw ConfigError("dataset file: wrong format tag");
    if (header.value("dtype", "") != "float64" || header.value("endianness", "") != "little")
        throw ConfigError("dataset file: unsupported dtype/endianness");
    return header;
}

}  // namespace

TimeSeriesDataset load_dataset(const std::filesystem::path& path, const std::string& expected_hash) {
    const std::string bytes = read_file(path);
    std::size_t offset = 0;
    const json header = read_header(bytes, offset);
    if (!expected_hash.empty() && header.at("config_hash").get<std::string>() != expected_hash)
        throw ConfigError("dataset " + path.string() + ": config hash mismatch (regenerate data or fix config)");

    TimeSeriesDataset ds;
    ds.kind = system_kind_from_string(header.at("system").get<std::string>());
    ds.space = grid_from_json(header.at("grid"));
    const auto s = header.at("n_samples").get<std::size_t>();
    const auto n = header.at("n_points").get<std::size_t>();
    const auto sd = header.at("state_dim").get<std::size_t>();
    const auto cd = header.at("control_dim").get<std::size_t>();
    const auto times = header.at("times").get<std::vector<double>>();
    if (times.size() != n) throw ConfigError("dataset file: times length mismatch");

    ds.samples.resize(s);
    for (std::size_t i = 0; i < s; ++i) {
        ds.samples[i].times = times;
        ds.samples[i].states = Array2d(n, sd);
        const auto block = read_f64_block(bytes, offset, n * sd);
        std::copy(block.begin(), block.end(), ds.samples[i].states.data());
    }
    for (std::size_t i = 0; i < s; ++i) {
        ds.samples[i].controls = Array2d(n, cd);
        const auto block = read_f64_block(bytes, offset, n * cd);
        std::copy(block.begin(), block.end(), ds.samples[i].controls.data());
    }
    if (offset != bytes.size()) throw ConfigError("dataset file: trailing bytes");
    ds.validate();
    return ds;
}

std::string dataset_config_hash(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    std::size_t offset = 0;
    return read_header(bytes, offset).at("config_hash").get<std::string>();
}

}  // namespace fnode
