#include "fnode/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fnode/errors.hpp"
#include "fnode/io_util.hpp"

namespace fnode::metrics {

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw InvalidInputError("quantile: empty input");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

MetricsReport MetricsReport::from_samples(std::vector<SampleMetric> rows) {
    if (rows.empty()) throw InvalidInputError("metrics: empty split");
    MetricsReport r;
    r.per_sample = std::move(rows);
    std::vector<double> mses, maes;
    mses.reserve(r.per_sample.size());
    maes.reserve(r.per_sample.size());
    double mse_sum = 0.0, mae_sum = 0.0;
    for (const auto& s : r.per_sample) {
        mses.push_back(s.mse);
        maes.push_back(s.mae);
        mse_sum += s.mse;
        mae_sum += s.mae;
    }
    const double inv = 1.0 / static_cast<double>(r.per_sample.size());
    r.mse_mean = mse_sum * inv;
    r.mae_mean = mae_sum * inv;
    r.mse_median = quantile(mses, 0.5);
    r.mse_q25 = quantile(mses, 0.25);
    r.mse_q75 = quantile(mses, 0.75);
    r.mae_median = quantile(maes, 0.5);
    return r;
}

MetricsReport evaluate_rollouts(const TrainedModel& model, const TimeSeriesDataset& ds,
                                const integrate::IntegratorConfig& config) {
    ds.validate();
    std::vector<SampleMetric> rows(ds.n_samples());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(ds.n_samples()); ++i) {
        const auto& tr = ds.samples[static_cast<std::size_t>(i)];
        SampleMetric m;
        m.index = static_cast<std::size_t>(i);
        try {
            const Array2d pred =
                rollout(model, tr.initial_state(), tr.controls, tr.times, config);
            double se = 0.0, ae = 0.0;
            for (std::size_t r = 0; r < pred.rows(); ++r)
                for (std::size_t c = 0; c < pred.cols(); ++c) {
                    const double d = pred(r, c) - tr.states(r, c);
                    se += d * d;
                    ae += std::abs(d);
                }
            const double inv = 1.0 / static_cast<double>(pred.rows() * pred.cols());
            m.mse = se * inv;
            m.mae = ae * inv;
            if (!std::isfinite(m.mse)) m.mse = std::numeric_limits<double>::infinity();
            if (!std::isfinite(m.mae)) m.mae = std::numeric_limits<double>::infinity();
        } catch (const NumericalError&) {
            m.mse = std::numeric_limits<double>::infinity();
            m.mae = std::numeric_limits<double>::infinity();
        }
        rows[static_cast<std::size_t>(i)] = m;
    }
    return MetricsReport::from_samples(std::move(rows));
}

void write_metrics_csv(const MetricsReport& report, const std::filesystem::path& path) {
    std::string out = "sample,mse,mae\n";
    for (const auto& s : report.per_sample) {
        out += std::to_string(s.index);
        out += ',';
        out += format_double(s.mse);
        out += ',';
        out += format_double(s.mae);
        out += '\n';
    }
    const auto agg = [&out](const char* name, double mse, double mae) {
        out += name;
        out += ',';
        out += format_double(mse);
        out += ',';
        out += format_double(mae);
        out += '\n';
    };
    agg("mean", report.mse_mean, report.mae_mean);
    agg("median", report.mse_median, report.mae_median);
    agg("q25", report.mse_q25, std::numeric_limits<double>::quiet_NaN());
    agg("q75", report.mse_q75, std::numeric_limits<double>::quiet_NaN());
    atomic_write_file(path, out);
}

}  // namespace fnode::metrics
