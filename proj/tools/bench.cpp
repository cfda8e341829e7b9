// Compares the OpenMP kernels against their serial references: wall time,
// speedup, and the largest absolute disagreement (zero where the parallel
// path is defined to be bitwise identical).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fnode/grf.hpp"
#include "fnode/nn.hpp"
#include "fnode/reference.hpp"
#include "fnode/rng.hpp"
#include "fnode/spectral.hpp"
#include "fnode/systems.hpp"
#include "fnode/training.hpp"

using namespace fnode;

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <typename F>
double time_it(F&& fn, int reps) {
    const double t0 = now_s();
    for (int i = 0; i < reps; ++i) fn();
    return (now_s() - t0) / reps;
}

void report(const char* name, double serial_s, double parallel_s, double max_diff) {
    std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   max|diff| %.3g\n",
                name, serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s, max_diff);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP disabled)\n");
#endif

    {  // batch loss + gradient, the training hot path
        Rng rng(7);
        const std::size_t rows = 8192, d_i = 6, d_o = 1;
        Array2d x(rows, d_i), y(rows, d_o);
        for (double& v : x.flat()) v = rng.gaussian();
        for (double& v : y.flat()) v = rng.gaussian();
        const auto model = nn::MlpModel::init({6, 128, 128, 128, 1}, 13);

        nn::LossGradResult a, b;
        const double ts = time_it(
            [&] { a = reference::loss_and_grad_serial(model, x, y, nn::LossForm::MeanSquared); }, 3);
        const double tp =
            time_it([&] { b = nn::loss_and_grad(model, x, y, nn::LossForm::MeanSquared); }, 3);
        double diff = std::abs(a.loss - b.loss);
        for (std::size_t i = 0; i < a.grads.size(); ++i)
            diff = std::max(diff, std::abs(a.grads[i] - b.grads[i]));
        report("batch loss+grad (8192x6)", ts, tp, diff);
    }

    {  // RBF covariance assembly
        Rng rng(11);
        std::vector<double> pts(1500);
        for (double& v : pts) v = rng.uniform();
        Array2d a, b;
        const double ts = time_it([&] { a = reference::covariance_serial(pts, 1, 0.1); }, 3);
        const double tp = time_it([&] { b = grf::covariance(pts, 1, 0.1); }, 3);
        double diff = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            diff = std::max(diff, std::abs(a.data()[i] - b.data()[i]));
        report("rbf covariance (1500^2)", ts, tp, diff);
    }

    {  // Fourier gradient targets across a dataset
        auto spec = systems::SystemSpec::parametric2d(5.0);
        systems::GenerateOptions opts;
        opts.n_samples = 50;
        opts.n_points = 512;
        opts.seed = 3;
        opts.control_grf = {0.0, 0.15, 10.0, 1e-8};
        const auto ds = systems::generate_dataset(spec, opts);

        training::TargetSet a, b;
        const double ts = time_it([&] { a = reference::build_targets_serial(ds, 128); }, 2);
        const double tp = time_it([&] { b = training::build_targets(ds, 128); }, 2);
        double diff = 0.0;
        for (std::size_t s = 0; s < a.targets.size(); ++s)
            for (std::size_t i = 0; i < a.targets[s].size(); ++i)
                diff = std::max(diff,
                                std::abs(a.targets[s].data()[i] - b.targets[s].data()[i]));
        report("gradient targets (50x512)", ts, tp, diff);
    }

    {  // direct-sum transform vs FFT route
        Rng rng(23);
        std::vector<double> series(2048);
        for (double& v : series) v = rng.gaussian();
        spectral::Spectrum a, b;
        const double ts = time_it([&] { a = reference::dft_direct(series); }, 2);
        const double tp = time_it([&] { b = spectral::dft(series); }, 2);
        double diff = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
        report("dft direct vs fft (2048)", ts, tp, diff);
    }

    return 0;
}
