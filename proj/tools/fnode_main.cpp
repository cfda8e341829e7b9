// Experiment runner: generate / train / evaluate / compare / superres.
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fnode/errors.hpp"
#include "fnode/experiment.hpp"
#include "fnode/io_util.hpp"

namespace fs = std::filesystem;
using namespace fnode;

namespace {

experiment::ExperimentConfig load_with_overrides(const std::string& config_path,
                                                 std::optional<std::uint64_t> seed) {
    auto cfg = experiment::load_config(config_path);
    if (seed) {
        cfg.data.seed = *seed;
        cfg.train.seed = *seed;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FNODE experiment runner"};
    app.require_subcommand(1);

    std::string config_path, data_dir, checkpoint_path, split = "test", out_dir;
    std::optional<std::uint64_t> seed_override;
    int target_nx = 0;
    std::vector<std::string> run_dirs;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config_path, "experiment config JSON");
        if (needs_config) opt->required();
        cmd->add_option("--seed", seed_override, "override config seeds");
        cmd->add_option("--out", out_dir, "output directory");
    };

    auto* generate = app.add_subcommand("generate", "write train/val/test datasets + manifest");
    add_common(generate, true);

    auto* train = app.add_subcommand("train", "train per config on generated datasets");
    add_common(train, true);
    train->add_option("--data", data_dir, "dataset directory (from generate)")->required();

    auto* evaluate = app.add_subcommand("evaluate", "roll out a checkpoint on a split");
    add_common(evaluate, false);
    evaluate->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    evaluate->add_option("--data", data_dir, "dataset directory")->required();
    evaluate->add_option("--split", split, "train | val | test");

    auto* compare = app.add_subcommand("compare", "combine run summaries into one table");
    compare->add_option("--runs", run_dirs, "run directories")->required()->expected(-2);
    compare->add_option("--out", out_dir, "output CSV path")->required();

    auto* superres = app.add_subcommand("superres", "evaluate a PDE checkpoint on a finer grid");
    add_common(superres, false);
    superres->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    superres->add_option("--data", data_dir, "dataset directory")->required();
    superres->add_option("--target-nx", target_nx, "evaluation grid size")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (generate->parsed()) {
            const auto cfg = load_with_overrides(config_path, seed_override);
            const fs::path out = !out_dir.empty() ? out_dir
                                 : !cfg.output_dir.empty() ? cfg.output_dir
                                                           : "out";
            experiment::run_generate(cfg, out);
            std::printf("generated datasets in %s\n", out.string().c_str());
        } else if (train->parsed()) {
            const auto cfg = load_with_overrides(config_path, seed_override);
            const fs::path out = !out_dir.empty() ? out_dir
                                 : !cfg.output_dir.empty() ? cfg.output_dir
                                                           : "out";
            experiment::run_train(cfg, data_dir, out);
            std::printf("checkpoint written to %s\n", (out / "checkpoint.fnck").string().c_str());
        } else if (evaluate->parsed()) {
            integrate::IntegratorConfig integ;
            if (!config_path.empty())
                integ = load_with_overrides(config_path, std::nullopt).integrator;
            const fs::path out = out_dir.empty() ? fs::path(checkpoint_path).parent_path() : fs::path(out_dir);
            const auto report =
                experiment::run_evaluate(checkpoint_path, data_dir, split, out, integ);
            std::printf("%s: mse mean=%s median=%s mae mean=%s\n", split.c_str(),
                        format_double(report.mse_mean).c_str(),
                        format_double(report.mse_median).c_str(),
                        format_double(report.mae_mean).c_str());
        } else if (compare->parsed()) {
            std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
            experiment::run_compare(dirs, out_dir);
            std::printf("comparison table written to %s\n", out_dir.c_str());
        } else if (superres->parsed()) {
            integrate::IntegratorConfig integ;
            if (!config_path.empty())
                integ = load_with_overrides(config_path, std::nullopt).integrator;
            const fs::path out = out_dir.empty() ? fs::path(checkpoint_path).parent_path() : fs::path(out_dir);
            const auto report =
                experiment::run_superres(checkpoint_path, data_dir, target_nx, out, integ);
            std::printf("superres nx=%d: mse mean=%s median=%s\n", target_nx,
                        format_double(report.mse_mean).c_str(),
                        format_double(report.mse_median).c_str());
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const InvalidInputError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
