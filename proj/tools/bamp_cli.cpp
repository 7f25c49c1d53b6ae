// Command-line front end: generate scenes, run a single algorithm on a
// scene file, execute preset or custom sweeps, list presets.
//
// Exit codes: 0 success, 1 runtime failure, 2 config/validation failure.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "bamp/bamp.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

void handle_sigint(int) { g_interrupted.store(true); }

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

void check_output_path(const std::string& path, bool force) {
    if (path.empty()) return;
    if (std::filesystem::exists(path) && !force)
        throw bamp::invalid_parameter("output file '" + path +
                                      "' exists; pass --force to overwrite");
}

int cmd_gen_scene(const std::string& config_path, const std::string& out_path,
                  std::optional<std::uint64_t> seed_override, bool force) {
    check_output_path(out_path, force);
    const auto cfg = bamp::ConfigFile::parse_file(config_path);
    auto sc_cfg = bamp::scene_config_from(cfg);
    if (seed_override) sc_cfg.seed = *seed_override;
    const bamp::RisConfig ris = bamp::build_ris_phases(
        sc_cfg.dims.n_ris, sc_cfg.ris_bits, sc_cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const bamp::Scene scene =
        bamp::make_scene(sc_cfg.dims, sc_cfg.priors, ris, sc_cfg.snr_db, sc_cfg.seed);
    bamp::save_scene_file(scene, out_path);
    return kExitOk;
}

int cmd_run(const std::string& scene_path, const std::string& algorithm,
            const std::string& config_path, const std::string& out_path, bool force, bool quiet) {
    check_output_path(out_path, force);
    const bamp::Scene scene = bamp::load_scene_file(scene_path);
    bamp::BampConfig config;
    if (!config_path.empty()) config = bamp::bamp_config_from(bamp::ConfigFile::parse_file(config_path));

    bamp::Estimates est;
    int iters = 0;
    if (algorithm == "bamp") {
        const bamp::RunReport rep = bamp::run_bamp(scene, config, true);
        est = {rep.x_hat, rep.h_b_hat, rep.h_r_hat};
        iters = static_cast<int>(rep.per_iteration.size());
        if (!out_path.empty())
            bamp::atomic_write_file(out_path, [&](std::ostream& os) { bamp::save_report(rep, os); });
    } else if (algorithm == "bigamp_ls") {
        const bamp::BaselineReport rep = bamp::run_baseline(scene, config);
        est = {bamp::baseline_x_hat(scene, rep), rep.h_b_hat, rep.h_r_hat};
        iters = static_cast<int>(rep.stage1_residual.size());
        if (!out_path.empty())
            bamp::atomic_write_file(out_path, [&](std::ostream& os) {
                bamp::save_report(rep, bamp::baseline_x_hat(scene, rep), os);
            });
    } else {
        throw bamp::invalid_parameter("unknown algorithm '" + algorithm +
                                      "'; valid names: bamp, bigamp_ls");
    }

    const bamp::Estimates aligned =
        bamp::align_estimates(est, scene.pilot_block(), scene.anchor_rows());
    std::printf("algo=%s nmse_x=%.2f nmse_hb=%.2f nmse_hr=%.2f iters=%d\n", algorithm.c_str(),
                bamp::nmse_db(aligned.x_hat, scene.x), bamp::nmse_db(aligned.h_b_hat, scene.h_b),
                bamp::nmse_db(aligned.h_r_hat, scene.h_r), iters);
    (void)quiet;
    return kExitOk;
}

int cmd_sweep(const std::string& spec_name, const std::string& config_path,
              const std::string& scale, const std::string& out_path,
              std::optional<std::uint64_t> seed_override, std::optional<int> trials_override,
              std::vector<double> snr_override, bool force, bool quiet) {
    check_output_path(out_path, force);
    bamp::ExperimentSpec spec;
    if (!spec_name.empty()) {
        const auto preset_scale =
            (scale == "paper") ? bamp::PresetScale::paper : bamp::PresetScale::desk;
        if (scale != "paper" && scale != "desk")
            throw bamp::invalid_parameter("--scale must be 'paper' or 'desk'");
        spec = bamp::preset(spec_name, preset_scale);
    } else if (!config_path.empty()) {
        spec = bamp::experiment_from_config(bamp::ConfigFile::parse_file(config_path));
    } else {
        throw bamp::invalid_parameter("sweep needs a preset name or --config");
    }
    if (seed_override) spec.base_seed = *seed_override;
    if (trials_override) spec.trials = *trials_override;
    if (!snr_override.empty()) spec.snr_grid_db = snr_override;

    std::signal(SIGINT, handle_sigint);
    bamp::ProgressFn progress = nullptr;
    if (!quiet)
        progress = [](int done, int total) {
            if (done % std::max(total / 20, 1) == 0 || done == total)
                std::fprintf(stderr, "sweep: %d/%d trials done\n", done, total);
        };
    bool complete = true;
    const bamp::ResultTable table =
        bamp::run_experiment(spec, progress, &g_interrupted, &complete);

    bamp::write_csv(table, std::cout, complete);
    if (!out_path.empty()) {
        std::ofstream os(out_path, std::ios::trunc);
        if (!os) throw bamp::io_error("cannot open " + out_path);
        bamp::write_csv(table, os, complete);
    }
    return complete ? kExitOk : kExitRuntime;
}

int cmd_presets() {
    for (const auto& name : bamp::preset_names())
        for (const char* scale : {"paper", "desk"}) std::printf("%s --scale %s\n", name.c_str(), scale);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RIS joint channel estimation and signal recovery simulator"};
    app.require_subcommand(1);

    std::string config_path, out_path, scene_path, algorithm, scale = "desk", preset_name;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::vector<double> snr_grid;
    bool force = false, quiet = false;

    auto* gen = app.add_subcommand("gen-scene", "generate and serialize a synthetic scene");
    gen->add_option("--config", config_path, "scene config file")->required();
    gen->add_option("--out", out_path, "output scene file")->required();
    gen->add_option("--seed", seed, "override the config seed");
    gen->add_flag("--force", force, "overwrite existing output");

    auto* run = app.add_subcommand("run", "run one algorithm on a scene file");
    run->add_option("scene", scene_path, "scene file")->required();
    run->add_option("algorithm", algorithm, "bamp or bigamp_ls")->required();
    run->add_option("--config", config_path, "algorithm config file");
    run->add_option("--out", out_path, "report output file");
    run->add_flag("--force", force, "overwrite existing output");
    run->add_flag("--quiet", quiet, "suppress progress output");

    auto* sweep = app.add_subcommand("sweep", "Monte Carlo NMSE sweep, CSV to stdout");
    sweep->add_option("preset", preset_name, "preset name (fig3..fig6), or use --config");
    sweep->add_option("--config", config_path, "experiment spec file");
    sweep->add_option("--scale", scale, "preset scale: paper or desk");
    sweep->add_option("--out", out_path, "also write the CSV here");
    sweep->add_option("--seed", seed, "override base seed");
    sweep->add_option("--trials", trials, "override trial count");
    sweep->add_option("--snr", snr_grid, "override SNR grid (dB)");
    sweep->add_flag("--force", force, "overwrite existing output");
    sweep->add_flag("--quiet", quiet, "suppress progress output");

    app.add_subcommand("presets", "list available sweep presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (gen->parsed()) return cmd_gen_scene(config_path, out_path, seed, force);
        if (run->parsed()) return cmd_run(scene_path, algorithm, config_path, out_path, force, quiet);
        if (sweep->parsed())
            return cmd_sweep(preset_name, config_path, scale, out_path, seed, trials, snr_grid,
                             force, quiet);
        return cmd_presets();
    } catch (const bamp::config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const bamp::invalid_parameter& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const bamp::invalid_dimension& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
}
