#include "ztrack/config.hpp"
#include "ztrack/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <thread>

int main(int argc, char** argv) {
    CLI::App app{"ztrack: multi-target fish tracking over binary mask sequences"};
    app.require_subcommand(1);

    const int hw_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    // --- track ---------------------------------------------------------
    auto* track = app.add_subcommand("track", "run the tracking pipeline over a frame sequence");
    ztrack::TrackOptions topt;
    topt.threads = hw_threads;
    long track_seed = -1;
    int n_targets = 0;
    bool seed_blobs = false;
    std::string seeds_path;
    track->add_option("--frames", topt.frames_path, "frame directory or .fmsk file")->required();
    track->add_option("--out", topt.out_dir, "output directory")->required();
    track->add_option("--config", topt.config_path, "INI config file");
    track->add_option("--seed", track_seed, "override the random seed");
    track->add_option("--threads", topt.threads, "worker threads for per-target stepping");
    track->add_flag("--seed-blobs", seed_blobs, "initialize targets from frame-0 blob order");
    track->add_option("--seeds", seeds_path, "seeds CSV (target_id,x,y)");
    track->add_option("--targets", n_targets, "number of targets (with --seed-blobs; 0 = all blobs)");

    // --- simulate ------------------------------------------------------
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic fish-school sequence");
    ztrack::SimulateOptions sopt;
    long sim_seed = -1;
    simulate->add_option("--out", sopt.out_dir, "output directory")->required();
    simulate->add_option("--config", sopt.config_path, "INI config file");
    simulate->add_option("--format", sopt.format, "frame format: fmsk|pgm|png")
        ->check(CLI::IsMember({"fmsk", "pgm", "png"}));
    simulate->add_option("--seed", sim_seed, "override the simulation seed");

    // --- stats ---------------------------------------------------------
    auto* stats = app.add_subcommand("stats", "estimate motion parameters from a trajectory CSV");
    ztrack::StatsOptions stopt;
    stats->add_option("--tracks", stopt.tracks_path, "trajectories.csv or ground_truth.csv")
        ->required();
    stats->add_option("--out", stopt.out_dir, "output directory")->required();

    // --- eval ----------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "compare tracker output against ground truth");
    ztrack::EvalOptions eopt;
    eval->add_option("--tracks", eopt.tracks_path, "trajectories.csv")->required();
    eval->add_option("--truth", eopt.truth_path, "ground_truth.csv")->required();
    eval->add_option("--out", eopt.out_dir, "output directory")->required();
    eval->add_option("--threshold", eopt.threshold, "association distance threshold, px");
    eval->add_flag("--best-mapping", eopt.best_mapping,
                   "report under the optimal global track-to-truth mapping");

    // --- correct -------------------------------------------------------
    auto* correct = app.add_subcommand("correct", "re-run tracking with corrections pinned");
    ztrack::CorrectOptions copt;
    copt.track.threads = hw_threads;
    long correct_seed = -1;
    std::string correct_seeds_path;
    bool correct_seed_blobs = false;
    int correct_targets = 0;
    correct->add_option("--frames", copt.track.frames_path, "frame directory or .fmsk file")
        ->required();
    correct->add_option("--out", copt.track.out_dir, "output directory")->required();
    correct->add_option("--config", copt.track.config_path, "INI config file");
    correct->add_option("--corrections", copt.corrections_path, "corrections CSV")->required();
    correct->add_option("--seed", correct_seed, "override the random seed");
    correct->add_option("--threads", copt.track.threads, "worker threads");
    correct->add_flag("--seed-blobs", correct_seed_blobs, "initialize from frame-0 blob order");
    correct->add_option("--seeds", correct_seeds_path, "seeds CSV (target_id,x,y)");
    correct->add_option("--targets", correct_targets, "number of targets");

    // --- default-config -------------------------------------------------
    auto* defcfg = app.add_subcommand("default-config", "write a config file with every default");
    std::string defcfg_path = "ztrack.ini";
    defcfg->add_option("--out", defcfg_path, "output path");

    CLI11_PARSE(app, argc, argv);

    if (track->parsed()) {
        if (track_seed >= 0) topt.seed_override = static_cast<std::uint64_t>(track_seed);
        topt.seeds_path = seeds_path;
        topt.seed_blobs = seeds_path.empty();
        topt.n_targets = n_targets;
        (void)seed_blobs;
        return ztrack::run_track(topt);
    }
    if (simulate->parsed()) {
        if (sim_seed >= 0) sopt.seed_override = static_cast<std::uint64_t>(sim_seed);
        return ztrack::run_simulate(sopt);
    }
    if (stats->parsed()) return ztrack::run_stats(stopt);
    if (eval->parsed()) return ztrack::run_eval(eopt);
    if (correct->parsed()) {
        if (correct_seed >= 0) copt.track.seed_override = static_cast<std::uint64_t>(correct_seed);
        copt.track.seeds_path = correct_seeds_path;
        copt.track.seed_blobs = correct_seeds_path.empty();
        copt.track.n_targets = correct_targets;
        (void)correct_seed_blobs;
        return ztrack::run_correct(copt);
    }
    if (defcfg->parsed()) {
        ztrack::write_default_config(defcfg_path);
        std::cout << "wrote " << defcfg_path << "\n";
        return 0;
    }
    return 1;
}
