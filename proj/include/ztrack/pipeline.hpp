#pragma once

#include "ztrack/config.hpp"
#include "ztrack/csv.hpp"
#include "ztrack/mask_io.hpp"
#include "ztrack/simulator.hpp"
#include "ztrack/stats.hpp"
#include "ztrack/tracker.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace ztrack {

struct TrackOptions {
    std::string frames_path;  ///< frame directory or .fmsk file
    std::string out_dir;
    std::string config_path;  ///< empty = defaults
    std::string seeds_path;   ///< explicit seeds CSV (target_id,x,y)
    bool seed_blobs = true;   ///< init targets from frame-0 blob order
    int n_targets = 0;        ///< 0 = one per frame-0 blob (seed_blobs mode)
    std::optional<std::uint64_t> seed_override;
    int threads = 1;
    std::vector<Correction> corrections;
};

namespace pipeline_detail {

inline AppConfig load_or_default(const std::string& config_path) {
    if (config_path.empty()) return AppConfig{};
    return load_config(config_path);
}

} // namespace pipeline_detail

/// Full tracking run over a frame sequence. Writes trajectories.csv,
/// events.csv, errors.csv into out_dir. Returns 0 on success, 2 on
/// unrecoverable input errors.
inline int run_track(const TrackOptions& opt) {
    namespace fs = std::filesystem;
    try {
        AppConfig cfg = pipeline_detail::load_or_default(opt.config_path);
        if (opt.seed_override) cfg.seed = *opt.seed_override;

        FrameSequenceReader reader(opt.frames_path, cfg.detection.threshold);
        if (reader.frame_count() == 0) {
            std::cerr << "track: no frames in " << opt.frames_path << "\n";
            return 2;
        }
        fs::create_directories(opt.out_dir);

        FrameMask first = reader.read(0);
        auto first_obs = detect(first, cfg.detection.min_blob_area);

        std::vector<Observation> seeds;
        if (!opt.seeds_path.empty()) {
            CsvTable t = read_csv(opt.seeds_path);
            const int xc = t.column("x");
            const int yc = t.column("y");
            const int ic = t.column("target_id");
            if (xc < 0 || yc < 0 || ic < 0) {
                std::cerr << "track: seeds file needs target_id,x,y columns\n";
                return 2;
            }
            std::vector<std::pair<int, Vec2>> rows;
            for (const auto& r : t.rows) {
                rows.push_back({std::stoi(r[static_cast<std::size_t>(ic)]),
                                {std::stod(r[static_cast<std::size_t>(xc)]),
                                 std::stod(r[static_cast<std::size_t>(yc)])}});
            }
            std::sort(rows.begin(), rows.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            for (const auto& [id, pos] : rows) {
                auto o = associate_nn(pos.x, pos.y, first_obs, 1e9);
                if (!o) {
                    std::cerr << "track: no blob near seed for target " << id << "\n";
                    return 2;
                }
                seeds.push_back(*o);
            }
        } else {
            const int want = opt.n_targets > 0 ? opt.n_targets : static_cast<int>(first_obs.size());
            if (want > static_cast<int>(first_obs.size())) {
                std::cerr << "track: " << want << " targets requested but only "
                          << first_obs.size() << " blobs in frame 0\n";
                return 2;
            }
            seeds.assign(first_obs.begin(), first_obs.begin() + want);
        }
        if (seeds.empty()) {
            std::cerr << "track: no targets to initialize\n";
            return 2;
        }

        TrackerConfig tcfg;
        tcfg.motion = cfg.motion;
        tcfg.appearance = cfg.appearance;
        tcfg.filter = cfg.filter;
        tcfg.linking = cfg.linking;
        tcfg.min_blob_area = cfg.detection.min_blob_area;
        tcfg.seed = cfg.seed;
        tcfg.threads = opt.threads;

        Tracker tracker(tcfg);
        tracker.initialize(seeds);
        for (const auto& c : opt.corrections) {
            if (c.frame < 0 || c.frame >= reader.frame_count() || c.target_id < 0 ||
                c.target_id >= static_cast<int>(tracker.target_count())) {
                std::cerr << "track: correction references nonexistent frame/target (frame "
                          << c.frame << ", target " << c.target_id << ")\n";
                return 2;
            }
        }
        tracker.add_corrections(opt.corrections);

        TrajectoryCsvWriter traj((fs::path(opt.out_dir) / "trajectories.csv").string());
        EventCsvWriter events((fs::path(opt.out_dir) / "events.csv").string());
        ErrorCsvWriter errors((fs::path(opt.out_dir) / "errors.csv").string());

        // Frame 0 rows come straight from initialization.
        for (std::size_t i = 0; i < tracker.target_count(); ++i) {
            StepReport r;
            r.frame = 0;
            r.target_id = static_cast<int>(i);
            const auto& st = tracker.filter(i).state();
            r.x = st.lx;
            r.y = st.ly;
            r.a = st.ellipse.a;
            r.b = st.ellipse.b;
            r.delta = st.ellipse.delta;
            r.weight_max = 1.0;
            traj.write(r);
        }

        for (long t = 1; t < reader.frame_count(); ++t) {
            FrameMask mask = reader.read(t);
            auto res = tracker.process_frame(mask);
            for (const auto& r : res.reports) traj.write(r);
            for (const auto& e : res.events) events.write(e);
            for (const auto& e : res.errors) errors.write(e);
        }
        return 0;
    } catch (const std::exception& ex) {
        std::cerr << "track: " << ex.what() << "\n";
        return 2;
    }
}

struct SimulateOptions {
    std::string out_dir;
    std::string config_path;
    std::string format = "fmsk"; ///< pgm | png | fmsk
    std::optional<std::uint64_t> seed_override;
};

inline int run_simulate(const SimulateOptions& opt) {
    namespace fs = std::filesystem;
    try {
        AppConfig cfg = pipeline_detail::load_or_default(opt.config_path);
        SimConfig sim = cfg.sim;
        if (opt.seed_override) sim.seed = *opt.seed_override;
        fs::create_directories(opt.out_dir);
        const std::string frames_path =
            opt.format == "fmsk" ? (fs::path(opt.out_dir) / "frames.fmsk").string()
                                 : (fs::path(opt.out_dir) / "frames").string();
        FrameSequenceWriter writer(frames_path, opt.format, sim.width, sim.height);
        GroundTruth truth =
            simulate_streaming(sim, [&](const FrameMask& m) { writer.write(m); });
        writer.close();
        write_ground_truth_csv(truth, (fs::path(opt.out_dir) / "ground_truth.csv").string());
        return 0;
    } catch (const std::exception& ex) {
        std::cerr << "simulate: " << ex.what() << "\n";
        return 2;
    }
}

struct StatsOptions {
    std::string tracks_path; ///< trajectories.csv or ground_truth.csv
    std::string out_dir;
};

inline int run_stats(const StatsOptions& opt) {
    namespace fs = std::filesystem;
    try {
        auto by_id = read_positions_by_id(opt.tracks_path);
        std::vector<std::vector<Vec2>> trajs;
        for (auto& [id, pos] : by_id) trajs.push_back(std::move(pos));
        MotionEstimate est = estimate_motion_params(trajs);

        std::vector<double> distances;
        std::vector<double> angles;
        for (const auto& traj : trajs) {
            if (traj.size() < 3) continue;
            auto d = trajectory_deltas(traj);
            distances.insert(distances.end(), d.distances.begin(), d.distances.end());
            angles.insert(angles.end(), d.turn_angles.begin(), d.turn_angles.end());
        }

        fs::create_directories(opt.out_dir);
        auto write_hist = [&](const Histogram& h, const std::string& name) {
            std::ofstream out((fs::path(opt.out_dir) / name).string());
            out << "bin_center,count\n";
            for (const auto& b : h) {
                out << csv_detail::fmt(b.center, 4) << ',' << b.count << '\n';
            }
        };
        write_hist(histogram(distances, 1.0), "distance_hist.csv");
        write_hist(histogram(angles, 1.0), "turn_hist.csv");

        auto raw_speed_fit = fit_gaussian(histogram(distances, 1.0));
        std::ofstream params((fs::path(opt.out_dir) / "params.toml").string());
        params << "# estimated motion parameters\n"
               << "mean_speed = " << csv_detail::fmt(est.mean_speed, 4) << "\n"
               << "sigma_v = " << csv_detail::fmt(est.sigma_v, 4) << "\n"
               << "sigma_theta1 = " << csv_detail::fmt(est.sigma_theta1, 4) << "\n"
               << "sigma_theta2 = " << csv_detail::fmt(est.sigma_theta2, 4) << "\n"
               << "mix_weight1 = " << csv_detail::fmt(est.mix_weight1, 4) << "\n"
               << "attenuation_d = " << csv_detail::fmt(est.attenuation_d, 4) << "\n"
               << "frac_within_15deg = " << csv_detail::fmt(est.frac_within_15, 4) << "\n"
               << "# raw histogram fit of per-frame distances\n"
               << "raw_speed_mean = " << csv_detail::fmt(raw_speed_fit.mean, 4) << "\n"
               << "raw_speed_sigma = " << csv_detail::fmt(raw_speed_fit.sigma, 4) << "\n";
        std::cout << "sigma_v=" << csv_detail::fmt(est.sigma_v, 4)
                  << " sigma_theta1=" << csv_detail::fmt(est.sigma_theta1, 4)
                  << " sigma_theta2=" << csv_detail::fmt(est.sigma_theta2, 4)
                  << " mix_weight1=" << csv_detail::fmt(est.mix_weight1, 4)
                  << " attenuation_d=" << csv_detail::fmt(est.attenuation_d, 4) << "\n";
        return 0;
    } catch (const std::exception& ex) {
        std::cerr << "stats: " << ex.what() << "\n";
        return 2;
    }
}

// ---------------------------------------------------------------------------
// Evaluation against ground truth.
// ---------------------------------------------------------------------------

struct EvalReport {
    double mean_position_error = 0.0;
    double p95_position_error = 0.0;
    double frac_correct = 0.0; ///< fraction of (frame,target) pairs within threshold of own truth
    int identity_swaps = 0;    ///< persistent correct->incorrect transitions
    long total_pairs = 0;
    std::vector<std::pair<long, int>> bad_streak_starts; ///< (frame, target) where a bad streak begins
};

/// Compare tracked positions to ground truth under an id mapping. A pair is
/// correctly associated when the track lies within `threshold` of its own
/// fish. A swap is a bad streak lasting at least `persist` frames.
inline EvalReport evaluate_mapping(const std::map<int, std::vector<Vec2>>& tracks,
                                   const std::map<int, std::vector<Vec2>>& truth,
                                   const std::map<int, int>& track_to_truth, double threshold,
                                   int persist = 5) {
    EvalReport rep;
    std::vector<double> errors;
    for (const auto& [tid, pos] : tracks) {
        auto it = track_to_truth.find(tid);
        if (it == track_to_truth.end()) continue;
        const auto& gt = truth.at(it->second);
        const std::size_t n = std::min(pos.size(), gt.size());
        int bad_run = 0;
        for (std::size_t t = 0; t < n; ++t) {
            const double dx = pos[t].x - gt[t].x;
            const double dy = pos[t].y - gt[t].y;
            const double d = std::sqrt(dx * dx + dy * dy);
            errors.push_back(d);
            ++rep.total_pairs;
            if (d <= threshold) {
                rep.frac_correct += 1.0;
                bad_run = 0;
            } else {
                ++bad_run;
                if (bad_run == persist) {
                    ++rep.identity_swaps;
                    rep.bad_streak_starts.emplace_back(static_cast<long>(t) - persist + 1, tid);
                }
            }
        }
    }
    if (rep.total_pairs > 0) rep.frac_correct /= static_cast<double>(rep.total_pairs);
    if (!errors.empty()) {
        rep.mean_position_error =
            std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
        std::sort(errors.begin(), errors.end());
        const std::size_t k = static_cast<std::size_t>(0.95 * (errors.size() - 1));
        rep.p95_position_error = errors[k];
    }
    return rep;
}

/// Identity mapping (track i <-> fish i), the init convention of run_track.
inline EvalReport evaluate(const std::map<int, std::vector<Vec2>>& tracks,
                           const std::map<int, std::vector<Vec2>>& truth, double threshold,
                           int persist = 5) {
    std::map<int, int> ident;
    for (const auto& [tid, _] : tracks) ident[tid] = tid;
    return evaluate_mapping(tracks, truth, ident, threshold, persist);
}

/// Search all track->truth bijections for the one maximizing correctly
/// associated pairs (target counts here are small enough to enumerate).
inline EvalReport evaluate_best_mapping(const std::map<int, std::vector<Vec2>>& tracks,
                                        const std::map<int, std::vector<Vec2>>& truth,
                                        double threshold, int persist = 5) {
    std::vector<int> tids;
    std::vector<int> gids;
    for (const auto& [id, _] : tracks) tids.push_back(id);
    for (const auto& [id, _] : truth) gids.push_back(id);
    if (tids.size() > gids.size() || tids.size() > 9) {
        return evaluate(tracks, truth, threshold, persist);
    }
    std::sort(gids.begin(), gids.end());
    EvalReport best;
    bool first = true;
    std::vector<int> perm = gids;
    do {
        std::map<int, int> mapping;
        for (std::size_t i = 0; i < tids.size(); ++i) mapping[tids[i]] = perm[i];
        EvalReport r = evaluate_mapping(tracks, truth, mapping, threshold, persist);
        if (first || r.frac_correct > best.frac_correct) {
            best = r;
            first = false;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

struct EvalOptions {
    std::string tracks_path;
    std::string truth_path;
    std::string out_dir;
    double threshold = 0.0; ///< 0 = one body length (22 px default)
    bool best_mapping = false;
};

inline int run_eval(const EvalOptions& opt) {
    namespace fs = std::filesystem;
    try {
        auto tracks = read_positions_by_id(opt.tracks_path);
        auto truth = read_positions_by_id(opt.truth_path);
        if (tracks.empty() || truth.empty()) {
            std::cerr << "eval: empty input\n";
            return 2;
        }
        std::size_t tn = 0, gn = 0;
        for (const auto& [id, p] : tracks) tn = std::max(tn, p.size());
        for (const auto& [id, p] : truth) gn = std::max(gn, p.size());
        if (tn != gn) {
            std::cerr << "eval: frame ranges differ (" << tn << " vs " << gn << ")\n";
            return 2;
        }
        const double threshold = opt.threshold > 0.0 ? opt.threshold : 22.0;
        EvalReport rep = opt.best_mapping ? evaluate_best_mapping(tracks, truth, threshold)
                                          : evaluate(tracks, truth, threshold);
        fs::create_directories(opt.out_dir);
        std::ofstream out((fs::path(opt.out_dir) / "eval_report.csv").string());
        out << "metric,value\n"
            << "mean_position_error," << csv_detail::fmt(rep.mean_position_error, 4) << "\n"
            << "p95_position_error," << csv_detail::fmt(rep.p95_position_error, 4) << "\n"
            << "frac_correct," << csv_detail::fmt(rep.frac_correct, 6) << "\n"
            << "identity_swaps," << rep.identity_swaps << "\n";
        std::cout << "mean_err=" << csv_detail::fmt(rep.mean_position_error, 3)
                  << " p95_err=" << csv_detail::fmt(rep.p95_position_error, 3)
                  << " frac_correct=" << csv_detail::fmt(rep.frac_correct, 4)
                  << " swaps=" << rep.identity_swaps << "\n";
        return 0;
    } catch (const std::exception& ex) {
        std::cerr << "eval: " << ex.what() << "\n";
        return 2;
    }
}

/// Corrections CSV: frame,target_id,x,y rows.
inline std::vector<Correction> read_corrections(const std::string& path) {
    CsvTable t = read_csv(path);
    const int fc = t.column("frame");
    const int ic = t.column("target_id");
    const int xc = t.column("x");
    const int yc = t.column("y");
    if (fc < 0 || ic < 0 || xc < 0 || yc < 0) {
        throw std::runtime_error("corrections CSV needs frame,target_id,x,y columns");
    }
    std::vector<Correction> out;
    for (const auto& row : t.rows) {
        Correction c;
        c.frame = std::stol(row[static_cast<std::size_t>(fc)]);
        c.target_id = std::stoi(row[static_cast<std::size_t>(ic)]);
        c.x = std::stod(row[static_cast<std::size_t>(xc)]);
        c.y = std::stod(row[static_cast<std::size_t>(yc)]);
        out.push_back(c);
    }
    return out;
}

struct CorrectOptions {
    TrackOptions track;
    std::string corrections_path;
};

/// Re-run tracking with the corrections pinned. Deterministic given the seed,
/// so frames before the earliest correction reproduce the original run.
inline int run_correct(const CorrectOptions& opt) {
    try {
        TrackOptions topt = opt.track;
        auto corr = read_corrections(opt.corrections_path);
        topt.corrections.insert(topt.corrections.end(), corr.begin(), corr.end());
        return run_track(topt);
    } catch (const std::exception& ex) {
        std::cerr << "correct: " << ex.what() << "\n";
        return 2;
    }
}

} // namespace ztrack
