#pragma once

#include "ztrack/geometry.hpp"
#include "ztrack/mask.hpp"
#include "ztrack/motion.hpp"
#include "ztrack/random.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace ztrack {

/// Synthetic fish-school generator configuration. Motion parameters are the
/// generation-side ones; the distance process is a stationary AR(1) around
/// cruise_speed whose marginal std equals sigma_v, and turns follow
/// theta_t = attenuation_d * theta_{t-1} + double-Gaussian noise.
struct SimConfig {
    int n_fish = 5;
    int width = 512;
    int height = 512;
    long n_frames = 500;
    MotionParams motion;
    double cruise_speed = 10.0;
    double speed_smoothing = 0.85; ///< AR(1) coefficient of the speed process
    double body_length = 22.0;
    double body_width = 7.0;
    double bend_amplitude = 15.0; ///< max tail bend, degrees
    double bend_gain = 2.0;       ///< tail bend per degree of turn
    double crossing_bias = 0.0;   ///< attraction toward a peer, 0 = independent
    bool bounded = true;          ///< reflect at arena walls
    std::uint64_t seed = 1;
    std::vector<Vec2> initial_positions;   ///< empty = spread on a jittered grid
    std::vector<double> initial_headings;  ///< empty = random
};

struct FishFrameTruth {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0; ///< signed travel direction, degrees
    bool bent = false;
    std::vector<int> merged_with;
};

struct GroundTruth {
    /// frames[t][fish_id]
    std::vector<std::vector<FishFrameTruth>> frames;
};

struct SimResult {
    std::vector<FrameMask> masks;
    GroundTruth truth;
};

namespace sim_detail {

struct Segment {
    double x0, y0, x1, y1;
};

inline double dist2_to_segment(const Segment& s, double px, double py) {
    const double vx = s.x1 - s.x0;
    const double vy = s.y1 - s.y0;
    const double wx = px - s.x0;
    const double wy = py - s.y0;
    const double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (s.x0 + t * vx);
    const double dy = py - (s.y0 + t * vy);
    return dx * dx + dy * dy;
}

/// Rasterize one fish as a two-segment capsule: a straight head segment and a
/// tail segment hinged at the body center. Positive bend swings the tail so
/// body mass shifts toward the counterclockwise side of the heading.
inline std::vector<std::pair<int, int>> capsule_pixels(double cx, double cy, double heading_deg,
                                                       double bend_deg, double body_length,
                                                       double body_width) {
    const double r = body_width / 2.0;
    const double seg = std::max(0.5, body_length / 2.0 - r);
    const double h = deg_to_rad(heading_deg);
    const double t = deg_to_rad(heading_deg + 180.0 - bend_deg);
    Segment head{cx, cy, cx + seg * std::cos(h), cy + seg * std::sin(h)};
    Segment tail{cx, cy, cx + seg * std::cos(t), cy + seg * std::sin(t)};

    const double reach = seg + r + 1.0;
    const int x0 = static_cast<int>(std::floor(cx - reach));
    const int x1 = static_cast<int>(std::ceil(cx + reach));
    const int y0 = static_cast<int>(std::floor(cy - reach));
    const int y1 = static_cast<int>(std::ceil(cy + reach));

    std::vector<std::pair<int, int>> px;
    const double r2 = r * r;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            if (dist2_to_segment(head, x, y) <= r2 || dist2_to_segment(tail, x, y) <= r2) {
                px.emplace_back(x, y);
            }
        }
    }
    return px;
}

struct FishState {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
    double theta_prev = 0.0;
    double speed_dev = 0.0; ///< AR(1) deviation from cruise speed
    double bend = 0.0;
    int attract_peer = -1;
};

inline double mixture_noise(const MotionParams& m, Rng& rng) {
    const double sigma = rng.uniform() < m.mix_weight1 ? m.sigma_theta1 : m.sigma_theta2;
    return rng.normal(0.0, sigma);
}

} // namespace sim_detail

/// Scripted per-frame kinematics override: returns (speed, turn) for a frame,
/// or nothing to keep the stochastic model.
using SpeedTurnScript = std::function<std::pair<double, double>(long frame)>;

namespace sim_detail {

inline void reflect_at_walls(FishState& f, const SimConfig& cfg, double margin) {
    bool hit = false;
    if (f.x < margin) {
        f.x = margin + (margin - f.x);
        f.heading = 180.0 - f.heading;
        hit = true;
    } else if (f.x > cfg.width - 1 - margin) {
        const double lim = cfg.width - 1 - margin;
        f.x = lim - (f.x - lim);
        f.heading = 180.0 - f.heading;
        hit = true;
    }
    if (f.y < margin) {
        f.y = margin + (margin - f.y);
        f.heading = -f.heading;
        hit = true;
    } else if (f.y > cfg.height - 1 - margin) {
        const double lim = cfg.height - 1 - margin;
        f.y = lim - (f.y - lim);
        f.heading = -f.heading;
        hit = true;
    }
    if (hit) {
        f.heading = wrap_signed(f.heading);
        f.theta_prev = 0.0;
    }
    f.x = std::clamp(f.x, margin, cfg.width - 1 - margin);
    f.y = std::clamp(f.y, margin, cfg.height - 1 - margin);
}

inline void render_frame(const SimConfig& cfg, const std::vector<FishState>& fish,
                         long frame_idx, FrameMask& mask, std::vector<FishFrameTruth>& truth_row) {
    mask = FrameMask(cfg.width, cfg.height, frame_idx);
    truth_row.assign(fish.size(), FishFrameTruth{});
    std::vector<std::vector<std::pair<int, int>>> rasters(fish.size());
    for (std::size_t i = 0; i < fish.size(); ++i) {
        rasters[i] = capsule_pixels(fish[i].x, fish[i].y, fish[i].heading, fish[i].bend,
                                    cfg.body_length, cfg.body_width);
        for (const auto& [px, py] : rasters[i]) {
            if (mask.in_bounds(px, py)) mask.set(px, py, true);
        }
        truth_row[i].x = fish[i].x;
        truth_row[i].y = fish[i].y;
        truth_row[i].heading = fish[i].heading;
        truth_row[i].bent = std::fabs(fish[i].bend) > 1.0;
    }
    // Pairwise raster overlap -> merged_with (symmetric).
    for (std::size_t i = 0; i < fish.size(); ++i) {
        for (std::size_t j = i + 1; j < fish.size(); ++j) {
            const double dx = fish[i].x - fish[j].x;
            const double dy = fish[i].y - fish[j].y;
            if (dx * dx + dy * dy > cfg.body_length * cfg.body_length * 1.21) continue;
            bool overlap = false;
            for (const auto& p : rasters[i]) {
                for (const auto& q : rasters[j]) {
                    const int ddx = p.first - q.first;
                    const int ddy = p.second - q.second;
                    if (std::abs(ddx) <= 1 && std::abs(ddy) <= 1) {
                        overlap = true;
                        break;
                    }
                }
                if (overlap) break;
            }
            if (overlap) {
                truth_row[i].merged_with.push_back(static_cast<int>(j));
                truth_row[j].merged_with.push_back(static_cast<int>(i));
            }
        }
    }
}

} // namespace sim_detail

/// Generate a mask sequence plus ground truth, delivering frames through a
/// callback so long runs do not need every mask in memory. `scripts[i]`, when
/// present and returning a value, pins fish i's (speed, turn) for that frame.
/// Passing a null callback skips rendering (kinematics only); merged_with is
/// then approximated from center distances.
inline GroundTruth simulate_streaming(
    const SimConfig& cfg, const std::function<void(const FrameMask&)>& on_frame,
    const std::vector<SpeedTurnScript>& scripts = {}) {
    using namespace sim_detail;
    Rng rng(cfg.seed);
    const double margin = cfg.body_length;

    std::vector<FishState> fish(static_cast<std::size_t>(cfg.n_fish));
    // Spread starting positions over a coarse grid with random jitter.
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.n_fish))));
    const int rows = (cfg.n_fish + cols - 1) / cols;
    for (int i = 0; i < cfg.n_fish; ++i) {
        const int cx = i % cols;
        const int cy = i / cols;
        const double cell_w = (cfg.width - 2.0 * margin) / cols;
        const double cell_h = (cfg.height - 2.0 * margin) / rows;
        fish[i].x = margin + (cx + 0.5) * cell_w + rng.uniform(-cell_w * 0.2, cell_w * 0.2);
        fish[i].y = margin + (cy + 0.5) * cell_h + rng.uniform(-cell_h * 0.2, cell_h * 0.2);
        fish[i].heading = rng.uniform(-180.0, 180.0);
        if (static_cast<std::size_t>(i) < cfg.initial_positions.size()) {
            fish[i].x = cfg.initial_positions[static_cast<std::size_t>(i)].x;
            fish[i].y = cfg.initial_positions[static_cast<std::size_t>(i)].y;
        }
        if (static_cast<std::size_t>(i) < cfg.initial_headings.size()) {
            fish[i].heading = cfg.initial_headings[static_cast<std::size_t>(i)];
        }
        fish[i].speed_dev = 0.0;
    }

    GroundTruth truth;
    truth.frames.resize(static_cast<std::size_t>(cfg.n_frames));
    FrameMask mask;
    auto emit = [&](long t) {
        auto& row = truth.frames[static_cast<std::size_t>(t)];
        if (on_frame) {
            render_frame(cfg, fish, t, mask, row);
            on_frame(mask);
            return;
        }
        row.assign(fish.size(), FishFrameTruth{});
        for (std::size_t i = 0; i < fish.size(); ++i) {
            row[i].x = fish[i].x;
            row[i].y = fish[i].y;
            row[i].heading = fish[i].heading;
            row[i].bent = std::fabs(fish[i].bend) > 1.0;
        }
        for (std::size_t i = 0; i < fish.size(); ++i) {
            for (std::size_t j = i + 1; j < fish.size(); ++j) {
                const double dx = fish[i].x - fish[j].x;
                const double dy = fish[i].y - fish[j].y;
                if (std::sqrt(dx * dx + dy * dy) < 0.9 * cfg.body_length) {
                    row[i].merged_with.push_back(static_cast<int>(j));
                    row[j].merged_with.push_back(static_cast<int>(i));
                }
            }
        }
    };
    emit(0);

    const double d = cfg.motion.attenuation_d;
    const double phi = std::clamp(cfg.speed_smoothing, 0.0, 0.999);
    const double innov_sigma = cfg.motion.sigma_v * std::sqrt(std::max(0.0, 1.0 - phi * phi));

    for (long t = 1; t < cfg.n_frames; ++t) {
        for (std::size_t i = 0; i < fish.size(); ++i) {
            FishState& f = fish[i];
            double theta;
            double speed;
            bool scripted = false;
            if (i < scripts.size() && scripts[i]) {
                auto st = scripts[i](t);
                speed = st.first;
                theta = st.second;
                scripted = true;
            } else {
                theta = d * f.theta_prev + mixture_noise(cfg.motion, rng);
                f.speed_dev = phi * f.speed_dev + rng.normal(0.0, innov_sigma);
                speed = cfg.cruise_speed + f.speed_dev;
                for (int k = 0; k < 100 && speed < 0.0; ++k) {
                    f.speed_dev = phi * f.speed_dev + rng.normal(0.0, innov_sigma);
                    speed = cfg.cruise_speed + f.speed_dev;
                }
                speed = std::max(0.0, speed);

                // Steer smoothly away from walls before the hard reflection
                // fallback would trigger; fish curve off, they do not bounce.
                if (cfg.bounded) {
                    const double zone = margin + 4.0 * speed + cfg.body_length;
                    const bool near_wall = f.x < zone || f.x > cfg.width - 1 - zone ||
                                           f.y < zone || f.y > cfg.height - 1 - zone;
                    if (near_wall) {
                        const double to_center = rad_to_deg(std::atan2(
                            cfg.height / 2.0 - f.y, cfg.width / 2.0 - f.x));
                        const double err = wrap_signed(to_center - f.heading);
                        if (std::fabs(err) > 25.0) {
                            theta += std::clamp(0.3 * err, -9.0, 9.0);
                        }
                    }
                }

                if (cfg.crossing_bias > 0.0 && cfg.n_fish > 1) {
                    if (f.attract_peer < 0 || (t % 120) == 0) {
                        int peer = static_cast<int>(rng.uniform() * cfg.n_fish);
                        if (peer == static_cast<int>(i)) peer = (peer + 1) % cfg.n_fish;
                        f.attract_peer = peer;
                    }
                    const FishState& peer = fish[static_cast<std::size_t>(f.attract_peer)];
                    const double bearing =
                        rad_to_deg(std::atan2(peer.y - f.y, peer.x - f.x));
                    const double err = wrap_signed(bearing - f.heading);
                    theta += std::clamp(cfg.crossing_bias * err, -4.0, 4.0);
                }
            }
            f.heading = wrap_signed(f.heading + theta);
            f.theta_prev = theta;
            f.x += speed * std::cos(deg_to_rad(f.heading));
            f.y += speed * std::sin(deg_to_rad(f.heading));
            if (cfg.bounded) reflect_at_walls(f, cfg, margin);
            f.bend = std::clamp(cfg.bend_gain * theta, -cfg.bend_amplitude, cfg.bend_amplitude);
        }
        emit(t);
    }
    return truth;
}

/// Kinematics-only run: ground truth without any rendering or wall handling
/// constraints beyond cfg.bounded. Used for statistics round trips.
inline GroundTruth simulate_kinematics(const SimConfig& cfg) {
    return simulate_streaming(cfg, nullptr);
}

inline SimResult simulate(const SimConfig& cfg, const std::vector<SpeedTurnScript>& scripts = {}) {
    SimResult res;
    res.masks.reserve(static_cast<std::size_t>(cfg.n_frames));
    res.truth = simulate_streaming(
        cfg, [&](const FrameMask& m) { res.masks.push_back(m); }, scripts);
    return res;
}

/// Two fish on converging paths meeting at the arena center: they merge and
/// separate again. Deterministic given the seed (which only jitters the
/// approach angle slightly). A nonzero merge_turn makes each fish start an
/// attenuating turn of that magnitude (random sign) once the bodies touch;
/// merge_slow scales the speed while they stay in contact, the way real fish
/// hesitate when crossing.
inline SimResult scenario_crossing(double angle_between_deg, double speed, std::uint64_t seed,
                                   int arena = 240, double body_length = 22.0,
                                   double body_width = 7.0, double merge_turn_deg = 0.0,
                                   double merge_slow = 1.0) {
    Rng rng(seed);
    const double approach = arena * 0.33;
    const long n_frames = static_cast<long>(std::ceil(2.2 * approach / speed));
    const double cx = arena / 2.0;
    const double cy = arena / 2.0;
    const double half = angle_between_deg / 2.0;
    const double jitter = rng.uniform(-3.0, 3.0);

    SimConfig cfg;
    cfg.n_fish = 2;
    cfg.width = arena;
    cfg.height = arena;
    cfg.n_frames = n_frames;
    cfg.body_length = body_length;
    cfg.body_width = body_width;
    cfg.bend_amplitude = 0.0;
    cfg.seed = seed;

    // Headings of the two fish; both aim at the center point.
    const double h0 = half + jitter;
    const double h1 = -half + jitter;

    SimResult res;
    res.truth.frames.resize(static_cast<std::size_t>(n_frames));
    std::vector<sim_detail::FishState> fish(2);
    fish[0].heading = h0;
    fish[1].heading = h1;
    // Place each fish so it reaches the center at frame n/2.
    const double t_meet = n_frames / 2.0;
    fish[0].x = cx - speed * t_meet * std::cos(deg_to_rad(h0));
    fish[0].y = cy - speed * t_meet * std::sin(deg_to_rad(h0));
    fish[1].x = cx - speed * t_meet * std::cos(deg_to_rad(h1));
    fish[1].y = cy - speed * t_meet * std::sin(deg_to_rad(h1));

    double pending[2] = {0.0, 0.0};
    bool touched = false;
    FrameMask mask;
    for (long t = 0; t < n_frames; ++t) {
        const double dxf = fish[0].x - fish[1].x;
        const double dyf = fish[0].y - fish[1].y;
        const bool in_contact = std::sqrt(dxf * dxf + dyf * dyf) < 1.1 * body_length;
        if (t > 0) {
            const double v = in_contact ? speed * merge_slow : speed;
            for (int i = 0; i < 2; ++i) {
                auto& f = fish[static_cast<std::size_t>(i)];
                if (pending[i] != 0.0) {
                    f.heading = wrap_signed(f.heading + pending[i]);
                    f.bend = std::clamp(cfg.bend_gain * pending[i], -20.0, 20.0);
                    pending[i] *= 0.5;
                    if (std::fabs(pending[i]) < 1.0) pending[i] = 0.0;
                } else {
                    f.bend = 0.0;
                }
                f.x += v * std::cos(deg_to_rad(f.heading));
                f.y += v * std::sin(deg_to_rad(f.heading));
            }
        }
        if (!touched && in_contact && merge_turn_deg != 0.0) {
            touched = true;
            pending[0] = rng.coin_sign() * merge_turn_deg * rng.uniform(0.7, 1.3);
            pending[1] = rng.coin_sign() * merge_turn_deg * rng.uniform(0.7, 1.3);
        }
        sim_detail::render_frame(cfg, fish, t, mask, res.truth.frames[static_cast<std::size_t>(t)]);
        res.masks.push_back(mask);
    }
    return res;
}

/// Single fish alternating cruise, sharp attenuating turns, and multi-frame
/// darts with high acceleration. Exercises the regime where a
/// constant-velocity model loses the target.
inline SimResult scenario_dash(std::uint64_t seed, int width = 1500, int height = 1000) {
    Rng rng(seed);
    struct Phase {
        long frames;
        double speed0, speed1; ///< linear ramp
        double turn0;          ///< initial turn, attenuates by 0.5 per frame
    };
    std::vector<Phase> phases;
    for (int block = 0; block < 3; ++block) {
        const double jit = 1.0 + rng.uniform(-0.12, 0.12);
        phases.push_back({12, 6.0, 6.0, 0.0});                       // cruise
        phases.push_back({4, 6.0, 6.0, 34.0 * jit});                 // sharp turn
        phases.push_back({8, 6.0, 6.0, 0.0});                        // settle
        phases.push_back({5, 8.0, 56.0 * jit, 0.0});                 // dart ramp
        phases.push_back({2, 56.0 * jit, 56.0 * jit, 0.0});          // hold
        phases.push_back({5, 46.0 * jit, 6.0, 0.0});                 // decelerate
    }
    phases.push_back({12, 6.0, 6.0, 0.0});

    long total = 0;
    for (const auto& p : phases) total += p.frames;

    SimConfig cfg;
    cfg.n_fish = 1;
    cfg.width = width;
    cfg.height = height;
    cfg.n_frames = total;
    cfg.bend_amplitude = 20.0;
    cfg.seed = seed;

    SimResult res;
    res.truth.frames.resize(static_cast<std::size_t>(total));
    std::vector<sim_detail::FishState> fish(1);
    fish[0].x = width * 0.22;
    fish[0].y = height * 0.5;
    fish[0].heading = rng.uniform(-15.0, 15.0);

    FrameMask mask;
    sim_detail::render_frame(cfg, fish, 0, mask, res.truth.frames[0]);
    res.masks.push_back(mask);

    long t = 1;
    double pending_turn = 0.0;
    for (const auto& ph : phases) {
        for (long k = 0; k < ph.frames && t < total; ++k, ++t) {
            const double frac = ph.frames > 1 ? static_cast<double>(k) / (ph.frames - 1) : 0.0;
            const double speed = ph.speed0 + (ph.speed1 - ph.speed0) * frac;
            double turn = 0.0;
            if (ph.turn0 != 0.0 && k == 0) {
                // Turn toward the arena center so the path stays inside.
                const double to_center = rad_to_deg(std::atan2(height / 2.0 - fish[0].y,
                                                               width / 2.0 - fish[0].x));
                const double side = wrap_signed(to_center - fish[0].heading) >= 0.0 ? 1.0 : -1.0;
                pending_turn = side * ph.turn0;
            }
            if (pending_turn != 0.0) {
                turn = pending_turn;
                pending_turn *= 0.5;
                if (std::fabs(pending_turn) < 1.0) pending_turn = 0.0;
            }
            auto& f = fish[0];
            f.heading = wrap_signed(f.heading + turn);
            f.x += speed * std::cos(deg_to_rad(f.heading));
            f.y += speed * std::sin(deg_to_rad(f.heading));
            sim_detail::reflect_at_walls(f, cfg, cfg.body_length);
            f.bend = std::clamp(cfg.bend_gain * turn, -cfg.bend_amplitude, cfg.bend_amplitude);
            sim_detail::render_frame(cfg, fish, t, mask, res.truth.frames[static_cast<std::size_t>(t)]);
            res.masks.push_back(mask);
        }
    }
    return res;
}

} // namespace ztrack
