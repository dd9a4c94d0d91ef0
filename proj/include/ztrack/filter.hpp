#pragma once

#include "ztrack/appearance.hpp"
#include "ztrack/detection.hpp"
#include "ztrack/mask.hpp"
#include "ztrack/motion.hpp"
#include "ztrack/random.hpp"
#include "ztrack/types.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace ztrack {

struct FilterConfig {
    int n_particles = 200;
    double gating_radius = 0.0;      ///< 0 = auto: 3*sigma_v + predicted L
    double resample_threshold = 0.5; ///< resample when ESS < threshold * n
    double error_deviation = 0.0;    ///< 0 = auto: 2 * mean_a
    int max_coast = 10;              ///< pure-prediction frames before freezing
    bool uniform_weights = false;    ///< position-only degenerate mode
    bool constant_velocity = false;  ///< degraded model: L_pred = L, no turn prediction
};

/// Nearest observation to a predicted position, if any lies within the gate.
inline std::optional<Observation> associate_nn(double pred_x, double pred_y,
                                               const std::vector<Observation>& observations,
                                               double gating_radius) {
    const Observation* best = nullptr;
    double best_d2 = gating_radius * gating_radius;
    for (const auto& o : observations) {
        const double dx = o.x - pred_x;
        const double dy = o.y - pred_y;
        const double d2 = dx * dx + dy * dy;
        if (d2 <= best_d2) {
            best_d2 = d2;
            best = &o;
        }
    }
    if (!best) return std::nullopt;
    return *best;
}

/// True when the estimate-to-observation deviation exceeds the threshold
/// (strictly), declaring a linking error.
inline bool check_linking_error(const TargetState& state, const Observation& obs,
                                double error_deviation) {
    const double dx = obs.x - state.lx;
    const double dy = obs.y - state.ly;
    return std::sqrt(dx * dx + dy * dy) > error_deviation;
}

/// Effective sample size 1/sum(w^2) of normalized weights.
inline double effective_sample_size(const std::vector<double>& normalized) {
    double s = 0.0;
    for (double w : normalized) s += w * w;
    return s > 0.0 ? 1.0 / s : 0.0;
}

/// Systematic resampling: n evenly spaced pointers with one shared random
/// offset over the cumulative weights. Lowest-variance standard scheme.
inline std::vector<std::size_t> systematic_resample_indices(const std::vector<double>& normalized,
                                                            std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    if (normalized.empty() || n == 0) return idx;
    const double step = 1.0 / static_cast<double>(n);
    double u = rng.uniform() * step;
    double cum = normalized[0];
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (u > cum && j + 1 < normalized.size()) {
            ++j;
            cum += normalized[j];
        }
        idx[i] = j;
        u += step;
    }
    return idx;
}

/// Per-target bootstrap particle filter over foreground-coverage likelihoods.
class TargetFilter {
public:
    TargetFilter(int id, const MotionParams& motion, const AppearanceParams& appearance,
                 const FilterConfig& config, std::uint64_t global_seed)
        : motion_(motion),
          appearance_(appearance),
          config_(config),
          rng_(Rng::derive(global_seed, static_cast<std::uint64_t>(id) + 1)) {
        state_.id = id;
    }

    /// Bind the filter to a blob: position and pose from the observation,
    /// kinematic history reset.
    void initialize(const Observation& obs) {
        state_.lx = obs.x;
        state_.ly = obs.y;
        state_.ellipse = obs.ellipse;
        state_.dist = DistanceState{};
        state_.prev_delta = obs.ellipse.delta;
        state_.prev_prev_delta = obs.ellipse.delta;
        state_.mean_a = obs.ellipse.a;
        state_.mean_b = obs.ellipse.b;
        state_.interacting = false;
        state_.heading = obs.ellipse.delta;
        state_.heading_locked = false;
        clean_updates_ = 1;
        age_ = 0;
        coast_ = 0;
        last_meas_x_ = obs.x;
        last_meas_y_ = obs.y;
        have_meas_ = true;
        seed_particles();
    }

    /// Rebind to a blob after a linking commit, carrying kinematic memory
    /// (distance state, angle chain, heading, size means) across the crossing.
    void reinitialize_on_blob(const Observation& obs, const DistanceState& dist,
                              double prev_delta, double prev_prev_delta, double heading,
                              double mean_a, double mean_b) {
        const double from_x = state_.lx;
        const double from_y = state_.ly;
        state_.lx = obs.x;
        state_.ly = obs.y;
        state_.ellipse = obs.ellipse;
        state_.dist = dist;
        state_.prev_delta = prev_delta;
        state_.prev_prev_delta = prev_prev_delta;
        state_.mean_a = mean_a;
        state_.mean_b = mean_b;
        state_.interacting = false;
        const double dx = obs.x - from_x;
        const double dy = obs.y - from_y;
        if (dx * dx + dy * dy > 0.25) {
            state_.heading = align_heading(obs.ellipse.delta, rad_to_deg(std::atan2(dy, dx)));
            state_.heading_locked = true;
        } else {
            state_.heading = heading;
        }
        coast_ = 0;
        last_meas_x_ = obs.x;
        last_meas_y_ = obs.y;
        have_meas_ = true;
        seed_particles();
    }

    /// Predicted position for association gating: one deterministic motion
    /// step along the locked heading (stay put while the heading is unknown).
    Vec2 predicted_position() const {
        const double l = deterministic_distance();
        if (!state_.heading_locked) return {state_.lx, state_.ly};
        return propose_position(state_.lx, state_.ly, state_.heading, l, 0.0);
    }

    double gating_radius() const {
        if (config_.gating_radius > 0.0) return config_.gating_radius;
        return 3.0 * motion_.sigma_v + deterministic_distance();
    }

    double error_deviation() const {
        if (config_.error_deviation > 0.0) return config_.error_deviation;
        return 2.0 * std::max(state_.mean_a, 1.0);
    }

    /// Draw the frame's proposal cloud: sampled distances and turns applied
    /// from the previous optimal state, poses around the predicted
    /// inclination. Shared by the normal step and by hypothesis scoring.
    std::vector<Particle> propose_particles(const std::vector<Observation>& observations,
                                            int mask_width, int mask_height) {
        const TurnDecision td = turning_sign(state_, observations, gating_radius(), rng_);
        last_theta_pred_ = config_.constant_velocity ? 0.0 : predict_turn(state_, td.sign, motion_);
        const double l_pred = deterministic_distance();

        std::vector<Particle> fresh;
        fresh.reserve(particles_.size());
        int clamped = 0;
        for (std::size_t i = 0; i < particles_.size(); ++i) {
            const double L = sample_distance(l_pred, motion_, rng_);
            const double th = sample_turn(last_theta_pred_, motion_, rng_);
            double heading = state_.heading;
            if (!state_.heading_locked && (i % 2) == 1) heading += 180.0;
            Vec2 pos = propose_position(state_.lx, state_.ly, heading, L, th);
            if (pos.x < 0.0 || pos.x > mask_width - 1.0 || pos.y < 0.0 ||
                pos.y > mask_height - 1.0) {
                pos.x = std::clamp(pos.x, 0.0, static_cast<double>(mask_width - 1));
                pos.y = std::clamp(pos.y, 0.0, static_cast<double>(mask_height - 1));
                ++clamped;
            }
            Particle p;
            p.lx = pos.x;
            p.ly = pos.y;
            p.ellipse = Ellipse{pos.x, pos.y, state_.mean_a, state_.mean_b,
                                sample_inclination(state_.prev_delta, last_theta_pred_,
                                                   appearance_, rng_)};
            fresh.push_back(p);
        }
        last_clamped_ = clamped;
        return fresh;
    }

    /// One predict-weigh-estimate-resample cycle against the frame mask.
    StepReport step(const FrameMask& mask, const std::vector<Observation>& observations) {
        particles_ = propose_particles(observations, mask.width, mask.height);
        return finish_step_with_current_particles(mask, observations);
    }

    /// Re-tether a diverged estimate to a known position (the merged blob a
    /// grouped target belongs to), keeping all kinematic memory.
    void tether(double x, double y) {
        state_.lx = x;
        state_.ly = y;
        seed_particles();
    }

    /// Clean-association appearance: the nearest observation's fitted ellipse
    /// becomes the state's appearance and the axis chain follows it.
    void snap_appearance(const Observation& obs) {
        state_.ellipse = obs.ellipse;
        state_.prev_delta = obs.ellipse.delta;
        state_.heading = align_heading(obs.ellipse.delta, state_.heading);
    }

    const TargetState& state() const { return state_; }
    TargetState& mutable_state() { return state_; }
    const std::vector<Particle>& particles() const { return particles_; }
    Rng& rng() { return rng_; }
    long age() const { return age_; }
    int coast_count() const { return coast_; }
    long clean_updates() const { return clean_updates_; }
    void count_clean_update() { ++clean_updates_; }
    const AppearanceParams& appearance_params() const { return appearance_; }

private:
    double deterministic_distance() const {
        return config_.constant_velocity ? std::max(0.0, state_.dist.L)
                                         : predict_distance(state_.dist);
    }

    void seed_particles() {
        particles_.assign(static_cast<std::size_t>(config_.n_particles), Particle{});
        for (auto& p : particles_) {
            p.lx = state_.lx;
            p.ly = state_.ly;
            p.ellipse = Ellipse{state_.lx, state_.ly, state_.mean_a, state_.mean_b,
                                state_.ellipse.delta};
            p.weight = 1.0 / static_cast<double>(config_.n_particles);
        }
    }

    StepReport finish_step_with_current_particles(const FrameMask& mask,
                                                  const std::vector<Observation>& observations) {
        StepReport rep;
        rep.frame = mask.frame_index;
        rep.target_id = state_.id;
        rep.interacting = state_.interacting;
        rep.clamped_proposals = last_clamped_;

        double total = 0.0;
        double max_w = 0.0;
        std::size_t max_i = 0;
        for (std::size_t i = 0; i < particles_.size(); ++i) {
            const double w =
                config_.uniform_weights ? 1.0 : coverage_fraction(particles_[i].ellipse, mask);
            particles_[i].weight = w;
            total += w;
            if (w > max_w) {
                max_w = w;
                max_i = i;
            }
        }
        rep.weight_max = max_w;

        if (total <= 0.0) {
            coast_frame(rep, mask);
            return rep;
        }

        std::vector<double> norm(particles_.size());
        for (std::size_t i = 0; i < particles_.size(); ++i) {
            norm[i] = particles_[i].weight / total;
        }

        const double old_x = state_.lx;
        const double old_y = state_.ly;
        double ex = 0.0, ey = 0.0;
        for (std::size_t i = 0; i < particles_.size(); ++i) {
            ex += norm[i] * particles_[i].lx;
            ey += norm[i] * particles_[i].ly;
        }
        state_.lx = ex;
        state_.ly = ey;
        state_.ellipse = particles_[max_i].ellipse;

        // Realized per-frame displacement. Measured blob positions are
        // preferred over the estimate: estimate noise otherwise feeds the
        // difference table, and the third-order extrapolation amplifies it.
        // The measurement gate allows for body extent on top of the
        // association gate so a lagging estimate can still reach its blob.
        double dx = state_.lx - old_x;
        double dy = state_.ly - old_y;
        const bool had_meas = have_meas_;
        auto meas = associate_nn(state_.lx, state_.ly, observations,
                                 gating_radius() + state_.mean_a);
        if (meas) {
            if (have_meas_) {
                dx = meas->x - last_meas_x_;
                dy = meas->y - last_meas_y_;
            } else {
                dx = meas->x - old_x;
                dy = meas->y - old_y;
            }
            last_meas_x_ = meas->x;
            last_meas_y_ = meas->y;
            have_meas_ = true;
        } else {
            have_meas_ = false;
        }
        const double realized = std::sqrt(dx * dx + dy * dy);
        // Axis chain: the measured fit anchors it in the clean case; during
        // interactions only the predicted pose is trustworthy.
        const bool use_meas_axis = meas.has_value() && !state_.interacting;
        const double axis = use_meas_axis ? meas->ellipse.delta : state_.ellipse.delta;
        // Re-acquisition displacements mix measurement and estimate error,
        // and during interactions the displacement is the merged blob's, not
        // this target's: neither may steer the heading.
        const bool displacement_trusted =
            (!meas.has_value() || had_meas) && !state_.interacting;
        if (realized > 0.5 && displacement_trusted) {
            state_.heading = align_heading(axis, rad_to_deg(std::atan2(dy, dx)));
            if (age_ >= 1) state_.heading_locked = true;
        }
        state_.dist = update_distance_state(state_.dist, realized);
        state_.prev_prev_delta = state_.prev_delta;
        state_.prev_delta = axis;

        rep.ess = effective_sample_size(norm);
        if (rep.ess < config_.resample_threshold * static_cast<double>(particles_.size())) {
            const auto idx = systematic_resample_indices(norm, particles_.size(), rng_);
            std::vector<Particle> resampled(particles_.size());
            for (std::size_t i = 0; i < idx.size(); ++i) resampled[i] = particles_[idx[i]];
            particles_ = std::move(resampled);
            const double w = 1.0 / static_cast<double>(particles_.size());
            for (auto& p : particles_) p.weight = w;
        } else {
            for (std::size_t i = 0; i < particles_.size(); ++i) particles_[i].weight = norm[i];
        }

        ++age_;
        coast_ = 0;
        fill_report_pose(rep);
        return rep;
    }

    /// All weights zero: keep the deterministic motion prediction, flag the
    /// frame, and stop advancing once the coast budget is spent.
    void coast_frame(StepReport& rep, const FrameMask& mask) {
        rep.lost = true;
        rep.ess = 0.0;
        have_meas_ = false;
        ++coast_;
        if (coast_ <= config_.max_coast) {
            const double l = deterministic_distance();
            Vec2 pos = propose_position(state_.lx, state_.ly, state_.heading, l, last_theta_pred_);
            state_.lx = std::clamp(pos.x, 0.0, static_cast<double>(mask.width - 1));
            state_.ly = std::clamp(pos.y, 0.0, static_cast<double>(mask.height - 1));
            state_.dist = update_distance_state(state_.dist, l);
            const double new_delta = normalize_angle(state_.prev_delta + last_theta_pred_);
            state_.prev_prev_delta = state_.prev_delta;
            state_.prev_delta = new_delta;
            state_.ellipse.cx = state_.lx;
            state_.ellipse.cy = state_.ly;
            state_.ellipse.delta = new_delta;
        }
        const double w = 1.0 / static_cast<double>(particles_.size());
        for (auto& p : particles_) p.weight = w;
        ++age_;
        fill_report_pose(rep);
    }

    void fill_report_pose(StepReport& rep) const {
        rep.x = state_.lx;
        rep.y = state_.ly;
        rep.a = state_.ellipse.a;
        rep.b = state_.ellipse.b;
        rep.delta = state_.ellipse.delta;
    }

    MotionParams motion_;
    AppearanceParams appearance_;
    FilterConfig config_;
    Rng rng_;
    TargetState state_;
    std::vector<Particle> particles_;
    long age_ = 0;
    int coast_ = 0;
    long clean_updates_ = 0;
    double last_theta_pred_ = 0.0;
    int last_clamped_ = 0;
    double last_meas_x_ = 0.0;
    double last_meas_y_ = 0.0;
    bool have_meas_ = false;
};

} // namespace ztrack
