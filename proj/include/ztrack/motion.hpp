#pragma once

#include "ztrack/geometry.hpp"
#include "ztrack/random.hpp"
#include "ztrack/types.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace ztrack {

/// Parameters of the hybrid motion model: accelerated distance prediction
/// plus the attenuating, vision-signed turning model with double-Gaussian
/// angle noise.
struct MotionParams {
    double sigma_v = 3.885;       ///< distance std, pixels
    double sigma_theta1 = 1.478;  ///< narrow turn std, degrees
    double sigma_theta2 = 7.271;  ///< wide turn std, degrees
    double mix_weight1 = 0.9;     ///< weight of the narrow component
    double attenuation_d = 0.5;   ///< turn attenuation constant, [0,1]
    int dt = 1;                   ///< frames
};

/// Deterministic distance extrapolation L + Ldot + Lddot/2 at dt=1, clamped
/// to >= 0. The jerk is not extrapolated; it enters as sampling noise.
inline double predict_distance(const DistanceState& ds) {
    const double l = ds.L + ds.Ldot + 0.5 * ds.Lddot;
    return std::max(0.0, l);
}

/// Finite-difference update after observing the realized per-frame distance.
inline DistanceState update_distance_state(const DistanceState& ds, double observed_L) {
    DistanceState out;
    out.L = observed_L;
    out.Ldot = observed_L - ds.L;
    out.Lddot = out.Ldot - ds.Ldot;
    return out;
}

/// Draw a movement distance from N(L_pred, sigma_v^2), truncated at zero by
/// rejection (distance is a magnitude).
inline double sample_distance(double L_pred, const MotionParams& p, Rng& rng) {
    for (int i = 0; i < 100; ++i) {
        const double d = rng.normal(L_pred, p.sigma_v);
        if (d >= 0.0) return d;
    }
    return 0.0;
}

struct TurnDecision {
    int sign = 1; ///< +1 counterclockwise
    bool low_confidence = false;
};

/// Turn direction from body bend: the blob centroid sits on the side the
/// fish is turning toward, so the sign of its perpendicular offset from the
/// body-axis line (oriented along the travel heading) gives the direction.
/// Near-straight bodies (|offset| < 0.25 px) get a random sign.
inline TurnDecision turning_sign_from_centroid(const TargetState& state, double blob_x,
                                               double blob_y, Rng& rng) {
    const double h = deg_to_rad(state.heading);
    const double nx = -std::sin(h);
    const double ny = std::cos(h);
    const double off = (blob_x - state.ellipse.cx) * nx + (blob_y - state.ellipse.cy) * ny;
    if (std::fabs(off) < 0.25) return {rng.coin_sign(), false};
    return {off > 0.0 ? 1 : -1, false};
}

/// As above but locating the nearest observation to the state first. With no
/// observation inside the gating distance the sign is random and flagged.
inline TurnDecision turning_sign(const TargetState& state,
                                 const std::vector<Observation>& observations,
                                 double gating_radius, Rng& rng) {
    const Observation* best = nullptr;
    double best_d2 = gating_radius * gating_radius;
    for (const auto& o : observations) {
        const double dx = o.x - state.lx;
        const double dy = o.y - state.ly;
        const double d2 = dx * dx + dy * dy;
        if (d2 <= best_d2) {
            best_d2 = d2;
            best = &o;
        }
    }
    if (!best) return {rng.coin_sign(), true};
    return turning_sign_from_centroid(state, best->x, best->y, rng);
}

/// Predicted turn magnitude: the previous frame-to-frame axis change,
/// attenuated and signed.
inline double predict_turn(const TargetState& state, int sign, const MotionParams& p) {
    const double prev_turn = angle_diff(state.prev_delta, state.prev_prev_delta);
    return static_cast<double>(sign) * p.attenuation_d * prev_turn;
}

/// Draw a turn angle from the two-component mixture
/// w1*N(theta_pred, sigma1^2) + (1-w1)*N(theta_pred, sigma2^2).
inline double sample_turn(double theta_pred, const MotionParams& p, Rng& rng) {
    const double sigma = rng.uniform() < p.mix_weight1 ? p.sigma_theta1 : p.sigma_theta2;
    return rng.normal(theta_pred, sigma);
}

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

/// Displace a position by sampled_L along (heading + sampled_theta).
inline Vec2 propose_position(double lx, double ly, double heading_deg, double sampled_L,
                             double sampled_theta_deg) {
    const double ang = deg_to_rad(heading_deg + sampled_theta_deg);
    return {lx + sampled_L * std::cos(ang), ly + sampled_L * std::sin(ang)};
}

/// Pick whichever of {axis, axis+180} lies within 90 degrees of the travel
/// direction. Keeps the signed heading consistent with the unsigned body axis.
inline double align_heading(double axis_delta, double travel_deg) {
    const double cand1 = axis_delta;
    const double cand2 = axis_delta + 180.0;
    const double d1 = std::fabs(wrap_signed(cand1 - travel_deg));
    const double d2 = std::fabs(wrap_signed(cand2 - travel_deg));
    return wrap_signed(d1 <= d2 ? cand1 : cand2);
}

} // namespace ztrack
