#pragma once

#include "ztrack/geometry.hpp"
#include "ztrack/mask.hpp"
#include "ztrack/motion.hpp"
#include "ztrack/random.hpp"
#include "ztrack/types.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ztrack {

struct AppearanceParams {
    double sigma_delta = 1.478;    ///< inclination spread, degrees
    double mean_update_rate = 0.1; ///< EMA rate for the running size means
    bool cumulative_means = false; ///< use an all-history mean instead of EMA
};

/// Draw a body-axis inclination from N(prev_delta + theta_t, sigma_delta^2),
/// reduced to [0, 180).
inline double sample_inclination(double prev_delta, double theta_t, const AppearanceParams& p,
                                 Rng& rng) {
    return normalize_angle(rng.normal(prev_delta + theta_t, p.sigma_delta));
}

namespace detail {

inline void ellipse_pixel_range(const Ellipse& e, int& x0, int& x1, int& y0, int& y1) {
    double hx = 0.0, hy = 0.0;
    ellipse_bbox_half_extents(e, hx, hy);
    // One pixel of slack so no boundary lattice point is skipped.
    x0 = static_cast<int>(std::floor(e.cx - hx)) - 1;
    x1 = static_cast<int>(std::ceil(e.cx + hx)) + 1;
    y0 = static_cast<int>(std::floor(e.cy - hy)) - 1;
    y1 = static_cast<int>(std::ceil(e.cy + hy)) + 1;
}

} // namespace detail

/// Coverage fraction W/S: W counts foreground lattice points inside the
/// ellipse, S counts all lattice points inside it (points beyond the image
/// border still count in S, penalizing off-frame poses). Returns 0 when the
/// ellipse contains no lattice point.
inline double coverage_fraction(const Ellipse& e, const FrameMask& mask) {
    int x0, x1, y0, y1;
    detail::ellipse_pixel_range(e, x0, x1, y0, y1);
    long inside = 0, fg = 0;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            if (!ellipse_contains(e, x, y)) continue;
            ++inside;
            if (mask.at(x, y)) ++fg;
        }
    }
    return inside > 0 ? static_cast<double>(fg) / static_cast<double>(inside) : 0.0;
}

/// Coverage fraction against a single isolated blob: only pixels carrying
/// `label` count as foreground. Used when scoring linking hypotheses so a
/// pose cannot harvest weight from another target's blob.
inline double coverage_fraction_labeled(const Ellipse& e, const LabelMap& labels,
                                        std::int32_t label) {
    int x0, x1, y0, y1;
    detail::ellipse_pixel_range(e, x0, x1, y0, y1);
    long inside = 0, fg = 0;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            if (!ellipse_contains(e, x, y)) continue;
            ++inside;
            if (labels.at(x, y) == label) ++fg;
        }
    }
    return inside > 0 ? static_cast<double>(fg) / static_cast<double>(inside) : 0.0;
}

inline double weigh_particle(const Particle& particle, const FrameMask& mask) {
    return coverage_fraction(particle.ellipse, mask);
}

/// One particle per proposal, carrying the running-mean body size and a
/// sampled inclination; weights start unset.
inline std::vector<Particle> build_particle_poses(const std::vector<Vec2>& proposals,
                                                  const TargetState& state, double theta_t,
                                                  const AppearanceParams& params, Rng& rng) {
    if (!proposals.empty() && (state.mean_a <= 0.0 || state.mean_b <= 0.0)) {
        throw std::logic_error("build_particle_poses: size means not initialized");
    }
    std::vector<Particle> out;
    out.reserve(proposals.size());
    for (const auto& pos : proposals) {
        Particle p;
        p.lx = pos.x;
        p.ly = pos.y;
        p.ellipse = Ellipse{pos.x, pos.y, state.mean_a, state.mean_b,
                            sample_inclination(state.prev_delta, theta_t, params, rng)};
        p.weight = 0.0;
        out.push_back(p);
    }
    return out;
}

/// Fold a clean observation's fitted size into the running means. Must not be
/// called while the target is interacting (sizes are frozen during crossings).
inline void update_size_means(TargetState& state, const Observation& obs,
                              const AppearanceParams& params, long clean_updates_so_far) {
    if (state.interacting) {
        throw std::logic_error("update_size_means: target is interacting");
    }
    if (state.mean_a <= 0.0 || state.mean_b <= 0.0 || clean_updates_so_far == 0) {
        state.mean_a = obs.ellipse.a;
        state.mean_b = obs.ellipse.b;
        return;
    }
    if (params.cumulative_means) {
        const double n = static_cast<double>(clean_updates_so_far);
        state.mean_a = (state.mean_a * n + obs.ellipse.a) / (n + 1.0);
        state.mean_b = (state.mean_b * n + obs.ellipse.b) / (n + 1.0);
    } else {
        const double r = params.mean_update_rate;
        state.mean_a = (1.0 - r) * state.mean_a + r * obs.ellipse.a;
        state.mean_b = (1.0 - r) * state.mean_b + r * obs.ellipse.b;
    }
}

} // namespace ztrack
