#pragma once

#include "ztrack/geometry.hpp"

#include <cstdint>
#include <vector>

namespace ztrack {

/// Per-frame movement-distance state of one target: last realized distance
/// plus its first and second finite differences (dt = 1 frame). The jerk is
/// not stored; it enters only as process noise when distances are sampled.
struct DistanceState {
    double L = 0.0;     ///< pixels, >= 0
    double Ldot = 0.0;  ///< pixels/frame
    double Lddot = 0.0; ///< pixels/frame^2
};

/// One detected blob: centroid, fitted pose, and size.
struct Observation {
    double x = 0.0;
    double y = 0.0;
    Ellipse ellipse;
    int pixel_count = 0;
    int blob_id = -1; ///< index within the frame, in labeling order
};

/// One position+pose hypothesis with its coverage weight (a pixel fraction
/// in [0,1] before normalization).
struct Particle {
    double lx = 0.0;
    double ly = 0.0;
    Ellipse ellipse;
    double weight = 0.0;
};

/// Tracked estimate for one target. `heading` is the signed travel direction
/// in degrees; it disambiguates the unsigned body axis `ellipse.delta` using
/// the displacement history. While `heading_locked` is false (first frames,
/// or after a reset with no displacement yet) particles split between both
/// axis directions.
struct TargetState {
    int id = -1;
    double lx = 0.0;
    double ly = 0.0;
    Ellipse ellipse;
    DistanceState dist;
    double prev_delta = 0.0;      ///< delta at t-1, degrees in [0,180)
    double prev_prev_delta = 0.0; ///< delta at t-2
    double mean_a = 0.0;          ///< running mean body half-length
    double mean_b = 0.0;          ///< running mean body half-width
    bool interacting = false;
    double heading = 0.0;
    bool heading_locked = false;
};

/// Outcome of one filter step, one CSV row per (frame, target).
struct StepReport {
    long frame = 0;
    int target_id = -1;
    double x = 0.0;
    double y = 0.0;
    double a = 0.0;
    double b = 0.0;
    double delta = 0.0;
    double weight_max = 0.0; ///< best particle's raw coverage fraction
    bool interacting = false;
    bool lost = false;
    double ess = 0.0;
    int clamped_proposals = 0;
};

/// Row of errors.csv: the filter estimate drifted past the configured
/// deviation from its associated observation and was reinitialized there.
struct ErrorRecord {
    long frame = 0;
    int target_id = -1;
    double predicted_x = 0.0;
    double predicted_y = 0.0;
    double observed_x = 0.0;
    double observed_y = 0.0;
    double deviation = 0.0;
};

/// Row of events.csv: one trajectory-linking commit.
struct LinkingEvent {
    long frame = 0;
    std::vector<int> group_targets;
    std::vector<int> blob_ids;
    std::vector<std::pair<int, int>> chosen; ///< target -> blob
    std::vector<double> all_scores;          ///< hypothesis scores, enumeration order
    bool fallback = false;                   ///< greedy fallback was used
};

} // namespace ztrack
