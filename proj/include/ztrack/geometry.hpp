#pragma once

#include <cmath>
#include <stdexcept>

namespace ztrack {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Reduce an axis angle to [0, 180). Body-axis orientation is unsigned: an
/// ellipse at delta and delta+180 is the same ellipse.
inline double normalize_angle(double deg) {
    if (!std::isfinite(deg)) {
        throw std::invalid_argument("normalize_angle: non-finite angle");
    }
    double r = std::fmod(deg, 180.0);
    if (r < 0.0) r += 180.0;
    if (r >= 180.0) r = 0.0; // fmod rounding can land exactly on 180
    return r;
}

/// Circular distance between two axis angles, in [0, 90]. Uses the [0,180)
/// circle so orientations crossing the 0/180 seam do not read as large turns.
inline double angle_diff(double d1, double d2) {
    if (d1 < 0.0 || d1 >= 180.0 || d2 < 0.0 || d2 >= 180.0) {
        throw std::invalid_argument("angle_diff: inputs must lie in [0, 180)");
    }
    double d = std::fabs(d1 - d2);
    return std::min(d, 180.0 - d);
}

/// Wrap a signed angle to (-180, 180].
inline double wrap_signed(double deg) {
    double r = std::fmod(deg, 360.0);
    if (r <= -180.0) r += 360.0;
    if (r > 180.0) r -= 360.0;
    return r;
}

/// Fitted/predicted body pose: center, semi-axes (a >= b), major-axis angle
/// in degrees within [0, 180).
struct Ellipse {
    double cx = 0.0;
    double cy = 0.0;
    double a = 1.0; ///< semi-length along the major axis
    double b = 1.0; ///< semi-width
    double delta = 0.0;
};

/// Interior test against the rotated-ellipse quadratic form (boundary counts
/// as inside). The weighting oracle relies on this exact expression, so keep
/// the operation order stable.
inline bool ellipse_contains(const Ellipse& e, double px, double py) {
    const double dx = px - e.cx;
    const double dy = py - e.cy;
    const double c = std::cos(deg_to_rad(e.delta));
    const double s = std::sin(deg_to_rad(e.delta));
    const double u = dx * c + dy * s;
    const double v = -dx * s + dy * c;
    return (u * u) / (e.a * e.a) + (v * v) / (e.b * e.b) <= 1.0;
}

/// Half-extents of the axis-aligned bounding box of a rotated ellipse.
inline void ellipse_bbox_half_extents(const Ellipse& e, double& hx, double& hy) {
    const double c = std::cos(deg_to_rad(e.delta));
    const double s = std::sin(deg_to_rad(e.delta));
    hx = std::sqrt(e.a * e.a * c * c + e.b * e.b * s * s);
    hy = std::sqrt(e.a * e.a * s * s + e.b * e.b * c * c);
}

} // namespace ztrack
