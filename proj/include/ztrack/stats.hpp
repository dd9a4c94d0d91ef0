#pragma once

#include "ztrack/geometry.hpp"
#include "ztrack/motion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace ztrack {

struct TrajectoryDeltas {
    std::vector<double> distances;   ///< pixels per frame
    std::vector<double> turn_angles; ///< signed heading changes, degrees
};

/// Per-frame movement distances and signed heading changes of one trajectory.
/// Headings are displacement-based; near-zero steps reuse the last heading so
/// a resting fish does not produce noise angles.
inline TrajectoryDeltas trajectory_deltas(std::span<const Vec2> positions) {
    if (positions.size() < 3) {
        throw std::invalid_argument("trajectory_deltas: need at least 3 frames");
    }
    TrajectoryDeltas out;
    out.distances.reserve(positions.size() - 1);
    std::vector<double> headings;
    headings.reserve(positions.size() - 1);
    double last_heading = 0.0;
    bool have_heading = false;
    for (std::size_t i = 1; i < positions.size(); ++i) {
        const double dx = positions[i].x - positions[i - 1].x;
        const double dy = positions[i].y - positions[i - 1].y;
        const double d = std::sqrt(dx * dx + dy * dy);
        out.distances.push_back(d);
        if (d > 1e-9) {
            last_heading = rad_to_deg(std::atan2(dy, dx));
            have_heading = true;
        }
        headings.push_back(have_heading ? last_heading : 0.0);
    }
    out.turn_angles.reserve(headings.size() - 1);
    for (std::size_t i = 1; i < headings.size(); ++i) {
        out.turn_angles.push_back(wrap_signed(headings[i] - headings[i - 1]));
    }
    return out;
}

struct HistBin {
    double center = 0.0;
    long count = 0;
};

using Histogram = std::vector<HistBin>;

/// Counts over [k*w, (k+1)*w) bins spanning the data range; centers at
/// (k+0.5)*w. Empty input gives an empty histogram.
inline Histogram histogram(std::span<const double> values, double bin_width) {
    if (bin_width <= 0.0) throw std::invalid_argument("histogram: bin_width must be positive");
    Histogram out;
    if (values.empty()) return out;
    std::map<long, long> bins;
    for (double v : values) {
        const long k = static_cast<long>(std::floor(v / bin_width));
        ++bins[k];
    }
    const long k0 = bins.begin()->first;
    const long k1 = bins.rbegin()->first;
    for (long k = k0; k <= k1; ++k) {
        HistBin b;
        b.center = (static_cast<double>(k) + 0.5) * bin_width;
        auto it = bins.find(k);
        b.count = it == bins.end() ? 0 : it->second;
        out.push_back(b);
    }
    return out;
}

struct GaussianFit {
    double mean = 0.0;
    double sigma = 0.0;
    bool degenerate = false;
};

/// Least-squares fit of A*exp(-(x-mu)^2 / (2 sigma^2)) to the histogram via
/// log-linearization, weighting each bin by its count.
inline GaussianFit fit_gaussian(const Histogram& hist) {
    std::vector<const HistBin*> nz;
    for (const auto& b : hist) {
        if (b.count > 0) nz.push_back(&b);
    }
    if (nz.size() < 3) {
        GaussianFit f;
        f.degenerate = true;
        if (!nz.empty()) {
            double tot = 0.0, s = 0.0;
            for (const auto* b : nz) {
                tot += static_cast<double>(b->count);
                s += b->center * static_cast<double>(b->count);
            }
            f.mean = s / tot;
        }
        double w = 1.0;
        if (hist.size() >= 2) w = hist[1].center - hist[0].center;
        f.sigma = w / 2.0;
        return f;
    }

    // Weighted LS of ln(count) = c0 + c1 x + c2 x^2, weights = count.
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, t0 = 0, t1 = 0, t2 = 0;
    for (const auto* b : nz) {
        const double w = static_cast<double>(b->count);
        const double x = b->center;
        const double y = std::log(w);
        const double x2 = x * x;
        s0 += w;
        s1 += w * x;
        s2 += w * x2;
        s3 += w * x2 * x;
        s4 += w * x2 * x2;
        t0 += w * y;
        t1 += w * x * y;
        t2 += w * x2 * y;
    }
    // Solve the 3x3 normal equations by Cramer's rule.
    const double a11 = s0, a12 = s1, a13 = s2;
    const double a21 = s1, a22 = s2, a23 = s3;
    const double a31 = s2, a32 = s3, a33 = s4;
    auto det3 = [](double m11, double m12, double m13, double m21, double m22, double m23,
                   double m31, double m32, double m33) {
        return m11 * (m22 * m33 - m23 * m32) - m12 * (m21 * m33 - m23 * m31) +
               m13 * (m21 * m32 - m22 * m31);
    };
    const double det = det3(a11, a12, a13, a21, a22, a23, a31, a32, a33);
    GaussianFit f;
    if (std::fabs(det) < 1e-12) {
        f.degenerate = true;
        return f;
    }
    const double c1 = det3(a11, t0, a13, a21, t1, a23, a31, t2, a33) / det;
    const double c2 = det3(a11, a12, t0, a21, a22, t1, a31, a32, t2) / det;
    if (c2 >= 0.0) {
        f.degenerate = true;
        return f;
    }
    f.sigma = std::sqrt(-1.0 / (2.0 * c2));
    f.mean = -c1 / (2.0 * c2);
    return f;
}

struct DoubleGaussianFit {
    double sigma1 = 0.0; ///< narrow component (sigma1 <= sigma2)
    double sigma2 = 0.0;
    double weight1 = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Zero-mean two-component Gaussian mixture fit by EM on the raw value list.
/// Initialized at (1, 7, 0.9); stops when the mean log-likelihood improves by
/// less than `tol` or after `max_iters`.
inline DoubleGaussianFit fit_double_gaussian(std::span<const double> values, int max_iters = 200,
                                             double tol = 1e-6) {
    if (values.size() < 6) {
        throw std::invalid_argument("fit_double_gaussian: need at least 6 values");
    }
    double s1 = 1.0, s2 = 7.0, w = 0.9;
    const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * kPi);
    auto pdf = [&](double x, double s) {
        const double z = x / s;
        return inv_sqrt2pi / s * std::exp(-0.5 * z * z);
    };
    DoubleGaussianFit fit;
    double last_ll = -1e300;
    const double n = static_cast<double>(values.size());
    for (int it = 0; it < max_iters; ++it) {
        double rw_sum = 0.0, rx1 = 0.0, rx2 = 0.0, r2_sum = 0.0;
        double ll = 0.0;
        for (double x : values) {
            const double p1 = w * pdf(x, s1);
            const double p2 = (1.0 - w) * pdf(x, s2);
            const double tot = p1 + p2;
            const double r = tot > 0.0 ? p1 / tot : 0.5;
            rw_sum += r;
            r2_sum += 1.0 - r;
            rx1 += r * x * x;
            rx2 += (1.0 - r) * x * x;
            ll += std::log(std::max(tot, 1e-300));
        }
        w = rw_sum / n;
        s1 = std::sqrt(std::max(rx1 / std::max(rw_sum, 1e-12), 1e-8));
        s2 = std::sqrt(std::max(rx2 / std::max(r2_sum, 1e-12), 1e-8));
        fit.iterations = it + 1;
        const double mean_ll = ll / n;
        if (std::fabs(mean_ll - last_ll) < tol) {
            fit.converged = true;
            break;
        }
        last_ll = mean_ll;
    }
    if (s1 > s2) {
        std::swap(s1, s2);
        w = 1.0 - w;
    }
    fit.sigma1 = s1;
    fit.sigma2 = s2;
    fit.weight1 = w;
    return fit;
}

/// Fraction of values with |v| <= bound.
inline double percentile_within(std::span<const double> values, double bound) {
    if (values.empty()) throw std::invalid_argument("percentile_within: empty input");
    long n = 0;
    for (double v : values) {
        if (std::fabs(v) <= bound) ++n;
    }
    return static_cast<double>(n) / static_cast<double>(values.size());
}

/// Regression slope of theta_t on theta_{t-1} through the origin: the
/// turn-attenuation constant of an attenuating turn process.
inline double attenuation_slope(std::span<const double> turn_angles) {
    if (turn_angles.size() < 2) return 0.0;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 1; i < turn_angles.size(); ++i) {
        num += turn_angles[i] * turn_angles[i - 1];
        den += turn_angles[i - 1] * turn_angles[i - 1];
    }
    return den > 0.0 ? num / den : 0.0;
}

struct MotionEstimate {
    double mean_speed = 0.0;
    double sigma_v = 0.0;
    double sigma_theta1 = 0.0;
    double sigma_theta2 = 0.0;
    double mix_weight1 = 0.0;
    double attenuation_d = 0.0;
    double frac_within_15 = 0.0;
    bool em_converged = false;
};

/// Recover motion parameters from trajectories: sigma_v from the unit-bin
/// distance histogram's Gaussian fit; the attenuation constant from the
/// theta_t-on-theta_{t-1} regression; the double-Gaussian turn components by
/// EM on the de-attenuated residuals.
inline MotionEstimate estimate_motion_params(const std::vector<std::vector<Vec2>>& trajectories) {
    std::vector<double> distances;
    std::vector<double> angles;
    std::vector<double> residuals;
    for (const auto& traj : trajectories) {
        if (traj.size() < 3) continue;
        auto d = trajectory_deltas(traj);
        distances.insert(distances.end(), d.distances.begin(), d.distances.end());
        angles.insert(angles.end(), d.turn_angles.begin(), d.turn_angles.end());
    }
    if (distances.empty() || angles.size() < 6) {
        throw std::invalid_argument("estimate_motion_params: not enough trajectory data");
    }
    MotionEstimate est;
    auto gfit = fit_gaussian(histogram(distances, 1.0));
    est.mean_speed = gfit.mean;
    est.sigma_v = gfit.sigma;
    est.attenuation_d = attenuation_slope(angles);
    // De-attenuate per trajectory boundary is ignored here; the slope is
    // global and boundaries contribute a negligible number of terms.
    residuals.reserve(angles.size());
    for (std::size_t i = 1; i < angles.size(); ++i) {
        residuals.push_back(angles[i] - est.attenuation_d * angles[i - 1]);
    }
    auto dg = fit_double_gaussian(residuals);
    est.sigma_theta1 = dg.sigma1;
    est.sigma_theta2 = dg.sigma2;
    est.mix_weight1 = dg.weight1;
    est.em_converged = dg.converged;
    est.frac_within_15 = percentile_within(angles, 15.0);
    return est;
}

} // namespace ztrack
