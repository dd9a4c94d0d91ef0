#pragma once

#include "ztrack/geometry.hpp"
#include "ztrack/mask.hpp"
#include "ztrack/types.hpp"

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

namespace ztrack {

struct PixelCoord {
    int x = 0;
    int y = 0;
    bool operator==(const PixelCoord&) const = default;
};

/// Maximal 8-connected foreground components with area >= min_blob_area,
/// ordered by first pixel encountered in row-major scan (topmost, then
/// leftmost). Components below the area cutoff are dropped.
inline std::vector<std::vector<PixelCoord>> label_components(const FrameMask& mask,
                                                             int min_blob_area) {
    if (!mask.well_formed()) throw std::invalid_argument("label_components: malformed mask");
    std::vector<std::vector<PixelCoord>> out;
    if (mask.width == 0 || mask.height == 0) return out;

    std::vector<std::uint8_t> visited(mask.pixels.size(), 0);
    std::vector<PixelCoord> stack;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * mask.width + x;
            if (mask.pixels[idx] == 0 || visited[idx]) continue;
            std::vector<PixelCoord> comp;
            stack.clear();
            stack.push_back({x, y});
            visited[idx] = 1;
            while (!stack.empty()) {
                PixelCoord p = stack.back();
                stack.pop_back();
                comp.push_back(p);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const int nx = p.x + dx;
                        const int ny = p.y + dy;
                        if (!mask.in_bounds(nx, ny)) continue;
                        const std::size_t nidx = static_cast<std::size_t>(ny) * mask.width + nx;
                        if (mask.pixels[nidx] == 0 || visited[nidx]) continue;
                        visited[nidx] = 1;
                        stack.push_back({nx, ny});
                    }
                }
            }
            if (static_cast<int>(comp.size()) >= min_blob_area) out.push_back(std::move(comp));
        }
    }
    return out;
}

/// PCA ellipse fit of a pixel component. Center is the pixel centroid; delta
/// is the principal eigenvector orientation in [0,180); semi-axes are
/// 2*sqrt(eigenvalue) (the 2-sigma ellipse hugs a solid blob's outline).
///
/// Moments accumulate in int64 relative to the bounding-box minimum, so the
/// central second moments are shift-invariant integers: translating the
/// component by whole pixels leaves (a, b, delta) bitwise unchanged.
inline Ellipse fit_ellipse_pca(std::span<const PixelCoord> component) {
    if (component.empty()) throw std::invalid_argument("fit_ellipse_pca: empty component");

    int minx = component[0].x;
    int miny = component[0].y;
    for (const auto& p : component) {
        minx = std::min(minx, p.x);
        miny = std::min(miny, p.y);
    }

    const std::int64_t n = static_cast<std::int64_t>(component.size());
    std::int64_t sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (const auto& p : component) {
        const std::int64_t rx = p.x - minx;
        const std::int64_t ry = p.y - miny;
        sx += rx;
        sy += ry;
        sxx += rx * rx;
        syy += ry * ry;
        sxy += rx * ry;
    }

    Ellipse e;
    e.cx = minx + static_cast<double>(sx) / static_cast<double>(n);
    e.cy = miny + static_cast<double>(sy) / static_cast<double>(n);

    // Population covariance: C = (n*S2 - S1^2) / n^2, from exact integers.
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    const double cxx = static_cast<double>(n * sxx - sx * sx) / n2;
    const double cyy = static_cast<double>(n * syy - sy * sy) / n2;
    const double cxy = static_cast<double>(n * sxy - sx * sy) / n2;

    const double tr = cxx + cyy;
    const double disc = std::sqrt(std::max(0.0, (cxx - cyy) * (cxx - cyy) / 4.0 + cxy * cxy));
    const double l1 = tr / 2.0 + disc;
    const double l2 = tr / 2.0 - disc;

    const double angle = 0.5 * rad_to_deg(std::atan2(2.0 * cxy, cxx - cyy));

    if (l2 <= std::max(1e-9, 1e-12 * l1)) {
        // Degenerate: pixels (near-)collinear. Use half the span along the
        // principal direction and a half-pixel width.
        const double dirx = std::cos(deg_to_rad(angle));
        const double diry = std::sin(deg_to_rad(angle));
        double pmin = 0.0, pmax = 0.0;
        bool first = true;
        for (const auto& p : component) {
            const double t = (p.x - e.cx) * dirx + (p.y - e.cy) * diry;
            if (first) {
                pmin = pmax = t;
                first = false;
            } else {
                pmin = std::min(pmin, t);
                pmax = std::max(pmax, t);
            }
        }
        e.a = std::max(0.5, (pmax - pmin) / 2.0);
        e.b = 0.5;
        e.delta = normalize_angle(angle);
        return e;
    }

    e.a = 2.0 * std::sqrt(l1);
    e.b = 2.0 * std::sqrt(l2);
    e.delta = normalize_angle(angle);
    return e;
}

struct DetectionResult {
    std::vector<Observation> observations;
    LabelMap labels; ///< blob i occupies label value i+1
};

/// One Observation per labeled component, blob ids in labeling order, plus
/// the label image used to isolate single blobs during hypothesis scoring.
inline DetectionResult detect_with_labels(const FrameMask& mask, int min_blob_area) {
    DetectionResult res;
    res.labels = LabelMap(mask.width, mask.height);
    auto comps = label_components(mask, min_blob_area);
    res.observations.reserve(comps.size());
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const auto& comp = comps[i];
        Observation obs;
        obs.ellipse = fit_ellipse_pca(comp);
        obs.x = obs.ellipse.cx;
        obs.y = obs.ellipse.cy;
        obs.pixel_count = static_cast<int>(comp.size());
        obs.blob_id = static_cast<int>(i);
        res.observations.push_back(obs);
        const std::int32_t lab = static_cast<std::int32_t>(i) + 1;
        for (const auto& p : comp) res.labels.set(p.x, p.y, lab);
    }
    return res;
}

inline std::vector<Observation> detect(const FrameMask& mask, int min_blob_area) {
    return detect_with_labels(mask, min_blob_area).observations;
}

} // namespace ztrack
