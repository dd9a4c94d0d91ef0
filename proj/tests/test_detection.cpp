#include "ztrack/detection.hpp"
#include "ztrack/random.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

using namespace ztrack;

namespace {

FrameMask filled_rect(int w, int h, int x0, int y0, int rw, int rh) {
    FrameMask m(w, h);
    for (int y = y0; y < y0 + rh; ++y) {
        for (int x = x0; x < x0 + rw; ++x) m.set(x, y, true);
    }
    return m;
}

/// Independent flood-fill oracle (BFS, visited-set based) for component counts
/// and membership. Deliberately distinct from the library's scan.
std::vector<std::set<std::pair<int, int>>> flood_fill_oracle(const FrameMask& m) {
    std::set<std::pair<int, int>> seen;
    std::vector<std::set<std::pair<int, int>>> comps;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y) || seen.count({x, y})) continue;
            std::set<std::pair<int, int>> comp;
            std::queue<std::pair<int, int>> q;
            q.push({x, y});
            seen.insert({x, y});
            while (!q.empty()) {
                auto [cx, cy] = q.front();
                q.pop();
                comp.insert({cx, cy});
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx;
                        const int ny = cy + dy;
                        if ((dx || dy) && m.at(nx, ny) && !seen.count({nx, ny})) {
                            seen.insert({nx, ny});
                            q.push({nx, ny});
                        }
                    }
                }
            }
            comps.push_back(std::move(comp));
        }
    }
    return comps;
}

/// Rasterize a rotated rectangle centered at (cx, cy).
std::vector<PixelCoord> rotated_rect_pixels(double cx, double cy, double len, double wid,
                                            double phi_deg) {
    const double c = std::cos(deg_to_rad(phi_deg));
    const double s = std::sin(deg_to_rad(phi_deg));
    const double reach = (len + wid) / 2.0 + 2.0;
    std::vector<PixelCoord> px;
    for (int y = static_cast<int>(std::floor(cy - reach)); y <= static_cast<int>(std::ceil(cy + reach)); ++y) {
        for (int x = static_cast<int>(std::floor(cx - reach)); x <= static_cast<int>(std::ceil(cx + reach)); ++x) {
            const double dx = x - cx;
            const double dy = y - cy;
            const double u = dx * c + dy * s;
            const double v = -dx * s + dy * c;
            if (std::fabs(u) <= len / 2.0 && std::fabs(v) <= wid / 2.0) px.push_back({x, y});
        }
    }
    return px;
}

} // namespace

TEST_CASE("label_components trivial cases", "[detection]") {
    FrameMask empty(32, 32);
    CHECK(label_components(empty, 1).empty());

    FrameMask sq = filled_rect(32, 32, 4, 4, 5, 5);
    auto comps = label_components(sq, 4);
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].size() == 25);

    // Two squares separated by >= 2 background pixels.
    FrameMask two = filled_rect(40, 20, 2, 2, 5, 5);
    for (int y = 2; y < 7; ++y) {
        for (int x = 20; x < 25; ++x) two.set(x, y, true);
    }
    CHECK(label_components(two, 1).size() == 2);
}

TEST_CASE("label_components agrees with a flood-fill oracle on random masks", "[detection]") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        FrameMask m(48, 36);
        for (auto& p : m.pixels) p = rng.uniform() < 0.35 ? 1 : 0;
        auto oracle = flood_fill_oracle(m);
        auto comps = label_components(m, 1);
        REQUIRE(comps.size() == oracle.size());
        // Same partition: every component matches one oracle set exactly.
        std::set<std::set<std::pair<int, int>>> oracle_sets(oracle.begin(), oracle.end());
        for (const auto& comp : comps) {
            std::set<std::pair<int, int>> as_set;
            for (const auto& p : comp) as_set.insert({p.x, p.y});
            CHECK(oracle_sets.count(as_set) == 1);
        }
    }
}

TEST_CASE("label_components respects the area cutoff", "[detection]") {
    FrameMask m = filled_rect(32, 32, 2, 2, 3, 3); // 9 px
    m.set(20, 20, true);                           // 1 px speck
    auto comps = label_components(m, 5);
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].size() == 9);
}

TEST_CASE("pca fit matches direct covariance summation on a 41x11 rectangle", "[detection]") {
    auto px = rotated_rect_pixels(100.0, 60.0, 41.0, 11.0, 0.0);
    REQUIRE(px.size() == 41u * 11u);

    // Oracle: direct covariance of the pixel coordinates.
    double mx = 0.0, my = 0.0;
    for (const auto& p : px) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(px.size());
    my /= static_cast<double>(px.size());
    double cxx = 0.0, cyy = 0.0;
    for (const auto& p : px) {
        cxx += (p.x - mx) * (p.x - mx);
        cyy += (p.y - my) * (p.y - my);
    }
    cxx /= static_cast<double>(px.size());
    cyy /= static_cast<double>(px.size());

    Ellipse e = fit_ellipse_pca(px);
    CHECK(e.cx == Catch::Approx(mx));
    CHECK(e.cy == Catch::Approx(my));
    CHECK(e.delta == Catch::Approx(0.0).margin(1e-9));
    CHECK(e.a == Catch::Approx(2.0 * std::sqrt(cxx)).epsilon(1e-9));
    CHECK(e.b == Catch::Approx(2.0 * std::sqrt(cyy)).epsilon(1e-9));
    CHECK(e.a == Catch::Approx(23.66).margin(0.05));
    CHECK(e.b == Catch::Approx(6.32).margin(0.05));
}

TEST_CASE("pca fit recovers the rotation of a 30-degree rectangle", "[detection]") {
    auto px = rotated_rect_pixels(80.0, 80.0, 41.0, 11.0, 30.0);
    Ellipse e = fit_ellipse_pca(px);
    CHECK(e.delta >= 28.0);
    CHECK(e.delta <= 32.0);
}

TEST_CASE("pca fit on a disc gives near-equal axes", "[detection]") {
    std::vector<PixelCoord> px;
    for (int y = -15; y <= 15; ++y) {
        for (int x = -15; x <= 15; ++x) {
            if (x * x + y * y <= 15 * 15) px.push_back({x + 50, y + 50});
        }
    }
    Ellipse e = fit_ellipse_pca(px);
    CHECK(e.a <= e.b * 1.05);
}

TEST_CASE("pca fit is rotation-equivariant within rasterization error", "[detection]") {
    for (double phi = 0.0; phi < 180.0; phi += 15.0) {
        auto px = rotated_rect_pixels(100.0, 100.0, 45.0, 13.0, phi);
        REQUIRE(px.size() >= 200u);
        Ellipse e = fit_ellipse_pca(px);
        CHECK(angle_diff(e.delta, normalize_angle(phi)) <= 3.0);
    }
}

TEST_CASE("pca fit is translation-equivariant", "[detection]") {
    auto px = rotated_rect_pixels(100.0, 90.0, 41.0, 11.0, 37.0);
    Ellipse e1 = fit_ellipse_pca(px);
    const int dx = 7, dy = 11;
    auto shifted = px;
    for (auto& p : shifted) {
        p.x += dx;
        p.y += dy;
    }
    Ellipse e2 = fit_ellipse_pca(shifted);
    CHECK(e2.a == e1.a);
    CHECK(e2.b == e1.b);
    CHECK(e2.delta == e1.delta);
    CHECK(e2.cx - e1.cx == static_cast<double>(dx));
    CHECK(e2.cy - e1.cy == static_cast<double>(dy));
}

TEST_CASE("pca fit falls back gracefully on collinear pixels", "[detection]") {
    std::vector<PixelCoord> line;
    for (int x = 0; x < 21; ++x) line.push_back({x, 5});
    Ellipse e = fit_ellipse_pca(line);
    CHECK(e.delta == Catch::Approx(0.0).margin(1e-9));
    CHECK(e.a == Catch::Approx(10.0));
    CHECK(e.b == Catch::Approx(0.5));
    CHECK(e.a >= e.b);
}

TEST_CASE("detect produces observations with centroid and blob order", "[detection]") {
    FrameMask empty(16, 16);
    CHECK(detect(empty, 1).empty());

    FrameMask m = filled_rect(64, 32, 4, 4, 7, 5);
    for (int y = 20; y < 25; ++y) {
        for (int x = 40; x < 47; ++x) m.set(x, y, true);
    }
    auto obs = detect(m, 4);
    REQUIRE(obs.size() == 2);
    CHECK(obs[0].blob_id == 0);
    CHECK(obs[1].blob_id == 1);
    // Topmost blob first.
    CHECK(obs[0].y < obs[1].y);
    // Centroid equals the arithmetic mean of pixel coordinates.
    CHECK(obs[0].x == Catch::Approx(4.0 + 3.0));
    CHECK(obs[0].y == Catch::Approx(4.0 + 2.0));
    CHECK(obs[0].pixel_count == 35);
}

TEST_CASE("labels partition the sufficient-area foreground", "[detection]") {
    Rng rng(31);
    FrameMask m(40, 30);
    for (auto& p : m.pixels) p = rng.uniform() < 0.3 ? 1 : 0;
    auto det = detect_with_labels(m, 3);
    // Every labeled pixel belongs to exactly one blob; counts match.
    std::vector<long> counts(det.observations.size(), 0);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            const auto lab = det.labels.at(x, y);
            if (lab > 0) {
                REQUIRE(lab <= static_cast<int>(det.observations.size()));
                ++counts[static_cast<std::size_t>(lab - 1)];
                CHECK(m.at(x, y));
            }
        }
    }
    for (std::size_t i = 0; i < det.observations.size(); ++i) {
        CHECK(counts[i] == det.observations[i].pixel_count);
    }
}
