#include "ztrack/detection.hpp"
#include "ztrack/simulator.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace ztrack;

TEST_CASE("simulation is deterministic given the seed", "[simulator]") {
    SimConfig cfg;
    cfg.n_fish = 3;
    cfg.n_frames = 40;
    cfg.width = 256;
    cfg.height = 256;
    cfg.crossing_bias = 0.02;
    cfg.seed = 99;
    auto a = simulate(cfg);
    auto b = simulate(cfg);
    REQUIRE(a.masks.size() == b.masks.size());
    for (std::size_t t = 0; t < a.masks.size(); ++t) {
        CHECK(a.masks[t] == b.masks[t]);
        for (std::size_t i = 0; i < a.truth.frames[t].size(); ++i) {
            CHECK(a.truth.frames[t][i].x == b.truth.frames[t][i].x);
            CHECK(a.truth.frames[t][i].y == b.truth.frames[t][i].y);
            CHECK(a.truth.frames[t][i].heading == b.truth.frames[t][i].heading);
        }
    }
}

TEST_CASE("zero-noise scripted fish advances along its heading", "[simulator]") {
    SimConfig cfg;
    cfg.n_fish = 1;
    cfg.n_frames = 12;
    cfg.width = 400;
    cfg.height = 120;
    cfg.initial_positions = {{40.0, 60.0}};
    cfg.initial_headings = {0.0};
    std::vector<SpeedTurnScript> scripts = {[](long) { return std::make_pair(6.0, 0.0); }};
    auto sim = simulate(cfg, scripts);
    for (std::size_t t = 0; t < sim.truth.frames.size(); ++t) {
        const auto& f = sim.truth.frames[t][0];
        CHECK(f.x == Catch::Approx(40.0 + 6.0 * static_cast<double>(t)).margin(1e-9));
        CHECK(f.y == Catch::Approx(60.0).margin(1e-9));
        CHECK(f.heading == Catch::Approx(0.0).margin(1e-9));
    }
}

TEST_CASE("a single fish renders as one connected component", "[simulator]") {
    SimConfig cfg;
    cfg.n_fish = 1;
    cfg.n_frames = 60;
    cfg.width = 256;
    cfg.height = 256;
    cfg.seed = 4;
    auto sim = simulate(cfg);
    for (const auto& mask : sim.masks) {
        CHECK(label_components(mask, 1).size() == 1);
    }
}

TEST_CASE("ground-truth positions match raster centroids within a pixel", "[simulator]") {
    SimConfig cfg;
    cfg.n_fish = 1;
    cfg.n_frames = 150;
    cfg.width = 320;
    cfg.height = 320;
    cfg.seed = 8;
    auto sim = simulate(cfg);
    for (std::size_t t = 0; t < sim.masks.size(); ++t) {
        auto obs = detect(sim.masks[t], 10);
        REQUIRE(obs.size() == 1);
        const auto& gt = sim.truth.frames[t][0];
        CHECK(std::hypot(obs[0].x - gt.x, obs[0].y - gt.y) <= 1.0);
    }
}

TEST_CASE("crossing scenario merges and separates once", "[simulator]") {
    auto sim = scenario_crossing(90.0, 4.0, 1);
    std::vector<long> merged_frames;
    for (std::size_t t = 0; t < sim.truth.frames.size(); ++t) {
        if (!sim.truth.frames[t][0].merged_with.empty()) {
            merged_frames.push_back(static_cast<long>(t));
        }
    }
    REQUIRE(!merged_frames.empty());
    // Contiguous interval.
    for (std::size_t i = 1; i < merged_frames.size(); ++i) {
        CHECK(merged_frames[i] == merged_frames[i - 1] + 1);
    }
    // Post-separation headings differ by about the crossing angle.
    const auto& last = sim.truth.frames.back();
    CHECK(std::fabs(wrap_signed(last[0].heading - last[1].heading)) ==
          Catch::Approx(90.0).margin(7.0));
}

TEST_CASE("shallow crossings stay merged longer", "[simulator]") {
    auto count_merged = [](const SimResult& sim) {
        long n = 0;
        for (const auto& frame : sim.truth.frames) {
            if (!frame[0].merged_with.empty()) ++n;
        }
        return n;
    };
    const long steep = count_merged(scenario_crossing(90.0, 4.0, 2));
    const long shallow = count_merged(scenario_crossing(20.0, 4.0, 2));
    CHECK(shallow > steep);
}

TEST_CASE("crossing bias produces at least one merged frame", "[simulator]") {
    SimConfig cfg;
    cfg.n_fish = 2;
    cfg.n_frames = 400;
    cfg.width = 220;
    cfg.height = 220;
    cfg.crossing_bias = 0.08;
    cfg.seed = 21;
    auto sim = simulate(cfg);
    bool merged = false;
    for (const auto& frame : sim.truth.frames) {
        if (!frame[0].merged_with.empty()) merged = true;
    }
    CHECK(merged);
}

TEST_CASE("bent rendering shifts the centroid to the turn side", "[simulator]") {
    // One strongly bent capsule: centroid offset sign must match the bend.
    auto straight = sim_detail::capsule_pixels(60.0, 60.0, 0.0, 0.0, 22.0, 7.0);
    auto bent = sim_detail::capsule_pixels(60.0, 60.0, 0.0, 20.0, 22.0, 7.0);
    auto centroid_y = [](const std::vector<std::pair<int, int>>& px) {
        double s = 0.0;
        for (const auto& [x, y] : px) s += y;
        return s / static_cast<double>(px.size());
    };
    CHECK(centroid_y(straight) == Catch::Approx(60.0).margin(0.1));
    CHECK(centroid_y(bent) > 60.2);
}
