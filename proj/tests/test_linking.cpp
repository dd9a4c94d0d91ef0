#include "ztrack/linking.hpp"
#include "ztrack/tracker.hpp"
#include "ztrack/simulator.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

using namespace ztrack;

TEST_CASE("detect_interactions groups targets sharing a nearest blob", "[linking]") {
    // Two targets, two separated blobs: no group.
    CHECK(detect_interactions({0, 1}, {0, 1}).empty());
    // Two targets gated to the same blob: one group of two.
    auto g = detect_interactions({0, 1}, {3, 3});
    REQUIRE(g.size() == 1);
    CHECK(g[0] == std::vector<int>{0, 1});
    // Three targets on one blob.
    auto g3 = detect_interactions({2, 0, 1}, {5, 5, 5});
    REQUIRE(g3.size() == 1);
    CHECK(g3[0] == std::vector<int>{0, 1, 2});
    // Ungated targets (-1) never group.
    CHECK(detect_interactions({0, 1}, {-1, -1}).empty());
}

TEST_CASE("detect_separation needs at least two candidate blobs", "[linking]") {
    InteractionGroup g;
    g.target_ids = {0, 1};
    CHECK_FALSE(detect_separation(g, {}).has_value());
    CHECK_FALSE(detect_separation(g, {4}).has_value());
    auto m = detect_separation(g, {4, 5});
    REQUIRE(m.has_value());
    CHECK(*m == 2);

    InteractionGroup g3;
    g3.target_ids = {0, 1, 2};
    auto m2 = detect_separation(g3, {4, 5});
    REQUIRE(m2.has_value());
    CHECK(*m2 == 2); // partial separation
}

namespace {

std::vector<std::vector<double>> synthetic_scores(int g, int m, double bias = 0.0) {
    std::vector<std::vector<double>> s(static_cast<std::size_t>(g),
                                       std::vector<double>(static_cast<std::size_t>(m), 1.0));
    for (int i = 0; i < g; ++i) {
        for (int j = 0; j < m; ++j) {
            s[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                1.0 + 0.1 * i + 0.01 * j + (i == j ? bias : 0.0);
        }
    }
    return s;
}

long factorial(int n) {
    long f = 1;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

} // namespace

TEST_CASE("hypothesis count is exactly m! for full separation", "[linking]") {
    LinkingConfig cfg;
    for (int m = 1; m <= 5; ++m) {
        std::vector<int> targets(static_cast<std::size_t>(m));
        std::vector<int> blobs(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) {
            targets[static_cast<std::size_t>(i)] = i;
            blobs[static_cast<std::size_t>(i)] = i + 10;
        }
        auto hyps = score_hypotheses(targets, blobs, synthetic_scores(m, m, 0.5),
                                     std::vector<int>(static_cast<std::size_t>(m), -1), cfg);
        CHECK(static_cast<long>(hyps.size()) == factorial(m));
        // All assignments are bijections and distinct.
        std::set<std::vector<std::pair<int, int>>> seen;
        for (const auto& h : hyps) {
            std::set<int> used_blobs;
            for (const auto& [t, b] : h.assignment) used_blobs.insert(b);
            CHECK(used_blobs.size() == static_cast<std::size_t>(m));
            seen.insert(h.assignment);
        }
        CHECK(seen.size() == hyps.size());
    }
}

TEST_CASE("partial separation enumerates ordered target subsets", "[linking]") {
    LinkingConfig cfg;
    auto hyps = score_hypotheses({0, 1, 2}, {10, 11}, synthetic_scores(3, 2, 0.4),
                                 {-1, -1, -1}, cfg);
    // P(3,2) = 6 ordered injections.
    CHECK(hyps.size() == 6);
    for (const auto& h : hyps) CHECK(h.assignment.size() == 2);
}

TEST_CASE("scores are invariant under blob relabeling", "[linking]") {
    LinkingConfig cfg;
    auto scores = synthetic_scores(3, 3, 0.7);
    auto h1 = score_hypotheses({0, 1, 2}, {10, 11, 12}, scores, {-1, -1, -1}, cfg);

    // Relabel blobs: column order follows the blob-id list, so permuting both
    // together must yield identical (assignment-set -> score) pairs.
    std::vector<int> relabeled = {12, 10, 11};
    std::vector<std::vector<double>> permuted(3, std::vector<double>(3, 0.0));
    const int col_of[3] = {2, 0, 1}; // blob 12 was column 2, blob 10 column 0, blob 11 column 1
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            permuted[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                scores[static_cast<std::size_t>(i)][static_cast<std::size_t>(col_of[j])];
        }
    }
    auto h2 = score_hypotheses({0, 1, 2}, relabeled, permuted, {-1, -1, -1}, cfg);

    auto key = [](const LinkingHypothesis& h) {
        std::map<int, int> m;
        for (const auto& [t, b] : h.assignment) m[t] = b;
        return m;
    };
    std::map<std::map<int, int>, double> s1, s2;
    for (const auto& h : h1) s1[key(h)] = h.score;
    for (const auto& h : h2) s2[key(h)] = h.score;
    REQUIRE(s1.size() == s2.size());
    for (const auto& [k, v] : s1) {
        REQUIRE(s2.count(k) == 1);
        CHECK(s2[k] == v);
    }
}

TEST_CASE("commit takes the argmax, then the nearest-neighbor tie rule", "[linking]") {
    LinkingConfig cfg;
    {
        auto hyps = score_hypotheses({0, 1}, {10, 11}, {{5.1, 3.2}, {3.0, 5.0}}, {-1, -1}, cfg);
        const auto& best = commit_linking(hyps);
        CHECK(best.score == Catch::Approx(10.1));
        CHECK(best.assignment == std::vector<std::pair<int, int>>{{0, 10}, {1, 11}});
    }
    {
        // Exact tie: prefer the permutation agreeing with nearest blobs.
        auto hyps = score_hypotheses({0, 1}, {10, 11}, {{1.0, 1.0}, {1.0, 1.0}}, {11, 10}, cfg);
        const auto& best = commit_linking(hyps);
        CHECK(best.assignment == std::vector<std::pair<int, int>>{{0, 11}, {1, 10}});
    }
    {
        // Tie with no nearest-neighbor information: lexicographic.
        auto hyps = score_hypotheses({0, 1}, {10, 11}, {{1.0, 1.0}, {1.0, 1.0}}, {-1, -1}, cfg);
        CHECK(commit_linking(hyps).assignment ==
              std::vector<std::pair<int, int>>{{0, 10}, {1, 11}});
    }
    {
        auto hyps = score_hypotheses({4}, {7}, {{2.0}}, {-1}, cfg);
        CHECK(commit_linking(hyps).assignment == std::vector<std::pair<int, int>>{{4, 7}});
    }
    CHECK_THROWS_AS(commit_linking({}), std::invalid_argument);
}

TEST_CASE("greedy fallback beyond the enumeration cap", "[linking]") {
    LinkingConfig cfg;
    cfg.max_enumerable = 2;
    bool fallback = false;
    auto hyps = score_hypotheses({0, 1, 2}, {10, 11, 12}, synthetic_scores(3, 3, 0.9),
                                 {-1, -1, -1}, cfg, &fallback);
    CHECK(fallback);
    REQUIRE(hyps.size() == 1);
    std::set<int> blobs;
    for (const auto& [t, b] : hyps[0].assignment) blobs.insert(b);
    CHECK(blobs.size() == 3);
}

namespace {

struct CrossingRun {
    bool group_formed = false;
    int commits = 0;
    bool bijective = true;
    bool identity_correct = false;
    bool any_fallback = false;
};

CrossingRun run_crossing(double angle, std::uint64_t seed, bool uniform_weights) {
    auto sim = scenario_crossing(angle, 4.0, seed);
    TrackerConfig cfg;
    cfg.seed = seed + 1000;
    cfg.filter.uniform_weights = uniform_weights;
    Tracker tracker(cfg);
    auto first = detect(sim.masks[0], 10);
    if (first.size() != 2) return {};
    // Fish 0 is the blob nearest its ground truth start.
    std::vector<Observation> seeds(2);
    for (int i = 0; i < 2; ++i) {
        const auto& gt = sim.truth.frames[0][static_cast<std::size_t>(i)];
        seeds[static_cast<std::size_t>(i)] =
            *associate_nn(gt.x, gt.y, first, 1e9);
    }
    Tracker t(cfg);
    t.initialize(seeds);
    CrossingRun out;
    for (std::size_t f = 1; f < sim.masks.size(); ++f) {
        auto res = t.process_frame(sim.masks[f]);
        for (const auto& ev : res.events) {
            ++out.commits;
            std::set<int> bs;
            for (const auto& [tid, b] : ev.chosen) bs.insert(b);
            if (bs.size() != ev.chosen.size()) out.bijective = false;
            if (ev.fallback) out.any_fallback = true;
        }
        if (!t.groups().empty()) out.group_formed = true;
    }
    // Identity through the crossing: each track ends on its own fish.
    const auto& last = sim.truth.frames.back();
    bool ok = true;
    for (int i = 0; i < 2; ++i) {
        const auto& st = t.filter(static_cast<std::size_t>(i)).state();
        const double d_own = std::hypot(st.lx - last[static_cast<std::size_t>(i)].x,
                                        st.ly - last[static_cast<std::size_t>(i)].y);
        const double d_other = std::hypot(st.lx - last[static_cast<std::size_t>(1 - i)].x,
                                          st.ly - last[static_cast<std::size_t>(1 - i)].y);
        if (!(d_own < 22.0 && d_own < d_other)) ok = false;
    }
    out.identity_correct = ok;
    return out;
}

} // namespace

TEST_CASE("crossings form a group, commit a bijection, and mostly keep identity",
          "[linking][crossing]") {
    int formed = 0, committed = 0, correct = 0, bijective = 0;
    const int n = 24;
    for (int k = 0; k < n; ++k) {
        const double angle = 40.0 + 90.0 * (static_cast<double>(k) / (n - 1));
        auto run = run_crossing(angle, 100 + static_cast<std::uint64_t>(k), false);
        if (run.group_formed) ++formed;
        if (run.commits > 0) ++committed;
        if (run.bijective) ++bijective;
        if (run.identity_correct) ++correct;
    }
    CHECK(formed >= n - 2);
    CHECK(committed >= n - 2);
    CHECK(bijective == n);
    CHECK(correct >= (n * 3) / 4);
}

TEST_CASE("uniform-weight mode still commits valid assignments", "[linking][crossing]") {
    auto run = run_crossing(90.0, 7, true);
    CHECK(run.bijective);
}
