#pragma once

#include "ztrack/appearance.hpp"
#include "ztrack/filter.hpp"
#include "ztrack/types.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

namespace ztrack {

struct LinkingConfig {
    int max_enumerable = 8; ///< enumerate up to m! for m <= this, else greedy
};

/// Kinematic memory captured when targets merge, restored when they separate.
struct KinematicSnapshot {
    DistanceState dist;
    double prev_delta = 0.0;
    double prev_prev_delta = 0.0;
    double heading = 0.0;
    double mean_a = 0.0;
    double mean_b = 0.0;
};

struct InteractionGroup {
    std::vector<int> target_ids; ///< sorted, size >= 2
    int merged_blob_id = -1;     ///< current frame's blob, -1 while coasting
    long start_frame = 0;
    std::map<int, KinematicSnapshot> pre_crossing;
};

struct LinkingHypothesis {
    std::vector<std::pair<int, int>> assignment; ///< (target_id, blob_id), sorted by target
    double score = 0.0;
    int nn_matches = 0; ///< pairs agreeing with each target's nearest blob
};

/// Group targets whose nearest gated observations coincide. `nearest_blob[i]`
/// is the blob id target i gated to (-1 = none). Targets already grouped are
/// excluded; the caller keeps existing groups separately.
inline std::vector<std::vector<int>> detect_interactions(
    const std::vector<int>& target_ids, const std::vector<int>& nearest_blob) {
    std::map<int, std::vector<int>> by_blob;
    for (std::size_t i = 0; i < target_ids.size(); ++i) {
        if (nearest_blob[i] >= 0) by_blob[nearest_blob[i]].push_back(target_ids[i]);
    }
    std::vector<std::vector<int>> groups;
    for (auto& [blob, ids] : by_blob) {
        if (ids.size() >= 2) {
            std::sort(ids.begin(), ids.end());
            groups.push_back(ids);
        }
    }
    return groups;
}

/// Candidate separation: number of distinct gated blobs available to the
/// group (capped at group size). Returns nothing while at most one blob is
/// in reach.
inline std::optional<int> detect_separation(const InteractionGroup& group,
                                            const std::vector<int>& candidate_blobs) {
    if (candidate_blobs.size() < 2) return std::nullopt;
    return static_cast<int>(
        std::min(candidate_blobs.size(), group.target_ids.size()));
}

namespace linking_detail {

/// All ordered selections of m blobs assigned to the first m target slots
/// being enumerated; with g == m this is exactly the m! permutations in
/// lexicographic order of the blob sequence.
inline void enumerate_injections(int g, int m, std::vector<std::vector<int>>& out) {
    // Select which target slots receive blobs when g > m: enumerate target
    // subsets lexicographically, then blob orderings.
    std::vector<std::vector<int>> subsets;
    {
        std::vector<int> comb(static_cast<std::size_t>(std::min(g, m)));
        std::iota(comb.begin(), comb.end(), 0);
        const int k = static_cast<int>(comb.size());
        while (true) {
            subsets.push_back(comb);
            int i = k - 1;
            while (i >= 0 && comb[static_cast<std::size_t>(i)] == g - k + i) --i;
            if (i < 0) break;
            ++comb[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < k; ++j) {
                comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
            }
        }
    }
    std::vector<int> blob_order(static_cast<std::size_t>(m));
    std::iota(blob_order.begin(), blob_order.end(), 0);
    const std::size_t k = static_cast<std::size_t>(std::min(g, m));
    for (const auto& subset : subsets) {
        std::vector<int> order = blob_order;
        do {
            // Only the first k blobs of the permutation are used; skip
            // permutations that differ only in the unused tail.
            if (k < order.size() && !std::is_sorted(order.begin() + static_cast<long>(k),
                                                    order.end())) {
                continue;
            }
            std::vector<int> asg(static_cast<std::size_t>(g), -1);
            for (std::size_t s = 0; s < subset.size(); ++s) {
                asg[static_cast<std::size_t>(subset[s])] = order[s];
            }
            out.push_back(asg);
        } while (std::next_permutation(order.begin(), order.end()));
    }
}

} // namespace linking_detail

/// Pair scores for hypothesis enumeration: score[i][j] is the raw sum of
/// target i's particle coverage fractions against blob j in isolation (all
/// other blobs treated as background). With `uniform_weights` every pair
/// scores the same, so commits degrade to the nearest-neighbor tie rule (the
/// position-only baseline).
inline std::vector<std::vector<double>> pair_weight_sums(
    std::vector<TargetFilter*>& filters, const std::vector<Observation>& all_observations,
    const std::vector<int>& blob_ids, const LabelMap& labels, int mask_width, int mask_height,
    bool uniform_weights = false) {
    std::vector<std::vector<double>> score(filters.size(),
                                           std::vector<double>(blob_ids.size(), 0.0));
    for (std::size_t i = 0; i < filters.size(); ++i) {
        auto particles = filters[i]->propose_particles(all_observations, mask_width, mask_height);
        for (std::size_t j = 0; j < blob_ids.size(); ++j) {
            if (uniform_weights) {
                score[i][j] = static_cast<double>(particles.size());
                continue;
            }
            const std::int32_t label = blob_ids[j] + 1;
            double s = 0.0;
            for (const auto& p : particles) {
                s += coverage_fraction_labeled(p.ellipse, labels, label);
            }
            score[i][j] = s;
        }
    }
    return score;
}

/// Enumerate and score linking hypotheses for a separating group. Targets and
/// blob ids are the group members (ascending id order) and the gated blobs.
/// Returns hypotheses sorted best-first: score desc, then nearest-neighbor
/// agreement desc, then lexicographic assignment.
inline std::vector<LinkingHypothesis> score_hypotheses(
    const std::vector<int>& target_ids, const std::vector<int>& blob_ids,
    const std::vector<std::vector<double>>& pair_scores, const std::vector<int>& nn_blob_of_target,
    const LinkingConfig& config, bool* used_fallback = nullptr) {
    const int g = static_cast<int>(target_ids.size());
    const int m = static_cast<int>(blob_ids.size());
    std::vector<LinkingHypothesis> hyps;
    if (used_fallback) *used_fallback = false;

    if (m > config.max_enumerable) {
        // Greedy best-pair fallback: repeatedly take the highest-scoring
        // unused (target, blob) pair.
        if (used_fallback) *used_fallback = true;
        std::vector<bool> t_used(static_cast<std::size_t>(g), false);
        std::vector<bool> b_used(static_cast<std::size_t>(m), false);
        LinkingHypothesis h;
        const int n_pairs = std::min(g, m);
        for (int k = 0; k < n_pairs; ++k) {
            double best = -1.0;
            int bi = -1, bj = -1;
            for (int i = 0; i < g; ++i) {
                if (t_used[static_cast<std::size_t>(i)]) continue;
                for (int j = 0; j < m; ++j) {
                    if (b_used[static_cast<std::size_t>(j)]) continue;
                    if (pair_scores[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] >
                        best) {
                        best = pair_scores[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                        bi = i;
                        bj = j;
                    }
                }
            }
            t_used[static_cast<std::size_t>(bi)] = true;
            b_used[static_cast<std::size_t>(bj)] = true;
            h.assignment.emplace_back(target_ids[static_cast<std::size_t>(bi)],
                                      blob_ids[static_cast<std::size_t>(bj)]);
            h.score += best;
        }
        std::sort(h.assignment.begin(), h.assignment.end());
        hyps.push_back(std::move(h));
        return hyps;
    }

    std::vector<std::vector<int>> injections;
    linking_detail::enumerate_injections(g, m, injections);
    hyps.reserve(injections.size());
    for (const auto& asg : injections) {
        LinkingHypothesis h;
        for (int i = 0; i < g; ++i) {
            const int j = asg[static_cast<std::size_t>(i)];
            if (j < 0) continue;
            h.score += pair_scores[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            h.assignment.emplace_back(target_ids[static_cast<std::size_t>(i)],
                                      blob_ids[static_cast<std::size_t>(j)]);
            if (i < static_cast<int>(nn_blob_of_target.size()) &&
                nn_blob_of_target[static_cast<std::size_t>(i)] ==
                    blob_ids[static_cast<std::size_t>(j)]) {
                ++h.nn_matches;
            }
        }
        hyps.push_back(std::move(h));
    }
    std::sort(hyps.begin(), hyps.end(), [](const LinkingHypothesis& a, const LinkingHypothesis& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.nn_matches != b.nn_matches) return a.nn_matches > b.nn_matches;
        return a.assignment < b.assignment;
    });
    return hyps;
}

/// The committed linking: the best hypothesis after the tie rules applied in
/// score_hypotheses' ordering.
inline const LinkingHypothesis& commit_linking(const std::vector<LinkingHypothesis>& hyps) {
    if (hyps.empty()) throw std::invalid_argument("commit_linking: no hypotheses");
    return hyps.front();
}

} // namespace ztrack
