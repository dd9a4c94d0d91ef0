#pragma once

#include "ztrack/detection.hpp"
#include "ztrack/filter.hpp"
#include "ztrack/linking.hpp"
#include "ztrack/mask.hpp"

#include <algorithm>
#include <future>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <vector>

namespace ztrack {

struct TrackerConfig {
    MotionParams motion;
    AppearanceParams appearance;
    FilterConfig filter;
    LinkingConfig linking;
    int min_blob_area = 20;
    std::uint64_t seed = 1;
    int threads = 1;
    bool enable_recovery = true; ///< wide-gate re-acquisition of lost targets
};

/// Pin one target to a position (or the blob nearest it) at a given frame.
struct Correction {
    long frame = 0;
    int target_id = -1;
    double x = 0.0;
    double y = 0.0;
};

struct FrameResult {
    std::vector<StepReport> reports; ///< sorted by target id
    std::vector<ErrorRecord> errors;
    std::vector<LinkingEvent> events;
};

/// Fixed-count multi-target tracker. Occlusion bookkeeping rides on
/// frame-to-frame blob correspondence: two blobs collapsing into one is a
/// merge (the particle filters of its targets keep running but appearance
/// updates freeze), one blob splitting is a separation resolved by hypothesis
/// scoring over the m! target-to-blob assignments.
class Tracker {
public:
    explicit Tracker(const TrackerConfig& cfg) : cfg_(cfg) {}

    /// Bind target i to initial_blobs[i] of the first frame.
    void initialize(const std::vector<Observation>& initial_blobs) {
        filters_.clear();
        blob_targets_.clear();
        prev_obs_.clear();
        snapshots_.clear();
        double area_sum = 0.0;
        for (std::size_t i = 0; i < initial_blobs.size(); ++i) {
            auto f = std::make_unique<TargetFilter>(static_cast<int>(i), cfg_.motion,
                                                    cfg_.appearance, cfg_.filter, cfg_.seed);
            f->initialize(initial_blobs[i]);
            filters_.push_back(std::move(f));
            area_sum += initial_blobs[i].pixel_count;
        }
        typical_area_ = initial_blobs.empty() ? 0.0 : area_sum / initial_blobs.size();
        started_ = false;
    }

    void add_corrections(const std::vector<Correction>& corrections) {
        for (const auto& c : corrections) corrections_[{c.frame, c.target_id}] = c;
    }

    std::size_t target_count() const { return filters_.size(); }
    const TargetFilter& filter(std::size_t i) const { return *filters_[i]; }

    /// Multi-target blobs as interaction groups (introspection).
    std::vector<InteractionGroup> groups() const {
        std::vector<InteractionGroup> out;
        for (const auto& [bid, tids] : blob_targets_) {
            if (tids.size() < 2) continue;
            InteractionGroup g;
            g.target_ids = tids;
            g.merged_blob_id = bid;
            out.push_back(std::move(g));
        }
        return out;
    }

    FrameResult process_frame(const FrameMask& mask) {
        FrameResult result;
        auto det = detect_with_labels(mask, cfg_.min_blob_area);
        const auto& obs = det.observations;
        const int n = static_cast<int>(filters_.size());

        if (!started_) {
            // Bind the initial assignment to frame-0-style blobs once.
            seed_assignment(obs);
            started_ = true;
        }

        apply_corrections(mask.frame_index, obs);

        // --- blob correspondence ------------------------------------------
        // parent[c] = previous blob whose region the current blob c came
        // from; children[p] = current blobs claiming previous blob p.
        std::map<int, std::vector<int>> children;
        std::map<int, int> parent;
        match_blobs(obs, parent, children);

        // --- merge / split / carry ----------------------------------------
        std::map<int, std::vector<int>> new_assign;
        std::set<int> pending; // targets without a blob this frame
        std::set<int> released_this_frame;

        for (const auto& [pid, tids] : blob_targets_) {
            const auto it = children.find(pid);
            if (it == children.end() || it->second.empty()) {
                for (int t : tids) pending.insert(t);
                continue;
            }
            const auto& kids = it->second;
            if (kids.size() == 1 || tids.size() == 1) {
                // Carry (or a single target picking its nearest child).
                if (kids.size() == 1) {
                    auto& list = new_assign[kids.front()];
                    list.insert(list.end(), tids.begin(), tids.end());
                } else {
                    const auto& st = filters_[static_cast<std::size_t>(tids.front())]->state();
                    int best = kids.front();
                    double best_d2 = 1e300;
                    for (int c : kids) {
                        const auto& o = obs[static_cast<std::size_t>(c)];
                        const double d2 = (o.x - st.lx) * (o.x - st.lx) +
                                          (o.y - st.ly) * (o.y - st.ly);
                        if (d2 < best_d2) {
                            best_d2 = d2;
                            best = c;
                        }
                    }
                    new_assign[best].push_back(tids.front());
                }
                continue;
            }
            // Split of a multi-target blob: enumerate and score assignments.
            resolve_split(mask, det, tids, kids, new_assign, released_this_frame, result);
        }

        // Deduplicate target lists, keep them sorted.
        for (auto& [bid, tids] : new_assign) {
            std::sort(tids.begin(), tids.end());
            tids.erase(std::unique(tids.begin(), tids.end()), tids.end());
        }

        // --- zombie dissolution ---------------------------------------------
        // A multi-target blob that keeps single-fish area is not a merge; the
        // extra targets were stranded by a bad split. Evict all but the
        // nearest so re-acquisition can place them.
        for (auto& [bid, tids] : new_assign) {
            if (tids.size() < 2) continue;
            const auto& blob = obs[static_cast<std::size_t>(bid)];
            const bool small = typical_area_ > 0.0 && blob.pixel_count < 1.3 * typical_area_;
            for (int t : tids) {
                if (small) {
                    ++small_streak_[t];
                } else {
                    small_streak_[t] = 0;
                }
            }
            if (!small) continue;
            bool all_overdue = true;
            for (int t : tids) {
                if (small_streak_[t] < 3) all_overdue = false;
            }
            if (!all_overdue) continue;
            std::sort(tids.begin(), tids.end(), [&](int a, int b) {
                const auto& sa = filters_[static_cast<std::size_t>(a)]->state();
                const auto& sb = filters_[static_cast<std::size_t>(b)]->state();
                const double da = std::hypot(sa.lx - blob.x, sa.ly - blob.y);
                const double db = std::hypot(sb.lx - blob.x, sb.ly - blob.y);
                if (da != db) return da < db;
                return a < b;
            });
            for (std::size_t k = 1; k < tids.size(); ++k) {
                pending.insert(tids[k]);
                filters_[static_cast<std::size_t>(tids[k])]->mutable_state().interacting = false;
                small_streak_[tids[k]] = 0;
            }
            tids.resize(1);
            small_streak_[tids.front()] = 0;
        }

        // --- interacting flags + snapshots ---------------------------------
        for (auto& [bid, tids] : new_assign) {
            const bool multi = tids.size() >= 2;
            for (int t : tids) {
                auto& filt = *filters_[static_cast<std::size_t>(t)];
                auto& st = filt.mutable_state();
                if (multi && !st.interacting) {
                    KinematicSnapshot snap;
                    snap.dist = st.dist;
                    snap.prev_delta = st.prev_delta;
                    snap.prev_prev_delta = st.prev_prev_delta;
                    snap.heading = st.heading;
                    snap.mean_a = st.mean_a;
                    snap.mean_b = st.mean_b;
                    snapshots_[t] = snap;
                } else if (!multi && st.interacting && !released_this_frame.count(t)) {
                    // Ended up alone on a blob without a scored release: that
                    // is a release too; restore the pre-crossing kinematics.
                    KinematicSnapshot snap = take_snapshot(t);
                    filt.reinitialize_on_blob(obs[static_cast<std::size_t>(bid)], snap.dist,
                                              snap.prev_delta, snap.prev_prev_delta,
                                              snap.heading, snap.mean_a, snap.mean_b);
                    released_this_frame.insert(t);
                }
                st.interacting = multi;
            }
        }
        for (int t : pending) {
            filters_[static_cast<std::size_t>(t)]->mutable_state().interacting = false;
        }

        // --- per-target filter steps ---------------------------------------
        std::vector<int> to_step;
        for (int i = 0; i < n; ++i) {
            if (!released_this_frame.count(i)) to_step.push_back(i);
        }
        std::vector<StepReport> reports(filters_.size());
        auto run_step = [&](int i) {
            reports[static_cast<std::size_t>(i)] =
                filters_[static_cast<std::size_t>(i)]->step(mask, obs);
        };
        if (cfg_.threads > 1 && to_step.size() > 1) {
            std::vector<std::future<void>> futs;
            futs.reserve(to_step.size());
            for (int i : to_step) futs.push_back(std::async(std::launch::async, run_step, i));
            for (auto& f : futs) f.get();
        } else {
            for (int i : to_step) run_step(i);
        }
        for (int i : released_this_frame) {
            fill_report_from_state(reports[static_cast<std::size_t>(i)], i, mask.frame_index);
        }
        for (auto& rep : reports) rep.frame = mask.frame_index;

        // Interacting targets stay tethered to their blob: a cloud that lost
        // the merged blob otherwise coasts away unrecoverably.
        for (const auto& [bid, tids] : new_assign) {
            if (tids.size() < 2) continue;
            const auto& blob = obs[static_cast<std::size_t>(bid)];
            for (int t : tids) {
                if (released_this_frame.count(t)) continue;
                auto& filt = *filters_[static_cast<std::size_t>(t)];
                const double dx = filt.state().lx - blob.x;
                const double dy = filt.state().ly - blob.y;
                if (std::sqrt(dx * dx + dy * dy) > blob.ellipse.a + 6.0) {
                    filt.tether(blob.x, blob.y);
                    auto& rep = reports[static_cast<std::size_t>(t)];
                    rep.x = blob.x;
                    rep.y = blob.y;
                    rep.lost = false;
                }
            }
        }

        // --- clean-path anchoring, linking-error checks, recovery ----------
        std::map<int, int> target_blob; // target -> current blob
        for (const auto& [bid, tids] : new_assign) {
            for (int t : tids) target_blob[t] = bid;
        }
        for (int i : to_step) {
            auto& filt = *filters_[static_cast<std::size_t>(i)];
            auto& rep = reports[static_cast<std::size_t>(i)];
            if (filt.state().interacting) continue;

            auto it = target_blob.find(i);
            const Observation* own = it != target_blob.end()
                                         ? &obs[static_cast<std::size_t>(it->second)]
                                         : nullptr;
            if (own) {
                const double dx = own->x - filt.state().lx;
                const double dy = own->y - filt.state().ly;
                const double dev = std::sqrt(dx * dx + dy * dy);
                if (dev > filt.error_deviation()) {
                    record_error(result, mask.frame_index, i, filt.state(), *own, dev);
                    filt.initialize(*own);
                    fill_report_from_state(rep, i, mask.frame_index);
                } else {
                    update_size_means(filt.mutable_state(), *own, filt.appearance_params(),
                                      filt.clean_updates());
                    filt.count_clean_update();
                    if (own->pixel_count < 1.5 * typical_area_) {
                        typical_area_ = 0.98 * typical_area_ + 0.02 * own->pixel_count;
                    }
                    filt.snap_appearance(*own);
                    // The clean-case appearance is the observed ellipse,
                    // center included; the proposal cloud has almost no
                    // lateral spread, so without this anchor a lateral offset
                    // seeded during a turn would persist.
                    filt.mutable_state().lx = own->x;
                    filt.mutable_state().ly = own->y;
                    fill_report_from_state(rep, i, mask.frame_index);
                    rep.lost = false;
                }
            } else if (cfg_.enable_recovery) {
                // No blob inherited: try to re-acquire on an unclaimed blob,
                // searching wider the longer the target has been unattached.
                ++pending_streak_[i];
                const int streak = std::max({1, filt.coast_count(), pending_streak_[i]});
                const double gate =
                    filt.gating_radius() +
                    (filt.error_deviation() + 3.0 * cfg_.motion.sigma_v) *
                        static_cast<double>(streak);
                const Observation* best = nullptr;
                double best_d2 = gate * gate;
                for (const auto& o : obs) {
                    if (!new_assign[o.blob_id].empty()) continue;
                    const double dx = o.x - filt.state().lx;
                    const double dy = o.y - filt.state().ly;
                    const double d2 = dx * dx + dy * dy;
                    if (d2 <= best_d2) {
                        best_d2 = d2;
                        best = &o;
                    }
                }
                if (best) {
                    record_error(result, mask.frame_index, i, filt.state(), *best,
                                 std::sqrt(best_d2));
                    filt.initialize(*best);
                    new_assign[best->blob_id].push_back(i);
                    target_blob[i] = best->blob_id;
                    fill_report_from_state(rep, i, mask.frame_index);
                    rep.lost = false;
                    pending_streak_[i] = 0;
                }
            }
            if (target_blob.count(i)) pending_streak_[i] = 0;
        }

        // Clean out empty assignment entries created by lookups.
        for (auto it = new_assign.begin(); it != new_assign.end();) {
            if (it->second.empty()) {
                it = new_assign.erase(it);
            } else {
                ++it;
            }
        }

        blob_targets_ = std::move(new_assign);
        prev_obs_ = obs;

        result.reports = std::move(reports);
        std::sort(result.reports.begin(), result.reports.end(),
                  [](const StepReport& a, const StepReport& b) { return a.target_id < b.target_id; });
        return result;
    }

private:
    void seed_assignment(const std::vector<Observation>& obs) {
        blob_targets_.clear();
        for (std::size_t i = 0; i < filters_.size(); ++i) {
            const auto& st = filters_[i]->state();
            auto o = associate_nn(st.lx, st.ly, obs, 1e9);
            if (o) blob_targets_[o->blob_id].push_back(static_cast<int>(i));
        }
        prev_obs_ = obs;
    }

    KinematicSnapshot take_snapshot(int tid) {
        auto it = snapshots_.find(tid);
        if (it != snapshots_.end()) {
            KinematicSnapshot snap = it->second;
            snapshots_.erase(it);
            return snap;
        }
        const auto& st = filters_[static_cast<std::size_t>(tid)]->state();
        KinematicSnapshot snap;
        snap.dist = st.dist;
        snap.prev_delta = st.prev_delta;
        snap.prev_prev_delta = st.prev_prev_delta;
        snap.heading = st.heading;
        snap.mean_a = st.mean_a;
        snap.mean_b = st.mean_b;
        return snap;
    }

    void fill_report_from_state(StepReport& rep, int i, long frame) const {
        const auto& st = filters_[static_cast<std::size_t>(i)]->state();
        rep.frame = frame;
        rep.target_id = i;
        rep.x = st.lx;
        rep.y = st.ly;
        rep.a = st.ellipse.a;
        rep.b = st.ellipse.b;
        rep.delta = st.ellipse.delta;
        rep.interacting = st.interacting;
    }

    static void record_error(FrameResult& result, long frame, int target, const TargetState& st,
                             const Observation& obs, double dev) {
        ErrorRecord er;
        er.frame = frame;
        er.target_id = target;
        er.predicted_x = st.lx;
        er.predicted_y = st.ly;
        er.observed_x = obs.x;
        er.observed_y = obs.y;
        er.deviation = dev;
        result.errors.push_back(er);
    }

    /// Nearest-previous-blob matching, radius-capped. Every current blob gets
    /// at most one parent; a previous blob with no child adopts its nearest
    /// current blob within reach (covers merges where the other blob's center
    /// is the closer one).
    void match_blobs(const std::vector<Observation>& obs, std::map<int, int>& parent,
                     std::map<int, std::vector<int>>& children) const {
        auto radius_for = [&](int pid) {
            double r = 3.0 * cfg_.motion.sigma_v;
            double speed = 0.0;
            auto it = blob_targets_.find(pid);
            if (it != blob_targets_.end()) {
                for (int t : it->second) {
                    const auto& f = *filters_[static_cast<std::size_t>(t)];
                    speed = std::max(speed, predict_distance(f.state().dist));
                    r = std::max(r, f.gating_radius());
                }
            }
            const auto& p = prev_obs_[static_cast<std::size_t>(pid)];
            return r + speed + p.ellipse.a;
        };

        for (const auto& o : obs) {
            int best = -1;
            double best_d2 = 1e300;
            for (const auto& p : prev_obs_) {
                const double dx = o.x - p.x;
                const double dy = o.y - p.y;
                const double d2 = dx * dx + dy * dy;
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = p.blob_id;
                }
            }
            if (best >= 0) {
                const double r = radius_for(best);
                if (best_d2 <= r * r) {
                    parent[o.blob_id] = best;
                    children[best].push_back(o.blob_id);
                }
            }
        }
        // Adoption pass: previous blobs left childless pull in their nearest
        // current blob if it is within reach (merge into a neighbor's blob).
        for (const auto& p : prev_obs_) {
            if (children.count(p.blob_id) && !children[p.blob_id].empty()) continue;
            if (!blob_targets_.count(p.blob_id)) continue;
            int best = -1;
            double best_d2 = 1e300;
            for (const auto& o : obs) {
                const double dx = o.x - p.x;
                const double dy = o.y - p.y;
                const double d2 = dx * dx + dy * dy;
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = o.blob_id;
                }
            }
            const double r = radius_for(p.blob_id);
            if (best >= 0 && best_d2 <= r * r) {
                children[p.blob_id].push_back(best);
            }
        }
    }

    /// A multi-target blob split into several: enumerate assignments, commit
    /// the best-scoring one, release supported pairs, keep the rest grouped on
    /// the child blob nearest them.
    void resolve_split(const FrameMask& mask, const DetectionResult& det,
                       const std::vector<int>& tids, const std::vector<int>& kids,
                       std::map<int, std::vector<int>>& new_assign,
                       std::set<int>& released, FrameResult& result) {
        const auto& obs = det.observations;
        std::vector<int> blob_ids = kids;
        std::sort(blob_ids.begin(), blob_ids.end());
        const int m = static_cast<int>(std::min(blob_ids.size(), tids.size()));
        if (static_cast<int>(blob_ids.size()) > m) {
            // Prefer children nearest the group's mean position.
            double gx = 0.0, gy = 0.0;
            for (int t : tids) {
                gx += filters_[static_cast<std::size_t>(t)]->state().lx;
                gy += filters_[static_cast<std::size_t>(t)]->state().ly;
            }
            gx /= static_cast<double>(tids.size());
            gy /= static_cast<double>(tids.size());
            std::sort(blob_ids.begin(), blob_ids.end(), [&](int a, int b) {
                const auto& oa = obs[static_cast<std::size_t>(a)];
                const auto& ob = obs[static_cast<std::size_t>(b)];
                const double da = (oa.x - gx) * (oa.x - gx) + (oa.y - gy) * (oa.y - gy);
                const double db = (ob.x - gx) * (ob.x - gx) + (ob.y - gy) * (ob.y - gy);
                if (da != db) return da < db;
                return a < b;
            });
            blob_ids.resize(static_cast<std::size_t>(m));
            std::sort(blob_ids.begin(), blob_ids.end());
        }

        std::vector<TargetFilter*> members;
        std::vector<int> member_nn;
        for (int t : tids) {
            members.push_back(filters_[static_cast<std::size_t>(t)].get());
            const auto& st = members.back()->state();
            auto o = associate_nn(st.lx, st.ly, obs, members.back()->gating_radius() + st.mean_a);
            member_nn.push_back(o ? o->blob_id : -1);
        }
        auto pair_scores = pair_weight_sums(members, obs, blob_ids, det.labels, mask.width,
                                            mask.height, cfg_.filter.uniform_weights);
        bool fallback = false;
        auto hyps = score_hypotheses(tids, blob_ids, pair_scores, member_nn, cfg_.linking,
                                     &fallback);
        const auto& chosen = commit_linking(hyps);

        LinkingEvent ev;
        ev.frame = mask.frame_index;
        ev.group_targets = tids;
        ev.blob_ids = blob_ids;
        ev.chosen = chosen.assignment;
        ev.fallback = fallback;
        for (const auto& h : hyps) ev.all_scores.push_back(h.score);
        result.events.push_back(ev);

        std::set<int> assigned;
        for (const auto& [tid, bid] : chosen.assignment) {
            const auto ti =
                std::find(tids.begin(), tids.end(), tid) - tids.begin();
            const auto bi =
                std::find(blob_ids.begin(), blob_ids.end(), bid) - blob_ids.begin();
            if (pair_scores[static_cast<std::size_t>(ti)][static_cast<std::size_t>(bi)] <= 0.0) {
                continue;
            }
            KinematicSnapshot snap = take_snapshot(tid);
            filters_[static_cast<std::size_t>(tid)]->reinitialize_on_blob(
                obs[static_cast<std::size_t>(bid)], snap.dist, snap.prev_delta,
                snap.prev_prev_delta, snap.heading, snap.mean_a, snap.mean_b);
            filters_[static_cast<std::size_t>(tid)]->mutable_state().interacting = false;
            released.insert(tid);
            new_assign[bid].push_back(tid);
            assigned.insert(tid);
        }
        // Unsupported members follow the nearest child blob, preferring
        // children no released target already took.
        for (int tid : tids) {
            if (assigned.count(tid)) continue;
            const auto& st = filters_[static_cast<std::size_t>(tid)]->state();
            int best = -1;
            double best_d2 = 1e300;
            for (int pass = 0; pass < 2 && best < 0; ++pass) {
                for (int bid : blob_ids) {
                    if (pass == 0 && !new_assign[bid].empty()) continue;
                    const auto& o = obs[static_cast<std::size_t>(bid)];
                    const double d2 =
                        (o.x - st.lx) * (o.x - st.lx) + (o.y - st.ly) * (o.y - st.ly);
                    if (d2 < best_d2) {
                        best_d2 = d2;
                        best = bid;
                    }
                }
            }
            new_assign[best].push_back(tid);
        }
    }

    void apply_corrections(long frame, const std::vector<Observation>& obs) {
        for (std::size_t i = 0; i < filters_.size(); ++i) {
            auto it = corrections_.find({frame, static_cast<int>(i)});
            if (it == corrections_.end()) continue;
            const Correction& c = it->second;
            Observation target_obs;
            // Snap to a blob only when the correction clearly points at one;
            // otherwise pin the exact position (merged blobs' centroids can
            // sit well off the intended fish).
            auto snapped = associate_nn(c.x, c.y, obs, 10.0);
            if (snapped) {
                target_obs = *snapped;
            } else {
                target_obs.x = c.x;
                target_obs.y = c.y;
                target_obs.ellipse = filters_[i]->state().ellipse;
                target_obs.ellipse.cx = c.x;
                target_obs.ellipse.cy = c.y;
            }
            // Detach from the previous-frame blob assignment, then rebind.
            for (auto& [bid, tids] : blob_targets_) {
                tids.erase(std::remove(tids.begin(), tids.end(), static_cast<int>(i)),
                           tids.end());
            }
            filters_[i]->initialize(target_obs);
            if (snapped) {
                // Rebind through the previous frame's nearest blob so the
                // correspondence pass carries the correction forward.
                auto prev = associate_nn(c.x, c.y, prev_obs_, 1e9);
                if (prev) blob_targets_[prev->blob_id].push_back(static_cast<int>(i));
            }
            for (auto it2 = blob_targets_.begin(); it2 != blob_targets_.end();) {
                if (it2->second.empty()) {
                    it2 = blob_targets_.erase(it2);
                } else {
                    std::sort(it2->second.begin(), it2->second.end());
                    ++it2;
                }
            }
        }
    }

    TrackerConfig cfg_;
    std::vector<std::unique_ptr<TargetFilter>> filters_;
    std::map<int, std::vector<int>> blob_targets_; ///< previous-frame blob -> targets
    std::vector<Observation> prev_obs_;
    std::map<int, KinematicSnapshot> snapshots_;
    std::map<std::pair<long, int>, Correction> corrections_;
    std::map<int, int> small_streak_;   ///< frames spent grouped on a single-fish blob
    std::map<int, int> pending_streak_; ///< frames without any blob
    double typical_area_ = 0.0;
    bool started_ = false;
};

} // namespace ztrack
