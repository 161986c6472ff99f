#include "exitrack/task_sim.hpp"

#include <sstream>
#include <stdexcept>

namespace exitrack {

std::string to_string(Phase p) {
    switch (p) {
        case Phase::kTracking: return "TRACKING";
        case Phase::kHolding: return "HOLDING";
        case Phase::kPlacing: return "PLACING";
        case Phase::kDone: return "DONE";
        case Phase::kFailed: return "FAILED";
    }
    return "?";
}

TaskState step(const TaskState& state, bool frame_gt_visible, bool exit_flag, bool in_place_zone) {
    TaskState next = state;
    switch (state.phase) {
        case Phase::kDone:
        case Phase::kFailed:
            throw std::logic_error("step after the episode ended (" + to_string(state.phase) + ")");
        case Phase::kPlacing:
            next.phase = frame_gt_visible ? Phase::kDone : Phase::kFailed;
            next.held_item = false;
            break;
        case Phase::kHolding:
            if (exit_flag) {
                ++next.frames_in_hold;
            } else {
                next.phase = Phase::kTracking;
                next.frames_in_hold = 0;
            }
            break;
        case Phase::kTracking:
            if (exit_flag) {
                next.phase = Phase::kHolding;
                next.frames_in_hold = 1;
            } else if (in_place_zone) {
                next.phase = Phase::kPlacing;
            }
            break;
    }
    return next;
}

PlaceZone PlaceZone::default_for(int frame_w, int frame_h) {
    return {0.4 * frame_w, 0.0, 0.75 * frame_w, static_cast<double>(frame_h), 3};
}

EpisodeResult run_episode(const Sequence& seq, const std::vector<BBox>& boxes, const std::vector<bool>& exit_flags,
                          const PlaceZone& zone) {
    const std::size_t n = seq.size();
    if (boxes.size() != n || exit_flags.size() != n) {
        throw std::invalid_argument("run_episode: inputs are not aligned with " + seq.id);
    }
    EpisodeResult r;
    TaskState s;
    int run = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const BBox& b = boxes[t];
        const bool centre_in = !b.is_exit() && zone.contains(b.cx(), b.cy());
        run = centre_in ? run + 1 : 0;
        const bool in_zone = run >= zone.consecutive;
        const bool vis = seq.visible(t);

        const Phase before = s.phase;
        s = step(s, vis, exit_flags[t], in_zone);
        if (before == Phase::kTracking && s.phase == Phase::kHolding) ++r.holds;
        r.log.push_back({t, s.phase, exit_flags[t], in_zone});
        if (s.phase == Phase::kPlacing) {
            // The gripper releases within the same frame.
            r.place_frame = t;
            const BBox& gt = seq.annotations[t];
            r.placed_on_target = vis && b.cx() >= gt.x && b.cx() <= gt.right() && b.cy() >= gt.y && b.cy() <= gt.bottom();
            s = step(s, vis, exit_flags[t], in_zone);
            r.log.push_back({t, s.phase, exit_flags[t], in_zone});
            break;
        }
    }
    r.final_phase = s.phase;
    r.success = s.phase == Phase::kDone && r.placed_on_target;
    return r;
}

std::string format_episode_log(const EpisodeResult& r) {
    std::ostringstream os;
    for (const auto& f : r.log) {
        os << f.frame << ',' << to_string(f.phase) << ',' << (f.exit_flag ? 1 : 0) << ',' << (f.zone ? 1 : 0) << '\n';
    }
    return os.str();
}

}  // namespace exitrack
