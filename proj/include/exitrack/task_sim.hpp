#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "exitrack/dataset.hpp"
#include "exitrack/geometry.hpp"

namespace exitrack {

enum class Phase { kTracking, kHolding, kPlacing, kDone, kFailed };

[[nodiscard]] std::string to_string(Phase p);

struct TaskState {
    Phase phase{Phase::kTracking};
    bool held_item{true};
    std::size_t frames_in_hold{0};
};

/// One frame of the gating state machine.
///   TRACKING + exit            -> HOLDING
///   HOLDING  + exit            -> HOLDING
///   HOLDING  + no exit         -> TRACKING
///   TRACKING + no exit + zone  -> PLACING
///   PLACING                    -> DONE if the target is visible, FAILED otherwise
/// Throws std::logic_error once the episode has ended.
[[nodiscard]] TaskState step(const TaskState& state, bool frame_gt_visible, bool exit_flag, bool in_place_zone);

/// Rectangle in frame pixels; the zone signal needs the predicted centre inside it for
/// `consecutive` frames in a row.
struct PlaceZone {
    double x0{0.0};
    double y0{0.0};
    double x1{0.0};
    double y1{0.0};
    int consecutive{3};

    [[nodiscard]] bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
    /// x in [0.4 W, 0.75 W], full height.
    [[nodiscard]] static PlaceZone default_for(int frame_w, int frame_h);
};

struct EpisodeFrame {
    std::size_t frame{0};
    Phase phase{Phase::kTracking};
    bool exit_flag{false};
    bool zone{false};
};

struct EpisodeResult {
    bool success{false};
    bool placed_on_target{false};
    std::optional<std::size_t> place_frame;
    std::size_t holds{0};  // number of TRACKING -> HOLDING transitions
    Phase final_phase{Phase::kTracking};
    std::vector<EpisodeFrame> log;
};

/// Rolls the state machine over the sequence. `boxes` are the tracker's reported boxes
/// (EXIT where it flagged). The placement lands on the target when the target is visible and the
/// predicted centre lies inside its ground-truth box; success requires that.
[[nodiscard]] EpisodeResult run_episode(const Sequence& seq, const std::vector<BBox>& boxes,
                                        const std::vector<bool>& exit_flags, const PlaceZone& zone);

/// "frame,phase,exit_flag,zone" lines.
[[nodiscard]] std::string format_episode_log(const EpisodeResult& r);

}  // namespace exitrack
