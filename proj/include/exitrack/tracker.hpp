#pragma once

#include <cstddef>
#include <vector>

#include "exitrack/dataset.hpp"
#include "exitrack/tracker_net.hpp"

namespace exitrack {

/// Templates held while running one sequence. Token matrices are the projected backbone
/// features of the crops, cached so each template goes through the backbone once.
struct TrackerState {
    Matrix initial_template;
    Matrix dynamic_template;
    Matrix initial_tokens;
    Matrix dynamic_tokens;
    BBox last_box;  // search centre for the next frame
    std::size_t step{0};
    bool initialized{false};

    /// Crops both templates from the first frame's ground truth.
    static TrackerState init(const TrackerNet& net, const Image& frame, const BBox& box);
};

/// What a per-frame exit decider gets to look at.
struct FrameContext {
    std::size_t frame{0};
    const TrackerState* state{nullptr};
    const Matrix* search{nullptr};
    const StepOutput* output{nullptr};
    bool gt_visible{true};  // ground truth, for oracle deciders only
};

class FrameDecider {
public:
    virtual ~FrameDecider() = default;
    virtual void reset() = 0;
    /// true flags the frame as exit.
    virtual bool decide(const TrackerNet& net, const FrameContext& ctx) = 0;
};

/// Flags exactly the ground-truth exit frames.
class OracleDecider : public FrameDecider {
public:
    void reset() override {}
    bool decide(const TrackerNet&, const FrameContext& ctx) override { return !ctx.gt_visible; }
};

struct TrackResult {
    std::vector<StepOutput> steps;  // one per frame, frame 0 included
    std::vector<BBox> boxes;  // frame coordinates; EXIT where the decider flagged
    std::vector<BBox> raw_boxes;  // prediction before flagging
    std::vector<bool> flagged;
    std::vector<std::size_t> template_updates;  // frames where the dynamic template was refreshed
    // Filled when keep_crops is set: the network inputs of every frame.
    Matrix initial_tokens;
    std::vector<Matrix> search_crops;
    std::vector<Matrix> dynamic_tokens;
};

/// One-pass tracking initialized from the first ground-truth box. Frame 0 predicts that box.
/// Every template_update_period frames the dynamic template is re-cropped from the prediction
/// when update_score > 0.5 and the frame is not flagged. Flagged frames report EXIT and leave the
/// search centre at the last unflagged prediction.
[[nodiscard]] TrackResult track_sequence(const TrackerNet& net, const Sequence& seq, FrameDecider* decider = nullptr,
                                         bool keep_crops = false);

/// Normalized crop box -> frame box with ordered corners and at least one pixel of extent.
[[nodiscard]] BBox to_frame_box(const BBox& normalized, const CropWindow& window);

/// True when the policy refreshes the dynamic template at `frame`.
[[nodiscard]] bool should_update_template(std::size_t frame, int period, double update_score, bool flagged);

}  // namespace exitrack
