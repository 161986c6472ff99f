#include <gtest/gtest.h>

#include "exitrack/conveyor.hpp"
#include "exitrack/tracker.hpp"
#include "test_util.hpp"

using namespace exitrack;
using namespace exitrack::testing_util;

namespace {

class EveryOtherDecider : public FrameDecider {
public:
    void reset() override { calls = 0; }
    bool decide(const TrackerNet&, const FrameContext& ctx) override {
        ++calls;
        return ctx.frame % 2 == 1;
    }
    int calls{0};
};

}  // namespace

TEST(TemplateUpdate, Policy) {
    EXPECT_TRUE(should_update_template(10, 10, 0.7, false));
    EXPECT_FALSE(should_update_template(10, 10, 0.4, false));
    EXPECT_FALSE(should_update_template(10, 10, 0.5, false));
    EXPECT_FALSE(should_update_template(10, 10, 0.9, true));
    EXPECT_FALSE(should_update_template(0, 10, 0.9, false));
    for (std::size_t f = 1; f < 40; ++f) {
        EXPECT_EQ(should_update_template(f, 10, 0.9, false), f % 10 == 0) << f;
    }
}

TEST(ToFrameBox, OrdersCornersAndKeepsExtent) {
    const CropWindow w = square_window(32, 32, 40, 64, 64);
    const BBox swapped = to_frame_box(BBox::from_corners(0.8, 0.7, 0.2, 0.3), w);
    EXPECT_GT(swapped.w, 0.0);
    EXPECT_GT(swapped.h, 0.0);
    const BBox collapsed = to_frame_box(BBox::from_corners(0.5, 0.5, 0.5, 0.5), w);
    EXPECT_GE(collapsed.w, 1.0);
    EXPECT_GE(collapsed.h, 1.0);
}

TEST(Tracker, FirstFrameIsGroundTruthAndTemplatesRefreshOnSchedule) {
    SceneSpec s;
    s.n_frames = 35;
    s.exit_windows = {{12, 18}};
    const Sequence seq = generate(s);
    TrackerNet net(small_config(), 1);
    OracleDecider oracle;
    const TrackResult r = track_sequence(net, seq, &oracle);
    ASSERT_EQ(r.boxes.size(), seq.size());
    ASSERT_EQ(r.steps.size(), seq.size());
    EXPECT_EQ(r.boxes[0], seq.annotations[0]);
    for (std::size_t t = 0; t < seq.size(); ++t) {
        EXPECT_EQ(r.flagged[t], !seq.visible(t));
        EXPECT_EQ(r.boxes[t].is_exit(), !seq.visible(t));
        EXPECT_FALSE(r.raw_boxes[t].is_exit());
    }
    for (std::size_t f : r.template_updates) {
        EXPECT_EQ(f % static_cast<std::size_t>(net.config().template_update_period), 0u);
        EXPECT_FALSE(r.flagged[f]);
        EXPECT_GT(r.steps[f].update_score, 0.5);
    }
}

TEST(Tracker, DeciderSeesEveryFrame) {
    SceneSpec s;
    s.n_frames = 9;
    const Sequence seq = generate(s);
    TrackerNet net(small_config(), 2);
    EveryOtherDecider d;
    const TrackResult r = track_sequence(net, seq, &d, true);
    EXPECT_EQ(d.calls, 9);
    EXPECT_EQ(r.search_crops.size(), seq.size());
    EXPECT_EQ(r.dynamic_tokens.size(), seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t) EXPECT_EQ(r.boxes[t].is_exit(), t % 2 == 1);
}

TEST(Tracker, FlaggedFramesHoldTheSearchWindow) {
    // With every frame after the first flagged, the search window never moves, so with a
    // static scene every crop is the same.
    class AllButFirst : public FrameDecider {
    public:
        void reset() override {}
        bool decide(const TrackerNet&, const FrameContext& ctx) override { return ctx.frame > 0; }
    } d;
    SceneSpec s;
    s.n_frames = 6;
    s.belt_speed = 0.0;
    s.camera_jitter = 0.0;
    const Sequence base = generate(s);
    Sequence still = base;
    for (auto& f : still.frames) f = base.frames[0];
    TrackerNet net(small_config(), 3);
    const TrackResult r = track_sequence(net, still, &d, true);
    for (std::size_t t = 1; t < still.size(); ++t) EXPECT_EQ(r.search_crops[t], r.search_crops[1]);
}

TEST(Tracker, Deterministic) {
    SceneSpec s;
    s.n_frames = 15;
    const Sequence seq = generate(s);
    TrackerNet net(small_config(), 4);
    const TrackResult a = track_sequence(net, seq);
    const TrackResult b = track_sequence(net, seq);
    EXPECT_EQ(a.boxes, b.boxes);
}
