#include <gtest/gtest.h>

#include "exitrack/conveyor.hpp"
#include "exitrack/task_sim.hpp"

using namespace exitrack;

namespace {

// Target moves right 1 px per frame; frames 10..19 are exits.
Sequence constructed() {
    Sequence s;
    s.id = "constructed";
    s.class_label = "red_circle";
    for (int t = 0; t < 40; ++t) s.annotations.push_back({1.0 * t, 20.0, 10.0, 10.0});
    for (int t = 10; t < 20; ++t) s.annotations[static_cast<std::size_t>(t)] = BBox::exit();
    return s;
}

// Predictions that enter the place zone only while the target is away, then again after it returns.
std::vector<BBox> predictions() {
    std::vector<BBox> p(40, BBox{0.0, 20.0, 10.0, 10.0});
    for (int t = 10; t < 20; ++t) p[static_cast<std::size_t>(t)] = {30.0, 20.0, 10.0, 10.0};
    for (int t = 20; t < 40; ++t) p[static_cast<std::size_t>(t)] = {1.0 * t, 20.0, 10.0, 10.0};
    return p;
}

std::vector<bool> oracle_flags(const Sequence& s) {
    std::vector<bool> f;
    for (std::size_t t = 0; t < s.size(); ++t) f.push_back(!s.visible(t));
    return f;
}

}  // namespace

TEST(TaskStep, Transitions) {
    TaskState s;
    EXPECT_EQ(step(s, true, true, false).phase, Phase::kHolding);
    EXPECT_EQ(step(s, true, false, true).phase, Phase::kPlacing);
    EXPECT_EQ(step(s, true, false, false).phase, Phase::kTracking);
    TaskState hold{Phase::kHolding, true, 3};
    EXPECT_EQ(step(hold, false, true, true).phase, Phase::kHolding);
    EXPECT_EQ(step(hold, false, true, true).frames_in_hold, 4u);
    EXPECT_EQ(step(hold, true, false, true).phase, Phase::kTracking);
    TaskState placing{Phase::kPlacing, true, 0};
    EXPECT_EQ(step(placing, false, false, true).phase, Phase::kFailed);
    EXPECT_EQ(step(placing, true, false, true).phase, Phase::kDone);
    EXPECT_FALSE(step(placing, true, false, true).held_item);
    EXPECT_THROW((void)step(TaskState{Phase::kDone, false, 0}, true, false, false), std::logic_error);
}

TEST(Episode, BlindFlagsPlaceDuringTheExit) {
    const Sequence s = constructed();
    const PlaceZone zone = PlaceZone::default_for(64, 64);
    const EpisodeResult blind = run_episode(s, predictions(), std::vector<bool>(40, false), zone);
    EXPECT_EQ(blind.final_phase, Phase::kFailed);
    EXPECT_FALSE(blind.success);
    ASSERT_TRUE(blind.place_frame.has_value());
    EXPECT_EQ(*blind.place_frame, 12u);
}

TEST(Episode, OracleFlagsWaitForTheTarget) {
    const Sequence s = constructed();
    std::vector<BBox> boxes = predictions();
    const auto flags = oracle_flags(s);
    for (std::size_t t = 0; t < boxes.size(); ++t) {
        if (flags[t]) boxes[t] = BBox::exit();
    }
    const EpisodeResult r = run_episode(s, boxes, flags, PlaceZone::default_for(64, 64));
    EXPECT_TRUE(r.success);
    EXPECT_EQ(r.final_phase, Phase::kDone);
    EXPECT_EQ(r.holds, 1u);
    // centre x = t + 5 enters [25.6, 48] at t = 21; the third frame in a row is 23
    EXPECT_EQ(*r.place_frame, 23u);
}

TEST(Episode, NeverPlacesOnAFlaggedFrame) {
    const Sequence s = constructed();
    for (int mask = 0; mask < 64; ++mask) {
        std::vector<bool> flags(40, false);
        for (int t = 0; t < 40; ++t) flags[static_cast<std::size_t>(t)] = ((t / 7) >> (mask % 6)) & 1 ? true : (mask & 1);
        const EpisodeResult r = run_episode(s, predictions(), flags, PlaceZone::default_for(64, 64));
        for (const auto& f : r.log) {
            if (f.phase == Phase::kPlacing) EXPECT_FALSE(f.exit_flag);
        }
    }
}

TEST(Episode, NoExitsMeansFlagsDoNotMatter) {
    Sequence s = constructed();
    for (auto& b : s.annotations) {
        if (b.is_exit()) b = {0.0, 20.0, 10.0, 10.0};
    }
    const auto boxes = s.annotations;
    const EpisodeResult a = run_episode(s, boxes, oracle_flags(s), PlaceZone::default_for(64, 64));
    const EpisodeResult b = run_episode(s, boxes, std::vector<bool>(40, false), PlaceZone::default_for(64, 64));
    EXPECT_EQ(a.success, b.success);
    EXPECT_EQ(a.final_phase, b.final_phase);
    EXPECT_EQ(a.place_frame, b.place_frame);
}

TEST(Episode, OracleSucceedsOnGeneratedExitSequences) {
    SplitConfig cfg;
    cfg.n_train = 1;
    cfg.n_val = 1;
    cfg.n_test = 40;
    cfg.seed = 3;
    for (const auto& spec : make_split_specs(cfg).test) {
        if (spec.exit_windows.empty()) continue;
        const Sequence seq = generate(spec);
        std::vector<BBox> boxes = seq.annotations;
        const EpisodeResult r = run_episode(seq, boxes, oracle_flags(seq), PlaceZone::default_for(64, 64));
        EXPECT_TRUE(r.success) << seq.id << " ended " << to_string(r.final_phase);
    }
}

TEST(Episode, LogFormat) {
    const Sequence s = constructed();
    const EpisodeResult r = run_episode(s, predictions(), std::vector<bool>(40, false), PlaceZone::default_for(64, 64));
    const std::string log = format_episode_log(r);
    EXPECT_EQ(log.substr(0, 13), "0,TRACKING,0,");
    EXPECT_NE(log.find("12,FAILED,0,1"), std::string::npos);
}
