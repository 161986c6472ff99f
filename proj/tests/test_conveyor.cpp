#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "exitrack/conveyor.hpp"
#include "exitrack/dataset.hpp"
#include "exitrack/kv_file.hpp"

using namespace exitrack;
namespace fs = std::filesystem;

TEST(Conveyor, BeltKinematicsWithoutJitter) {
    SceneSpec s;
    s.camera_jitter = 0.0;
    s.belt_speed = 0.35;
    s.target_x0 = 3.0;
    s.n_frames = 40;
    const Sequence seq = generate(s);
    for (int t = 0; t < s.n_frames; ++t) {
        EXPECT_DOUBLE_EQ(seq.annotations[t].x, 3.0 + 0.35 * t);
        EXPECT_DOUBLE_EQ(seq.annotations[t].y, s.target_y0);
    }
}

TEST(Conveyor, ExitWindowFramesAreSentinels) {
    SceneSpec s;
    s.n_frames = 50;
    s.exit_windows = {{10, 20}, {30, 33}};
    const Sequence seq = generate(s);
    for (int t = 0; t < s.n_frames; ++t) {
        EXPECT_EQ(seq.annotations[t].is_exit(), s.in_exit_window(t)) << t;
    }
    EXPECT_EQ(exit_segments(seq.annotations), (std::vector<std::size_t>{10, 3}));
}

TEST(Conveyor, TargetVanishesFromPixels) {
    SceneSpec s;
    s.n_frames = 30;
    s.camera_jitter = 0.0;
    s.n_distractors = 0;
    s.exit_windows = {{10, 20}};
    const Sequence with = generate(s);
    s.exit_windows.clear();
    const Sequence without = generate(s);
    // same noise stream, so only the exit frames differ
    EXPECT_EQ(with.frames[5], without.frames[5]);
    EXPECT_NE(with.frames[15], without.frames[15]);
}

TEST(Conveyor, Deterministic) {
    SceneSpec s;
    s.seed = 99;
    s.n_frames = 12;
    EXPECT_EQ(generate(s).frames, generate(s).frames);
    SceneSpec t = s;
    t.seed = 100;
    EXPECT_NE(generate(s).frames, generate(t).frames);
}

TEST(Conveyor, SpecRoundTripsThroughKeyValues) {
    SceneSpec s;
    s.id = "abc";
    s.seed = 123456789012345ULL;
    s.belt_speed = 0.123456789;
    s.target_shape = Shape::kDiamond;
    s.target_color = "blue";
    s.exit_windows = {{3, 9}, {20, 25}};
    const SceneSpec back = SceneSpec::from_kv(KeyValues::parse(s.to_kv().to_string()));
    EXPECT_EQ(back.id, s.id);
    EXPECT_EQ(back.seed, s.seed);
    EXPECT_EQ(back.belt_speed, s.belt_speed);
    EXPECT_EQ(back.target_shape, s.target_shape);
    EXPECT_EQ(back.target_color, s.target_color);
    EXPECT_EQ(back.exit_windows, s.exit_windows);
}

TEST(Conveyor, InvalidSpecRejected) {
    SceneSpec s;
    s.n_frames = 0;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    SceneSpec c;
    c.exit_windows = {{0, 5}};
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Split, DefaultSpecsInvariants) {
    const SplitConfig cfg;
    const SplitSpecs specs = make_split_specs(cfg);
    ASSERT_EQ(specs.train.size(), 200u);
    ASSERT_EQ(specs.val.size(), 40u);
    ASSERT_EQ(specs.test.size(), 50u);
    for (const auto& s : specs.train) EXPECT_TRUE(s.exit_windows.empty());
    int val_exit = 0;
    int test_exit = 0;
    for (const auto& s : specs.val) val_exit += s.exit_windows.empty() ? 0 : 1;
    for (const auto& s : specs.test) test_exit += s.exit_windows.empty() ? 0 : 1;
    EXPECT_EQ(val_exit, 8);
    EXPECT_EQ(test_exit, 10);
    EXPECT_LT(val_exit, 40);  // an ID-only subset remains for calibration

    std::set<std::string> ids;
    std::set<std::string> classes;
    for (const auto* list : {&specs.train, &specs.val, &specs.test}) {
        for (const auto& s : *list) {
            EXPECT_TRUE(ids.insert(s.id).second) << s.id;
            classes.insert(class_label(s.target_shape, s.target_color));
            EXPECT_GE(s.n_frames, cfg.min_frames);
            EXPECT_LE(s.n_frames, cfg.max_frames);
        }
    }
    EXPECT_GE(classes.size(), 4u);
}

TEST(Split, DisjointSeedsGiveDisjointIds) {
    SplitConfig a;
    a.seed = 1;
    SplitConfig b;
    b.seed = 2;
    std::set<std::string> ids;
    for (const auto* cfg : {&a, &b}) {
        const auto specs = make_split_specs(*cfg);
        for (const auto* list : {&specs.train, &specs.val, &specs.test}) {
            for (const auto& s : *list) EXPECT_TRUE(ids.insert(s.id).second) << s.id;
        }
    }
}

TEST(Split, GeneratedStatsMatchConstruction) {
    const DatasetSplit split = generate_split(4, 5, 10, 7);
    EXPECT_EQ(compute_stats(split.train).evr, 0.0);
    EXPECT_DOUBLE_EQ(compute_stats(split.test).evr, 0.2);
    EXPECT_DOUBLE_EQ(compute_stats(split.val).evr, 0.2);
    for (const auto* list : {&split.train, &split.val, &split.test}) {
        for (const auto& seq : *list) {
            validate(seq);
            for (std::size_t t = 0; t < seq.size(); ++t) {
                const BBox& b = seq.annotations[t];
                if (b.is_exit()) continue;
                EXPECT_GT(b.right(), 0.0);
                EXPECT_LT(b.x, 64.0);
                EXPECT_GT(b.bottom(), 0.0);
                EXPECT_LT(b.y, 64.0);
            }
        }
    }
}

TEST(Split, WrittenAnnotationsAreByteIdentical) {
    SplitConfig cfg;
    cfg.n_train = 2;
    cfg.n_val = 2;
    cfg.n_test = 3;
    cfg.seed = 7;
    const fs::path root = fs::path(testing::TempDir()) / "exitrack_split";
    fs::remove_all(root);
    write_split(make_split_specs(cfg), root / "a");
    write_split(make_split_specs(cfg), root / "b");
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), root / "a");
        EXPECT_EQ(read_text(e.path()), read_text(root / "b" / rel)) << rel;
        ++n;
    }
    EXPECT_GT(n, 0u);
}
