#include <gtest/gtest.h>

#include <limits>
#include <map>

#include "exitrack/conveyor.hpp"
#include "exitrack/errors.hpp"
#include "exitrack/trainer.hpp"
#include "test_util.hpp"

using namespace exitrack;
using namespace exitrack::testing_util;

namespace {

const DatasetSplit& tiny_split() {
    static const DatasetSplit split = generate_split(6, 3, 2, 5);
    return split;
}

NetConfig tiny_net(TrainMode mode) {
    NetConfig c = small_config();
    c.n_classes = static_cast<int>(class_inventory().size());
    c.train_mode = mode;
    return c;
}

TrainConfig tiny_train() {
    TrainConfig t;
    t.epochs = 2;
    t.stage2_epochs = 2;
    t.samples_per_epoch = 32;
    t.batch_size = 8;
    t.val_samples = 8;
    return t;
}

const char* kAllBlocks[] = {block::kBackbone, block::kTransformer, block::kBoxHead, block::kUpdateHead, block::kOodHead};

}  // namespace

TEST(Trainer, ZeroEpochsLeavesInitialization) {
    TrackerNet net(tiny_net(TrainMode::kJoint), 1);
    const auto before = net.params().checksum();
    TrainConfig cfg = tiny_train();
    cfg.epochs = 0;
    const auto logs = train(net, cfg, tiny_split().train, {});
    EXPECT_TRUE(logs.empty());
    EXPECT_EQ(net.params().checksum(), before);
}

TEST(Trainer, TwoStageFreezesTrackingBlocks) {
    TrackerNet net(tiny_net(TrainMode::kTwoStage), 2);
    std::map<std::string, std::uint64_t> after_stage1;
    const auto logs = train(net, tiny_train(), tiny_split().train, {}, [&](const EpochLog& e) {
        if (e.stage == "stage1") {
            for (const char* b : kAllBlocks) after_stage1[b] = net.params().checksum(b);
        }
    });
    ASSERT_EQ(logs.size(), 4u);
    EXPECT_EQ(logs[0].stage, "stage1");
    EXPECT_EQ(logs[3].stage, "stage2");
    EXPECT_EQ(net.params().checksum(block::kBackbone), after_stage1[block::kBackbone]);
    EXPECT_EQ(net.params().checksum(block::kTransformer), after_stage1[block::kTransformer]);
    EXPECT_EQ(net.params().checksum(block::kBoxHead), after_stage1[block::kBoxHead]);
    EXPECT_NE(net.params().checksum(block::kUpdateHead), after_stage1[block::kUpdateHead]);
    EXPECT_NE(net.params().checksum(block::kOodHead), after_stage1[block::kOodHead]);
    // stage 1 learns boxes only
    EXPECT_EQ(logs[0].ce, 0.0);
    EXPECT_EQ(logs[3].giou, 0.0);
}

TEST(Trainer, JointModeTrainsEveryBlock) {
    TrackerNet net(tiny_net(TrainMode::kJoint), 3);
    std::map<std::string, std::uint64_t> before;
    for (const char* b : kAllBlocks) before[b] = net.params().checksum(b);
    (void)train(net, tiny_train(), tiny_split().train, {});
    for (const char* b : kAllBlocks) EXPECT_NE(net.params().checksum(b), before[b]) << b;
}

TEST(Trainer, Deterministic) {
    TrackerNet a(tiny_net(TrainMode::kJoint), 4);
    TrackerNet b(tiny_net(TrainMode::kJoint), 4);
    const auto la = train(a, tiny_train(), tiny_split().train, tiny_split().val);
    const auto lb = train(b, tiny_train(), tiny_split().train, tiny_split().val);
    EXPECT_EQ(a.params().checksum(), b.params().checksum());
    EXPECT_EQ(la.back().loss, lb.back().loss);
    EXPECT_EQ(la.back().val_loss, lb.back().val_loss);
}

TEST(Trainer, JointLossDecreases) {
    TrackerNet net(tiny_net(TrainMode::kJoint), 5);
    TrainConfig cfg = tiny_train();
    cfg.epochs = 6;
    cfg.samples_per_epoch = 64;
    const auto logs = train(net, cfg, tiny_split().train, {});
    EXPECT_LT(logs.back().loss, logs.front().loss);
}

TEST(Trainer, RejectsExitsInTraining) {
    TrackerNet net(tiny_net(TrainMode::kJoint), 6);
    std::vector<Sequence> bad = tiny_split().train;
    bad[1].annotations[3] = BBox::exit();
    EXPECT_THROW((void)train(net, tiny_train(), bad, {}), InvalidSequenceError);
}

TEST(Trainer, DivergenceIsReported) {
    TrackerNet net(tiny_net(TrainMode::kJoint), 7);
    net.params().value(0)(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW((void)train(net, tiny_train(), tiny_split().train, {}), DivergenceError);
}

TEST(Trainer, MaskSelectsHeadsInStage2) {
    TrackerNet net(tiny_net(TrainMode::kTwoStage), 8);
    const auto m = trainable_mask(net.params(), "stage2");
    for (int i = 0; i < net.params().size(); ++i) {
        const std::string& b = net.params().block(i);
        EXPECT_EQ(m[static_cast<std::size_t>(i)], b == block::kUpdateHead || b == block::kOodHead) << net.params().name(i);
    }
    for (bool v : trainable_mask(net.params(), "joint")) EXPECT_TRUE(v);
}

TEST(Trainer, SamplesStayInsideTheCrop) {
    std::mt19937_64 rng(9);
    const NetConfig net = tiny_net(TrainMode::kJoint);
    const TrainConfig cfg = tiny_train();
    for (int i = 0; i < 50; ++i) {
        const TrainingSample s = draw_sample(tiny_split().train, net, cfg, rng);
        EXPECT_TRUE(s.visible);
        EXPECT_EQ(s.search.rows(), net.search_size * net.search_size);
        EXPECT_EQ(s.init_template.rows(), net.template_size * net.template_size);
        EXPECT_GE(s.search.minCoeff(), 0.0);
        EXPECT_LE(s.search.maxCoeff(), 1.0);
        EXPECT_GT(s.gt.w, 0.0);
    }
}

TEST(TrainConfig, KeyValuesRoundTrip) {
    TrainConfig c = tiny_train();
    c.lr = 3.5e-4;
    c.seed = 77;
    const TrainConfig back = TrainConfig::from_kv(c.to_kv());
    EXPECT_EQ(back.lr, c.lr);
    EXPECT_EQ(back.seed, c.seed);
    EXPECT_EQ(back.samples_per_epoch, c.samples_per_epoch);
}
