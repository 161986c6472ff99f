#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "exitrack/errors.hpp"
#include "exitrack/metrics.hpp"

using namespace exitrack;

namespace {

double brute_auroc(const std::vector<double>& s, const std::vector<bool>& vis) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!vis[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (vis[j]) continue;
            pairs += 1.0;
            if (s[i] > s[j]) wins += 1.0;
            else if (s[i] == s[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

Sequence straight_sequence(std::size_t n, const std::vector<std::size_t>& exits = {}) {
    Sequence s;
    s.id = "seq";
    s.class_label = "red_circle";
    for (std::size_t i = 0; i < n; ++i) s.annotations.push_back({2.0 + i, 3.0, 10.0, 8.0});
    for (auto e : exits) s.annotations[e] = BBox::exit();
    return s;
}

}  // namespace

TEST(SuccessAuc, Examples) {
    EXPECT_EQ(success_auc(std::vector<double>{0.0, 0.0}), 0.0);
    EXPECT_NEAR(success_auc(std::vector<double>{0.5}), 100.0 * 10.0 / 21.0, 1e-9);
    EXPECT_NEAR(success_auc(std::vector<double>{1.0, 1.0}), 100.0 * 20.0 / 21.0, 1e-9);
    EXPECT_THROW((void)success_auc(std::vector<double>{}), UndefinedMetricError);
}

TEST(Op75, Examples) {
    EXPECT_DOUBLE_EQ(op75(std::vector<double>{0.8, 0.9, 0.5, 0.76}), 75.0);
    EXPECT_DOUBLE_EQ(op75(std::vector<double>{0.1, 0.7}), 0.0);
    EXPECT_DOUBLE_EQ(op75(std::vector<double>{0.75, 0.75}), 0.0);
}

TEST(PNorm, Examples) {
    EXPECT_DOUBLE_EQ(p_norm(std::vector<double>{0.0, 0.0}), 100.0);
    EXPECT_DOUBLE_EQ(p_norm(std::vector<double>{0.51, 3.0}), 0.0);
    EXPECT_NEAR(p_norm(std::vector<double>{0.25}), 100.0 * 26.0 / 51.0, 1e-9);
    EXPECT_THROW((void)p_norm(std::vector<double>{}), UndefinedMetricError);
}

TEST(Confusion, Examples) {
    // 4 exit frames, one of them predicted visible
    const std::vector<bool> gt{true, false, false, false, false, true};
    const std::vector<bool> pred{true, true, false, false, false, true};
    const Confusion c = exit_confusion(pred, gt);
    ASSERT_TRUE(c.fpr.has_value());
    EXPECT_DOUBLE_EQ(*c.fpr, 0.25);
    EXPECT_EQ(*exit_confusion(gt, gt).fpr, 0.0);
    EXPECT_EQ(*exit_confusion(std::vector<bool>(6, true), gt).fpr, 1.0);
    EXPECT_FALSE(exit_confusion(std::vector<bool>(3, true), std::vector<bool>(3, true)).fpr.has_value());
}

TEST(Auroc, Examples) {
    const std::vector<double> s{0.9, 0.4, 0.5, 0.1};
    const std::vector<bool> vis{true, true, false, false};
    EXPECT_DOUBLE_EQ(auroc(s, vis), 0.75);
    EXPECT_DOUBLE_EQ(auroc(std::vector<double>{3, 4, 1, 2}, vis), 1.0);
    EXPECT_DOUBLE_EQ(auroc(std::vector<double>(4, 0.2), vis), 0.5);
    EXPECT_THROW((void)auroc(std::vector<double>{1, 2}, std::vector<bool>{true, true}), UndefinedMetricError);
}

TEST(Auroc, MatchesPairCountingOracle) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 400);
        std::vector<double> s(static_cast<std::size_t>(n));
        std::vector<bool> vis(static_cast<std::size_t>(n));
        const bool coarse = trial % 2 == 0;  // many ties
        for (int i = 0; i < n; ++i) {
            s[i] = coarse ? static_cast<double>(rng() % 7) : std::normal_distribution<double>()(rng);
            vis[i] = rng() % 3 != 0;
        }
        vis[0] = true;
        vis[1] = false;
        EXPECT_NEAR(auroc(s, vis), brute_auroc(s, vis), 1e-9);
    }
}

TEST(Auroc, InvariantUnderIncreasingTransforms) {
    std::mt19937_64 rng(18);
    std::vector<double> s(300);
    std::vector<bool> vis(300);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = std::normal_distribution<double>()(rng);
        vis[i] = i % 3 != 0;
    }
    std::vector<double> t(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(3.0 * s[i]) + 7.0;
    EXPECT_NEAR(auroc(s, vis), auroc(t, vis), 1e-12);
}

TEST(Metrics, MonotoneUnderImprovement) {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> ious(20);
        std::vector<double> dists(20);
        for (auto& v : ious) v = u(rng);
        for (auto& v : dists) v = u(rng);
        std::vector<double> better_i = ious;
        std::vector<double> better_d = dists;
        for (auto& v : better_i) v = std::min(1.0, v + 0.3 * u(rng));
        for (auto& v : better_d) v = std::max(0.0, v - 0.3 * u(rng));
        EXPECT_GE(success_auc(better_i), success_auc(ious));
        EXPECT_GE(p_norm(better_d), p_norm(dists));
        EXPECT_DOUBLE_EQ(op75(ious), 100.0 * success_rate(ious, 0.75));
    }
}

TEST(Baseline, TemplateScoreThreshold) {
    EXPECT_EQ(baseline_exit_from_template_score(std::vector<double>{0.5022, 0.4247, 0.5}),
              (std::vector<bool>{true, false, false}));
}

TEST(Report, PerfectBoxesWithoutExits) {
    const Sequence seq = straight_sequence(10);
    const ExitSignal sig{std::vector<double>(10, 1.0), std::vector<bool>(10, true)};
    const MetricsReport r = evaluate_sequence(seq.annotations, sig, seq);
    EXPECT_NEAR(*r.auc, 100.0 * 20.0 / 21.0, 1e-9);
    EXPECT_DOUBLE_EQ(*r.op75, 100.0);
    EXPECT_DOUBLE_EQ(*r.p_norm, 100.0);
    EXPECT_FALSE(r.fpr_defined());
    EXPECT_FALSE(r.auroc.has_value());
}

TEST(Report, AllExitPredictions) {
    const Sequence seq = straight_sequence(6, {2, 3});
    std::vector<BBox> boxes(6, BBox::exit());
    const ExitSignal sig{{0.9, 0.8, 0.1, 0.2, 0.7, 0.6}, std::vector<bool>(6, false)};
    const MetricsReport r = evaluate_sequence(boxes, sig, seq);
    EXPECT_FALSE(r.auc.has_value());
    EXPECT_FALSE(r.op75.has_value());
    EXPECT_FALSE(r.p_norm.has_value());
    EXPECT_TRUE(r.fpr_defined());
    EXPECT_EQ(r.fpr, 0.0);
    EXPECT_EQ(r.tnr, 1.0);
    EXPECT_DOUBLE_EQ(*r.auroc, 1.0);
    EXPECT_EQ(r.n_exit_frames, 2u);
    EXPECT_EQ(r.n_bbox_frames, 0u);
}

TEST(Report, FprPlusTnrIsOne) {
    std::mt19937_64 rng(20);
    for (int trial = 0; trial < 50; ++trial) {
        const Sequence seq = straight_sequence(30, {5, 6, 7, 20});
        ExitSignal sig;
        for (int i = 0; i < 30; ++i) {
            sig.scores.push_back(std::uniform_real_distribution<double>()(rng));
            sig.pred_visible.push_back(rng() % 2 == 0);
        }
        std::vector<BBox> boxes = seq.annotations;
        for (int i = 0; i < 30; ++i) {
            if (!sig.pred_visible[static_cast<std::size_t>(i)]) boxes[static_cast<std::size_t>(i)] = BBox::exit();
            else if (boxes[static_cast<std::size_t>(i)].is_exit()) boxes[static_cast<std::size_t>(i)] = {1, 1, 5, 5};
        }
        const MetricsReport r = evaluate_sequence(boxes, sig, seq);
        EXPECT_NEAR(r.fpr + r.tnr, 1.0, 1e-12);
    }
}

TEST(Report, PoolingMatchesOneLongSequence) {
    const Sequence a = straight_sequence(8, {3});
    const Sequence b = straight_sequence(5, {1, 2});
    std::vector<BBox> pa = a.annotations;
    pa[0].x += 2.0;
    std::vector<BBox> pb = b.annotations;
    pb[4].y += 3.0;
    const ExitSignal sa{{0.9, 0.7, 0.6, 0.2, 0.8, 0.9, 0.4, 0.7}, {true, true, true, false, true, true, false, true}};
    const ExitSignal sb{{0.6, 0.3, 0.65, 0.9, 0.8}, {true, false, true, true, true}};
    FrameRecords pooled = sequence_records(pa, sa, a);
    pooled.append(sequence_records(pb, sb, b));
    Sequence ab = a;
    ab.annotations.insert(ab.annotations.end(), b.annotations.begin(), b.annotations.end());
    std::vector<BBox> pab = pa;
    pab.insert(pab.end(), pb.begin(), pb.end());
    ExitSignal sab = sa;
    sab.scores.insert(sab.scores.end(), sb.scores.begin(), sb.scores.end());
    sab.pred_visible.insert(sab.pred_visible.end(), sb.pred_visible.begin(), sb.pred_visible.end());
    const MetricsReport r1 = report_from_records(pooled);
    const MetricsReport r2 = evaluate_sequence(pab, sab, ab);
    EXPECT_EQ(*r1.auc, *r2.auc);
    EXPECT_EQ(*r1.auroc, *r2.auroc);
    EXPECT_EQ(r1.fpr, r2.fpr);
    EXPECT_EQ(r1.n_frames, 13u);
}

TEST(Report, SerializedForms) {
    const Sequence seq = straight_sequence(4);
    const ExitSignal sig{std::vector<double>(4, 1.0), std::vector<bool>(4, true)};
    const MetricsReport r = evaluate_sequence(seq.annotations, sig, seq);
    KeyValues kv;
    add_report(kv, "ood.", r);
    EXPECT_EQ(kv.require("ood.auroc"), "undefined");
    EXPECT_EQ(kv.require("ood.fpr"), "undefined");
    const auto j = nlohmann::json::parse(report_json("seq", "ood", r));
    EXPECT_EQ(j["sequence"], "seq");
    EXPECT_EQ(j["method"], "ood");
    EXPECT_TRUE(j["auroc"].is_null());
    const std::string table = format_table({{"ood", r}, {"template", r}});
    EXPECT_NE(table.find("AUROC"), std::string::npos);
    EXPECT_NE(table.find("template"), std::string::npos);
}
