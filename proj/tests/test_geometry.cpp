#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "exitrack/errors.hpp"
#include "exitrack/geometry.hpp"

using namespace exitrack;

namespace {

BBox random_box(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(-50.0, 50.0);
    std::uniform_real_distribution<double> size(0.1, 40.0);
    return {pos(rng), pos(rng), size(rng), size(rng)};
}

}  // namespace

TEST(Iou, HandCases) {
    EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {0, 0, 2, 2}), 1.0);
    EXPECT_DOUBLE_EQ(iou({0, 0, 1, 1}, {2, 2, 1, 1}), 0.0);
    // intersection 1, union 4 + 4 - 1
    EXPECT_NEAR(iou({0, 0, 2, 2}, {1, 1, 2, 2}), 1.0 / 7.0, 1e-12);
}

TEST(Giou, HandCases) {
    EXPECT_DOUBLE_EQ(giou({3, 4, 5, 6}, {3, 4, 5, 6}), 1.0);
    // hull 3x3 = 9, union 7
    EXPECT_NEAR(giou({0, 0, 2, 2}, {1, 1, 2, 2}), 1.0 / 7.0 - 2.0 / 9.0, 1e-12);
    EXPECT_NEAR(giou({0, 0, 2, 2}, {1, 1, 2, 2}), -0.0793650793650794, 1e-12);
    // hull 9, union 2
    EXPECT_NEAR(giou({0, 0, 1, 1}, {2, 2, 1, 1}), -7.0 / 9.0, 1e-12);
}

TEST(Geometry, SentinelRejected) {
    EXPECT_THROW((void)iou(BBox::exit(), {0, 0, 1, 1}), SentinelArgumentError);
    EXPECT_THROW((void)giou({0, 0, 1, 1}, BBox::exit()), SentinelArgumentError);
    EXPECT_THROW((void)norm_center_distance(BBox::exit(), {0, 0, 1, 1}), SentinelArgumentError);
}

TEST(Geometry, Validity) {
    EXPECT_TRUE(is_valid(BBox::exit()));
    EXPECT_TRUE(is_valid({0, 0, 0.5, 3}));
    EXPECT_FALSE(is_valid({0, 0, 0, 3}));
    EXPECT_FALSE(is_valid({0, 0, -2, 3}));
    EXPECT_FALSE(is_valid({0, 0, NAN, 3}));
}

TEST(CenterDistance, HandCases) {
    EXPECT_DOUBLE_EQ(norm_center_distance({1, 2, 3, 4}, {1, 2, 3, 4}), 0.0);
    EXPECT_DOUBLE_EQ(norm_center_distance({13, 2, 10, 4}, {3, 2, 10, 4}), 1.0);
    EXPECT_NEAR(norm_center_distance({0, 0, 2, 2}, {1, 1, 2, 2}), std::sqrt(0.5), 1e-12);
    EXPECT_NEAR(norm_center_distance({0, 0, 2, 2}, {1, 1, 2, 2}, CenterNorm::kL1), 1.0, 1e-12);
}

TEST(Geometry, RandomPairProperties) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 10000; ++i) {
        const BBox a = random_box(rng);
        const BBox b = random_box(rng);
        const double ab = iou(a, b);
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 1.0);
        EXPECT_EQ(ab, iou(b, a));
        EXPECT_NEAR(iou(a, a), 1.0, 1e-12);
        const double g = giou(a, b);
        EXPECT_LE(g, ab + 1e-12);
        EXPECT_GE(g, -1.0);
        EXPECT_LE(g, 1.0);
        EXPECT_NEAR(g, giou(b, a), 1e-12);
    }
}

TEST(Geometry, IouMatchesCornerOracle) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 1000; ++i) {
        const BBox a = random_box(rng);
        const BBox b = random_box(rng);
        const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
        const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
        const double inter = ix * iy;
        const double uni = a.w * a.h + b.w * b.h - inter;
        EXPECT_NEAR(iou(a, b), inter / uni, 1e-12);
    }
}

TEST(Giou, EqualsIouWhenHullIsUnion) {
    // nested boxes: hull is the outer box, which is also the union
    EXPECT_NEAR(giou({0, 0, 10, 10}, {2, 3, 4, 5}), iou({0, 0, 10, 10}, {2, 3, 4, 5}), 1e-12);
    // side-by-side boxes sharing an edge and height
    EXPECT_NEAR(giou({0, 0, 2, 3}, {2, 0, 5, 3}), 0.0, 1e-12);
}

TEST(Giou, DecreasesTowardMinusOneWithSeparation) {
    const BBox a{0, 0, 4, 4};
    double prev = 2.0;
    for (double d = 0.0; d <= 2000.0; d += 5.0) {
        const double g = giou(a, {d, d, 4, 4});
        EXPECT_LT(g, prev);
        prev = g;
    }
    EXPECT_LT(prev, -0.99);
}

TEST(CenterDistance, TranslationInvariant) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> shift(-100.0, 100.0);
    for (int i = 0; i < 1000; ++i) {
        const BBox p = random_box(rng);
        const BBox g = random_box(rng);
        const double dx = shift(rng);
        const double dy = shift(rng);
        const BBox p2{p.x + dx, p.y + dy, p.w, p.h};
        const BBox g2{g.x + dx, g.y + dy, g.w, g.h};
        EXPECT_NEAR(norm_center_distance(p, g), norm_center_distance(p2, g2), 1e-9);
    }
}
