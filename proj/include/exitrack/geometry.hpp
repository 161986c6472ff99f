#pragma once

namespace exitrack {

/// Axis-aligned box, [top-left x, top-left y, width, height] in (sub-)pixels.
/// All four fields equal to -1 marks the EXIT sentinel (target not in frame).
struct BBox {
    double x{0.0};
    double y{0.0};
    double w{0.0};
    double h{0.0};

    static constexpr BBox exit() { return {-1.0, -1.0, -1.0, -1.0}; }

    static constexpr BBox from_corners(double x1, double y1, double x2, double y2) {
        return {x1, y1, x2 - x1, y2 - y1};
    }

    [[nodiscard]] constexpr bool is_exit() const {
        return x == -1.0 && y == -1.0 && w == -1.0 && h == -1.0;
    }
    [[nodiscard]] constexpr double area() const { return w * h; }
    [[nodiscard]] constexpr double right() const { return x + w; }
    [[nodiscard]] constexpr double bottom() const { return y + h; }
    [[nodiscard]] constexpr double cx() const { return x + 0.5 * w; }
    [[nodiscard]] constexpr double cy() const { return y + 0.5 * h; }

    bool operator==(const BBox&) const = default;
};

/// Sentinel, or strictly positive finite extent.
[[nodiscard]] bool is_valid(const BBox& box);

/// Intersection over union. Throws SentinelArgumentError on an EXIT box.
[[nodiscard]] double iou(const BBox& a, const BBox& b);

/// Generalized IoU: IoU - (hull - union) / hull, hull being the enclosing box.
[[nodiscard]] double giou(const BBox& a, const BBox& b);

enum class CenterNorm { kL2, kL1 };

/// Distance between centers after normalizing the offset by the ground-truth size.
/// kL2 is the usual normalized-precision definition; kL1 sums the absolute offsets.
[[nodiscard]] double norm_center_distance(const BBox& pred, const BBox& gt,
                                          CenterNorm norm = CenterNorm::kL2);

}  // namespace exitrack
