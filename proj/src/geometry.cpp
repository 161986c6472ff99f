#include "exitrack/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "exitrack/errors.hpp"

namespace exitrack {
namespace {

void require_box(const BBox& b, const char* op) {
    if (b.is_exit()) {
        throw SentinelArgumentError(std::string(op) + ": EXIT sentinel is not a box");
    }
}

struct Overlap {
    double inter;
    double uni;
    double hull;
};

Overlap overlap(const BBox& a, const BBox& b) {
    const double iw = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
    const double ih = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    const double hw = std::max(a.right(), b.right()) - std::min(a.x, b.x);
    const double hh = std::max(a.bottom(), b.bottom()) - std::min(a.y, b.y);
    return {inter, uni, hw * hh};
}

}  // namespace

bool is_valid(const BBox& box) {
    if (box.is_exit()) return true;
    return std::isfinite(box.x) && std::isfinite(box.y) && std::isfinite(box.w) &&
           std::isfinite(box.h) && box.w > 0.0 && box.h > 0.0;
}

double iou(const BBox& a, const BBox& b) {
    require_box(a, "iou");
    require_box(b, "iou");
    const Overlap o = overlap(a, b);
    return o.uni > 0.0 ? o.inter / o.uni : 0.0;
}

double giou(const BBox& a, const BBox& b) {
    require_box(a, "giou");
    require_box(b, "giou");
    const Overlap o = overlap(a, b);
    if (o.uni <= 0.0 || o.hull <= 0.0) return 0.0;
    return o.inter / o.uni - (o.hull - o.uni) / o.hull;
}

double norm_center_distance(const BBox& pred, const BBox& gt, CenterNorm norm) {
    require_box(pred, "norm_center_distance");
    require_box(gt, "norm_center_distance");
    if (!(gt.w > 0.0 && gt.h > 0.0)) {
        throw std::invalid_argument("norm_center_distance: ground truth needs positive extent");
    }
    const double dx = (pred.cx() - gt.cx()) / gt.w;
    const double dy = (pred.cy() - gt.cy()) / gt.h;
    if (norm == CenterNorm::kL1) return std::abs(dx) + std::abs(dy);
    return std::hypot(dx, dy);
}

}  // namespace exitrack
