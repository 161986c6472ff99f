#include "exitrack/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace exitrack {
namespace {

constexpr Rgb kBackground{255, 255, 255};
constexpr Rgb kExitShade{250, 215, 215};
constexpr Rgb kAxis{120, 120, 120};
constexpr Rgb kOod{30, 90, 200};
constexpr Rgb kUpdate{230, 140, 20};
constexpr Rgb kPhi{200, 40, 40};
constexpr Rgb kPredicted{20, 160, 60};

void put(Image& img, int x, int y, Rgb c) {
    if (x >= 0 && y >= 0 && x < img.width() && y < img.height()) img.set(x, y, c);
}

void line(Image& img, int x0, int y0, int x1, int y1, Rgb c) {
    const int dx = std::abs(x1 - x0);
    const int dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1;
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        put(img, x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

}  // namespace

Image render_exit_trace(const ExitTracePlot& p, int width, int height) {
    const std::size_t n = p.gt_visible.size();
    if (n == 0) throw std::invalid_argument("render_exit_trace: empty trace");
    Image img(width, height, kBackground);
    const int left = 8, right = width - 8, top = 8, strip = 10;
    const int bottom = height - 8 - strip - 4;

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double v : p.ood_scores) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (std::isfinite(p.phi)) {
        lo = std::min(lo, p.phi);
        hi = std::max(hi, p.phi);
    }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 1.0);  // the update score lives in [0, 1]

    auto fx = [&](std::size_t t) {
        return left + static_cast<int>(std::lround(n > 1 ? (right - left) * static_cast<double>(t) / (n - 1) : 0.0));
    };
    auto fy = [&](double v) {
        return bottom - static_cast<int>(std::lround((bottom - top) * (v - lo) / (hi - lo)));
    };
    const double col = static_cast<double>(right - left) / static_cast<double>(n);

    for (std::size_t t = 0; t < n; ++t) {
        const int x0 = left + static_cast<int>(std::floor(col * t));
        const int x1 = left + static_cast<int>(std::ceil(col * (t + 1)));
        for (int x = x0; x < x1; ++x) {
            if (!p.gt_visible[t]) {
                for (int y = top; y <= bottom; ++y) put(img, x, y, kExitShade);
            }
            if (t < p.predicted_exit.size() && p.predicted_exit[t]) {
                for (int y = bottom + 4; y < bottom + 4 + strip; ++y) put(img, x, y, kPredicted);
            }
        }
    }
    line(img, left, bottom, right, bottom, kAxis);
    line(img, left, top, left, bottom, kAxis);
    if (std::isfinite(p.phi)) {
        for (int x = left; x <= right; x += 4) line(img, x, fy(p.phi), std::min(x + 1, right), fy(p.phi), kPhi);
    }
    auto series = [&](const std::vector<double>& s, Rgb c) {
        for (std::size_t t = 1; t < s.size(); ++t) line(img, fx(t - 1), fy(s[t - 1]), fx(t), fy(s[t]), c);
    };
    series(p.update_scores, kUpdate);
    series(p.ood_scores, kOod);
    return img;
}

}  // namespace exitrack
