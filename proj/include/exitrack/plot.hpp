#pragma once

#include <vector>

#include "exitrack/image.hpp"

namespace exitrack {

/// Data for one exit-trace figure. Ground-truth exit frames are shaded, predicted exits are
/// marked in a strip along the bottom, scores are drawn as lines.
struct ExitTracePlot {
    std::vector<double> ood_scores;  // smoothed
    double phi{0.0};
    std::vector<double> update_scores;
    std::vector<bool> gt_visible;
    std::vector<bool> predicted_exit;
};

[[nodiscard]] Image render_exit_trace(const ExitTracePlot& p, int width = 480, int height = 180);

}  // namespace exitrack
