#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "exitrack/dataset.hpp"
#include "exitrack/kv_file.hpp"
#include "exitrack/ood.hpp"
#include "exitrack/tracker_net.hpp"

namespace exitrack {

/// Network inputs of every frame of the in-distribution validation sequences, as seen while tracking.
struct CalibrationSet {
    struct Seq {
        Matrix initial_tokens;
        std::vector<Matrix> dynamic_tokens;
        std::vector<Matrix> crops;
    };
    std::vector<Seq> sequences;
    [[nodiscard]] std::size_t n_frames() const;
};

/// Tracks each sequence once (no decider) and keeps its search crops. Throws
/// InvalidSequenceError if a sequence has exit frames and std::invalid_argument if none are given.
[[nodiscard]] CalibrationSet collect_calibration_set(const TrackerNet& net, std::span<const Sequence> val_id_seqs);

struct CalibrationResult {
    double epsilon_star{0.0};
    double phi{0.0};
    int window{5};
    ScoreVariant variant{ScoreVariant::kMaxH};
    double quantile{0.05};
    std::vector<double> epsilon_grid;
    std::vector<double> epsilon_sums;  // sum of S(x^) over all frames, per grid entry
    std::size_t n_frames{0};

    [[nodiscard]] KeyValues to_kv() const;
    [[nodiscard]] static CalibrationResult from_kv(const KeyValues& kv);
    [[nodiscard]] PerturbConfig perturb_config() const;
    [[nodiscard]] ExitDecider decider() const;
};

/// Per-frame S(x^) for every grid entry: scores[e][f] over frames f of all sequences.
[[nodiscard]] std::vector<std::vector<double>> grid_scores(const TrackerNet& net, const CalibrationSet& set,
                                                           const PerturbConfig& cfg);

/// argmax over the grid of the summed validation scores, ties toward the smaller epsilon.
[[nodiscard]] double select_epsilon(const TrackerNet& net, const CalibrationSet& set, const PerturbConfig& cfg);

/// Quantile of the per-sequence smoothed S(x^) at epsilon_star, pooled over all frames.
[[nodiscard]] double calibrate_phi(const TrackerNet& net, const CalibrationSet& set, const PerturbConfig& cfg,
                                   const ExitDecider& decider);

/// Both steps, sharing one gradient per frame.
[[nodiscard]] CalibrationResult calibrate(const TrackerNet& net, const CalibrationSet& set, const PerturbConfig& cfg,
                                          const ExitDecider& decider);

}  // namespace exitrack
