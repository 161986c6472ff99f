#pragma once

#include <cstddef>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "exitrack/tracker.hpp"
#include "exitrack/tracker_net.hpp"

namespace exitrack {

enum class ScoreVariant { kMaxH, kG };

/// "max_h" | "g"
[[nodiscard]] std::string to_string(ScoreVariant v);
[[nodiscard]] ScoreVariant score_variant_from_string(const std::string& s);

/// S = max_i h_i, or S = g. Throws std::invalid_argument on empty h.
[[nodiscard]] double score(std::span<const double> h, double g, ScoreVariant variant);

struct PerturbConfig {
    std::vector<double> epsilon_grid{0.0025, 0.005, 0.01, 0.02, 0.04, 0.08};
    ScoreVariant variant{ScoreVariant::kMaxH};
    double epsilon_star{0.0};

    /// Grid must be nonempty, positive and strictly ascending.
    void validate() const;
};

/// x + eps * sign(grad), sign(0) = 0, clamped to [0, 1].
[[nodiscard]] Matrix perturb(const Matrix& x, double epsilon, const Matrix& grad);

/// dS/dx of the network score at search crop x, templates held fixed.
struct ScoreGradient {
    double score{0.0};
    Matrix grad;
};
[[nodiscard]] ScoreGradient score_gradient(const TrackerNet& net, const Matrix& init_tokens, const Matrix& dyn_tokens,
                                           const Matrix& x, ScoreVariant variant);
[[nodiscard]] double network_score(const TrackerNet& net, const Matrix& init_tokens, const Matrix& dyn_tokens,
                                   const Matrix& x, ScoreVariant variant);
/// Perturbs x along the score gradient. Throws DivergenceError on a non-finite gradient.
[[nodiscard]] Matrix perturb(const TrackerNet& net, const Matrix& init_tokens, const Matrix& dyn_tokens,
                             const Matrix& x, double epsilon, ScoreVariant variant);
/// S(x^) for one frame.
[[nodiscard]] double perturbed_score(const TrackerNet& net, const Matrix& init_tokens, const Matrix& dyn_tokens,
                                     const Matrix& x, double epsilon, ScoreVariant variant);

/// Index of the largest sum; ties go to the lower index (the smaller epsilon of an ascending grid).
[[nodiscard]] std::size_t argmax_epsilon(std::span<const double> sums);

/// Pairwise (cascade) summation, independent of how the caller batches its values.
[[nodiscard]] double pairwise_sum(std::span<const double> values);

/// Trailing mean over the min(window, t + 1) most recent values.
[[nodiscard]] std::vector<double> smooth(std::span<const double> raw, int window);

/// Linear-interpolation quantile (the numpy "linear" / type 7 rule). q in [0, 1].
[[nodiscard]] double quantile(std::span<const double> values, double q);

struct ExitDecider {
    int window{5};
    double phi{-std::numeric_limits<double>::infinity()};
    double calibration_quantile{0.05};

    void validate() const;
};

/// exit[t] = smoothed[t] < phi
[[nodiscard]] std::vector<bool> decide(std::span<const double> smoothed, double phi);

struct OodTrace {
    std::vector<double> raw_scores;
    std::vector<double> smoothed_scores;
    std::vector<bool> decisions;
};

[[nodiscard]] OodTrace make_trace(std::span<const double> raw, const ExitDecider& decider);
/// Lines "frame_index,raw,smoothed,exit".
[[nodiscard]] std::string format_trace(const OodTrace& trace);
[[nodiscard]] OodTrace parse_trace(std::string_view text, const std::string& source = "<trace>");

/// Incremental form of smooth() for use while tracking.
class MovingAverage {
public:
    explicit MovingAverage(int window);
    double push(double value);
    void reset() { values_.clear(); }

private:
    int window_;
    std::deque<double> values_;
};

/// Tracking-time decider: perturbed score, moving average, threshold. Keeps the trace.
class OodDecider : public FrameDecider {
public:
    OodDecider(PerturbConfig perturb, ExitDecider decider);
    void reset() override;
    bool decide(const TrackerNet& net, const FrameContext& ctx) override;
    [[nodiscard]] const OodTrace& trace() const { return trace_; }

private:
    PerturbConfig perturb_;
    ExitDecider decider_;
    MovingAverage avg_;
    OodTrace trace_;
};

}  // namespace exitrack
