#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "exitrack/dataset.hpp"
#include "exitrack/geometry.hpp"
#include "exitrack/kv_file.hpp"

namespace exitrack {

/// Mean over tau in {0, 0.05, ..., 1} of the fraction with IoU > tau, in percent.
/// Throws UndefinedMetricError on empty input (as do op75 and p_norm).
[[nodiscard]] double success_auc(std::span<const double> ious);
/// Percent of frames with IoU > 0.75.
[[nodiscard]] double op75(std::span<const double> ious);
/// Fraction of frames with IoU > tau, in [0, 1].
[[nodiscard]] double success_rate(std::span<const double> ious, double tau);
/// Mean over tau in {0, 0.01, ..., 0.5} of the fraction with distance <= tau, in percent.
[[nodiscard]] double p_norm(std::span<const double> distances);

/// Positive = visible, negative = exit.
struct Confusion {
    std::size_t tp{0};
    std::size_t fp{0};
    std::size_t tn{0};
    std::size_t fn{0};
    /// fp / (fp + tn); std::nullopt when there are no exit frames.
    std::optional<double> fpr;
};

[[nodiscard]] Confusion exit_confusion(const std::vector<bool>& pred_visible, const std::vector<bool>& gt_visible);

/// P(score of a random visible frame > score of a random exit frame), ties count 1/2.
/// Throws UndefinedMetricError unless both classes are present.
[[nodiscard]] double auroc(std::span<const double> scores, const std::vector<bool>& gt_visible);

/// visible <=> score > 0.5
[[nodiscard]] std::vector<bool> baseline_exit_from_template_score(std::span<const double> update_scores);

/// Per-frame exit signal of one method: a continuous visibility score (higher = more
/// likely visible) and the binary prediction.
struct ExitSignal {
    std::vector<double> scores;
    std::vector<bool> pred_visible;
};

struct MetricsReport {
    std::optional<double> auc;  // percent
    std::optional<double> op75;  // percent
    std::optional<double> p_norm;  // percent
    double fpr{0.0};  // 0 with n_exit_frames == 0 when undefined
    double tnr{0.0};
    std::optional<double> auroc;
    std::size_t n_frames{0};
    std::size_t n_exit_frames{0};
    std::size_t n_bbox_frames{0};

    [[nodiscard]] bool fpr_defined() const { return n_exit_frames > 0; }
};

/// The frame-level material behind a report, kept so sequences can be pooled.
struct FrameRecords {
    std::vector<double> ious;
    std::vector<double> distances;
    std::vector<bool> gt_visible;
    std::vector<bool> pred_visible;
    std::vector<double> scores;

    void append(const FrameRecords& other);
};

/// bbox metrics over frames whose ground truth is visible and which were neither predicted
/// exit nor reported as EXIT; exit metrics over all frames.
[[nodiscard]] FrameRecords sequence_records(const std::vector<BBox>& boxes, const ExitSignal& signal,
                                            const Sequence& seq, CenterNorm norm = CenterNorm::kL2);
[[nodiscard]] MetricsReport report_from_records(const FrameRecords& r);
[[nodiscard]] MetricsReport evaluate_sequence(const std::vector<BBox>& boxes, const ExitSignal& signal,
                                              const Sequence& seq, CenterNorm norm = CenterNorm::kL2);

/// Keys prefixed with `prefix` (e.g. "ood."). Undefined values are written as "undefined".
void add_report(KeyValues& kv, const std::string& prefix, const MetricsReport& r);
/// One JSON object on a single line.
[[nodiscard]] std::string report_json(const std::string& sequence_id, const std::string& method, const MetricsReport& r);

/// Metric rows (FPR, AUROC, AUC, OP75, P_norm) by method columns.
[[nodiscard]] std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& columns);

}  // namespace exitrack
