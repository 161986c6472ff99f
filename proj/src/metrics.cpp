#include "exitrack/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "exitrack/errors.hpp"

namespace exitrack {
namespace {

void require_nonempty(std::size_t n, const char* what) {
    if (n == 0) throw UndefinedMetricError(std::string(what) + " of an empty frame set");
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

double success_rate(std::span<const double> ious, double tau) {
    require_nonempty(ious.size(), "success rate");
    const auto n = std::count_if(ious.begin(), ious.end(), [tau](double v) { return v > tau; });
    return static_cast<double>(n) / static_cast<double>(ious.size());
}

double success_auc(std::span<const double> ious) {
    require_nonempty(ious.size(), "success AUC");
    double acc = 0.0;
    for (int i = 0; i <= 20; ++i) acc += success_rate(ious, i / 20.0);
    return 100.0 * acc / 21.0;
}

double op75(std::span<const double> ious) { return 100.0 * success_rate(ious, 0.75); }

double p_norm(std::span<const double> distances) {
    require_nonempty(distances.size(), "normalized precision");
    double acc = 0.0;
    for (int i = 0; i <= 50; ++i) {
        const double tau = i / 100.0;
        const auto n = std::count_if(distances.begin(), distances.end(), [tau](double d) { return d <= tau; });
        acc += static_cast<double>(n) / static_cast<double>(distances.size());
    }
    return 100.0 * acc / 51.0;
}

Confusion exit_confusion(const std::vector<bool>& pred_visible, const std::vector<bool>& gt_visible) {
    if (pred_visible.size() != gt_visible.size()) throw std::invalid_argument("exit_confusion: length mismatch");
    Confusion c;
    for (std::size_t i = 0; i < gt_visible.size(); ++i) {
        if (gt_visible[i]) {
            pred_visible[i] ? ++c.tp : ++c.fn;
        } else {
            pred_visible[i] ? ++c.fp : ++c.tn;
        }
    }
    if (c.fp + c.tn > 0) c.fpr = static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
    return c;
}

double auroc(std::span<const double> scores, const std::vector<bool>& gt_visible) {
    if (scores.size() != gt_visible.size()) throw std::invalid_argument("auroc: length mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of mid-ranks of the positives (Mann-Whitney U).
    double rank_sum = 0.0;
    std::size_t n_pos = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (gt_visible[order[k]]) {
                rank_sum += mid;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("AUROC needs both visible and exit frames");
    const double np = static_cast<double>(n_pos);
    const double u = rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(n_neg));
}

std::vector<bool> baseline_exit_from_template_score(std::span<const double> update_scores) {
    std::vector<bool> out;
    out.reserve(update_scores.size());
    for (double s : update_scores) out.push_back(s > 0.5);
    return out;
}

void FrameRecords::append(const FrameRecords& o) {
    ious.insert(ious.end(), o.ious.begin(), o.ious.end());
    distances.insert(distances.end(), o.distances.begin(), o.distances.end());
    gt_visible.insert(gt_visible.end(), o.gt_visible.begin(), o.gt_visible.end());
    pred_visible.insert(pred_visible.end(), o.pred_visible.begin(), o.pred_visible.end());
    scores.insert(scores.end(), o.scores.begin(), o.scores.end());
}

FrameRecords sequence_records(const std::vector<BBox>& boxes, const ExitSignal& signal, const Sequence& seq,
                              CenterNorm norm) {
    const std::size_t n = seq.size();
    if (boxes.size() != n || signal.scores.size() != n || signal.pred_visible.size() != n) {
        throw std::invalid_argument("evaluate_sequence: predictions are not aligned with " + seq.id);
    }
    FrameRecords r;
    r.scores = signal.scores;
    r.pred_visible = signal.pred_visible;
    r.gt_visible.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        const bool vis = seq.visible(t);
        r.gt_visible.push_back(vis);
        if (!vis || !signal.pred_visible[t] || boxes[t].is_exit()) continue;
        r.ious.push_back(iou(boxes[t], seq.annotations[t]));
        r.distances.push_back(norm_center_distance(boxes[t], seq.annotations[t], norm));
    }
    return r;
}

MetricsReport report_from_records(const FrameRecords& r) {
    MetricsReport m;
    m.n_frames = r.gt_visible.size();
    m.n_exit_frames = static_cast<std::size_t>(std::count(r.gt_visible.begin(), r.gt_visible.end(), false));
    m.n_bbox_frames = r.ious.size();
    if (!r.ious.empty()) {
        m.auc = success_auc(r.ious);
        m.op75 = op75(r.ious);
        m.p_norm = p_norm(r.distances);
    }
    const Confusion c = exit_confusion(r.pred_visible, r.gt_visible);
    if (c.fpr) {
        m.fpr = *c.fpr;
        m.tnr = 1.0 - *c.fpr;
    }
    if (m.n_exit_frames > 0 && m.n_exit_frames < m.n_frames) m.auroc = auroc(r.scores, r.gt_visible);
    return m;
}

MetricsReport evaluate_sequence(const std::vector<BBox>& boxes, const ExitSignal& signal, const Sequence& seq,
                                CenterNorm norm) {
    return report_from_records(sequence_records(boxes, signal, seq, norm));
}

void add_report(KeyValues& kv, const std::string& prefix, const MetricsReport& r) {
    auto opt = [&](const char* k, const std::optional<double>& v) {
        if (v) {
            kv.set(prefix + k, *v);
        } else {
            kv.set(prefix + k, "undefined");
        }
    };
    opt("auc", r.auc);
    opt("op75", r.op75);
    opt("p_norm", r.p_norm);
    const auto rate = [&](double v) { return r.fpr_defined() ? std::optional<double>(v) : std::nullopt; };
    opt("fpr", rate(r.fpr));
    opt("tnr", rate(r.tnr));
    opt("auroc", r.auroc);
    kv.set(prefix + "n_frames", static_cast<std::int64_t>(r.n_frames));
    kv.set(prefix + "n_exit_frames", static_cast<std::int64_t>(r.n_exit_frames));
    kv.set(prefix + "n_bbox_frames", static_cast<std::int64_t>(r.n_bbox_frames));
}

std::string report_json(const std::string& sequence_id, const std::string& method, const MetricsReport& r) {
    nlohmann::ordered_json j;
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
    j["sequence"] = sequence_id;
    j["method"] = method;
    j["auc"] = opt(r.auc);
    j["op75"] = opt(r.op75);
    j["p_norm"] = opt(r.p_norm);
    j["fpr"] = r.fpr;
    j["fpr_defined"] = r.fpr_defined();
    j["auroc"] = opt(r.auroc);
    j["n_frames"] = r.n_frames;
    j["n_exit_frames"] = r.n_exit_frames;
    j["n_bbox_frames"] = r.n_bbox_frames;
    return j.dump();
}

std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& columns) {
    std::vector<std::vector<std::string>> rows = {{"Metric"}, {"FPR"}, {"AUROC"}, {"AUC (%)"}, {"OP75 (%)"}, {"P_norm (%)"}};
    auto cell = [](const std::optional<double>& v, int d) { return v ? fixed(*v, d) : std::string("-"); };
    for (const auto& [name, r] : columns) {
        rows[0].push_back(name);
        rows[1].push_back(r.fpr_defined() ? fixed(r.fpr, 2) : std::string("-"));
        rows[2].push_back(cell(r.auroc, 2));
        rows[3].push_back(cell(r.auc, 2));
        rows[4].push_back(cell(r.op75, 2));
        rows[5].push_back(cell(r.p_norm, 2));
    }
    std::vector<std::size_t> width(rows[0].size(), 0);
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream os;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            if (c) os << " | ";
            const auto& s = rows[r][c];
            if (c == 0) {
                os << s << std::string(width[c] - s.size(), ' ');
            } else {
                os << std::string(width[c] - s.size(), ' ') << s;
            }
        }
        os << '\n';
        if (r == 0 || r == 2) {
            for (std::size_t c = 0; c < width.size(); ++c) {
                if (c) os << "-+-";
                os << std::string(width[c], '-');
            }
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace exitrack
