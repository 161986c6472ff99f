#include "exitrack/calibration.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "exitrack/errors.hpp"
#include "exitrack/tracker.hpp"

namespace exitrack {
namespace {

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    if (s.empty()) return out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t c = s.find(',', pos);
        const auto v = parse_double(s.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
        if (!v) throw std::invalid_argument("malformed number list '" + s + "'");
        out.push_back(*v);
        if (c == std::string::npos) break;
        pos = c + 1;
    }
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += format_double(v[i]);
    }
    return s;
}

void require_nonempty(const CalibrationSet& set) {
    if (set.n_frames() == 0) throw std::invalid_argument("empty validation set");
}

double phi_from_scores(const CalibrationSet& set, const std::vector<double>& frame_scores, const ExitDecider& d) {
    std::vector<double> pooled;
    pooled.reserve(frame_scores.size());
    std::size_t off = 0;
    for (const auto& s : set.sequences) {
        const std::span<const double> raw(frame_scores.data() + off, s.crops.size());
        const auto sm = smooth(raw, d.window);
        pooled.insert(pooled.end(), sm.begin(), sm.end());
        off += s.crops.size();
    }
    return quantile(pooled, d.calibration_quantile);
}

}  // namespace

std::size_t CalibrationSet::n_frames() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.crops.size();
    return n;
}

CalibrationSet collect_calibration_set(const TrackerNet& net, std::span<const Sequence> val_id_seqs) {
    if (val_id_seqs.empty()) throw std::invalid_argument("empty validation set");
    CalibrationSet set;
    for (const auto& seq : val_id_seqs) {
        if (seq.has_exit()) throw InvalidSequenceError("calibration sequence " + seq.id + " contains exit frames");
        TrackResult r = track_sequence(net, seq, nullptr, true);
        set.sequences.push_back({std::move(r.initial_tokens), std::move(r.dynamic_tokens), std::move(r.search_crops)});
    }
    return set;
}

KeyValues CalibrationResult::to_kv() const {
    KeyValues kv;
    kv.set("epsilon_star", epsilon_star);
    kv.set("phi", phi);
    kv.set("window", window);
    kv.set("score_variant", to_string(variant));
    kv.set("quantile", quantile);
    kv.set("epsilon_grid", join(epsilon_grid));
    kv.set("epsilon_sums", join(epsilon_sums));
    kv.set("n_frames", static_cast<std::int64_t>(n_frames));
    return kv;
}

CalibrationResult CalibrationResult::from_kv(const KeyValues& kv) {
    CalibrationResult r;
    r.epsilon_star = kv.get_double("epsilon_star");
    r.phi = kv.get_double("phi");
    r.window = static_cast<int>(kv.get_int("window"));
    r.variant = score_variant_from_string(kv.require("score_variant"));
    r.quantile = kv.get_double("quantile");
    if (kv.contains("epsilon_grid")) r.epsilon_grid = parse_list(kv.require("epsilon_grid"));
    if (kv.contains("epsilon_sums")) r.epsilon_sums = parse_list(kv.require("epsilon_sums"));
    if (kv.contains("n_frames")) r.n_frames = static_cast<std::size_t>(kv.get_int("n_frames"));
    return r;
}

PerturbConfig CalibrationResult::perturb_config() const {
    PerturbConfig p;
    if (!epsilon_grid.empty()) p.epsilon_grid = epsilon_grid;
    p.variant = variant;
    p.epsilon_star = epsilon_star;
    return p;
}

ExitDecider CalibrationResult::decider() const {
    ExitDecider d;
    d.window = window;
    d.phi = phi;
    d.calibration_quantile = quantile;
    return d;
}

std::vector<std::vector<double>> grid_scores(const TrackerNet& net, const CalibrationSet& set,
                                             const PerturbConfig& cfg) {
    cfg.validate();
    require_nonempty(set);
    std::vector<std::vector<double>> scores(cfg.epsilon_grid.size());
    for (auto& s : scores) s.reserve(set.n_frames());
    for (const auto& seq : set.sequences) {
        for (std::size_t f = 0; f < seq.crops.size(); ++f) {
            const Matrix& x = seq.crops[f];
            const Matrix& dyn = seq.dynamic_tokens[f];
            const ScoreGradient sg = score_gradient(net, seq.initial_tokens, dyn, x, cfg.variant);
            if (!sg.grad.allFinite()) throw DivergenceError("non-finite input gradient of the OOD score");
            for (std::size_t e = 0; e < cfg.epsilon_grid.size(); ++e) {
                const Matrix xh = perturb(x, cfg.epsilon_grid[e], sg.grad);
                scores[e].push_back(network_score(net, seq.initial_tokens, dyn, xh, cfg.variant));
            }
        }
    }
    return scores;
}

double select_epsilon(const TrackerNet& net, const CalibrationSet& set, const PerturbConfig& cfg) {
    const auto scores = grid_scores(net, set, cfg);
    std::vector<double> sums;
    for (const auto& s : scores) sums.push_back(pairwise_sum(s));
    return cfg.epsilon_grid[argmax_epsilon(sums)];
}

double calibrate_phi(const TrackerNet& net, const CalibrationSet& set, const PerturbConfig& cfg,
                     const ExitDecider& decider) {
    require_nonempty(set);
    std::vector<double> raw;
    for (const auto& seq : set.sequences) {
        for (std::size_t f = 0; f < seq.crops.size(); ++f) {
            raw.push_back(perturbed_score(net, seq.initial_tokens, seq.dynamic_tokens[f], seq.crops[f],
                                          cfg.epsilon_star, cfg.variant));
        }
    }
    return phi_from_scores(set, raw, decider);
}

CalibrationResult calibrate(const TrackerNet& net, const CalibrationSet& set, const PerturbConfig& cfg,
                            const ExitDecider& decider) {
    decider.validate();
    const auto scores = grid_scores(net, set, cfg);
    CalibrationResult r;
    for (const auto& s : scores) r.epsilon_sums.push_back(pairwise_sum(s));
    const std::size_t best = argmax_epsilon(r.epsilon_sums);
    r.epsilon_star = cfg.epsilon_grid[best];
    r.phi = phi_from_scores(set, scores[best], decider);
    r.window = decider.window;
    r.variant = cfg.variant;
    r.quantile = decider.calibration_quantile;
    r.epsilon_grid = cfg.epsilon_grid;
    r.n_frames = set.n_frames();
    return r;
}

}  // namespace exitrack
