#include "exitrack/ood.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "exitrack/errors.hpp"
#include "exitrack/kv_file.hpp"

namespace exitrack {

std::string to_string(ScoreVariant v) { return v == ScoreVariant::kMaxH ? "max_h" : "g"; }

ScoreVariant score_variant_from_string(const std::string& s) {
    if (s == "max_h") return ScoreVariant::kMaxH;
    if (s == "g") return ScoreVariant::kG;
    throw std::invalid_argument("unknown score variant '" + s + "'");
}

double score(std::span<const double> h, double g, ScoreVariant variant) {
    if (h.empty()) throw std::invalid_argument("score: empty h");
    if (variant == ScoreVariant::kG) return g;
    return *std::max_element(h.begin(), h.end());
}

void PerturbConfig::validate() const {
    if (epsilon_grid.empty()) throw std::invalid_argument("epsilon grid is empty");
    for (std::size_t i = 0; i < epsilon_grid.size(); ++i) {
        if (!(epsilon_grid[i] > 0.0) || !std::isfinite(epsilon_grid[i])) {
            throw std::invalid_argument("epsilon grid values must be positive");
        }
        if (i > 0 && !(epsilon_grid[i] > epsilon_grid[i - 1])) {
            throw std::invalid_argument("epsilon grid must be strictly ascending");
        }
    }
    if (epsilon_star < 0.0) throw std::invalid_argument("epsilon_star must be >= 0");
}

Matrix perturb(const Matrix& x, double epsilon, const Matrix& grad) {
    if (epsilon < 0.0) throw std::invalid_argument("perturb: negative epsilon");
    if (grad.rows() != x.rows() || grad.cols() != x.cols()) throw std::invalid_argument("perturb: gradient shape");
    if (epsilon == 0.0) return x;
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double g = grad.data()[i];
        const double s = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
        out.data()[i] = std::clamp(x.data()[i] + epsilon * s, 0.0, 1.0);
    }
    return out;
}

ScoreGradient score_gradient(const TrackerNet& net, const Matrix& init_tokens, const Matrix& dyn_tokens,
                             const Matrix& x, ScoreVariant variant) {
    nn::Tape t = net.inference_tape();
    nn::Var xv = t.variable(x);
    const ForwardVars out = net.forward(t, t.constant(init_tokens), t.constant(dyn_tokens), xv);
    nn::Var s = variant == ScoreVariant::kMaxH ? nn::max_all(t, out.h) : out.g;
    t.backward(s);
    return {t.value(s)(0, 0), t.grad(xv)};
}

double network_score(const TrackerNet& net, const Matrix& init_tokens, const Matrix& dyn_tokens, const Matrix& x,
                     ScoreVariant variant) {
    const StepOutput o = net.infer(init_tokens, dyn_tokens, x);
    return score(o.ood_h, o.ood_g, variant);
}

Matrix perturb(const TrackerNet& net, const Matrix& init_tokens, const Matrix& dyn_tokens, const Matrix& x,
               double epsilon, ScoreVariant variant) {
    if (epsilon == 0.0) return x;
    const ScoreGradient sg = score_gradient(net, init_tokens, dyn_tokens, x, variant);
    if (!sg.grad.allFinite()) throw DivergenceError("non-finite input gradient of the OOD score");
    return perturb(x, epsilon, sg.grad);
}

double perturbed_score(const TrackerNet& net, const Matrix& init_tokens, const Matrix& dyn_tokens, const Matrix& x,
                       double epsilon, ScoreVariant variant) {
    return network_score(net, init_tokens, dyn_tokens, perturb(net, init_tokens, dyn_tokens, x, epsilon, variant),
                         variant);
}

std::size_t argmax_epsilon(std::span<const double> sums) {
    if (sums.empty()) throw std::invalid_argument("argmax_epsilon: no candidates");
    std::size_t best = 0;
    for (std::size_t i = 1; i < sums.size(); ++i) {
        if (sums[i] > sums[best]) best = i;
    }
    return best;
}

double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

std::vector<double> smooth(std::span<const double> raw, int window) {
    if (window < 1) throw std::invalid_argument("smooth: window must be >= 1");
    std::vector<double> out;
    out.reserve(raw.size());
    MovingAverage avg(window);
    for (double v : raw) out.push_back(avg.push(v));
    return out;
}

double quantile(std::span<const double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty set");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must be in [0, 1]");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0) return v[lo];
    return v[lo] + frac * (v[hi] - v[lo]);
}

void ExitDecider::validate() const {
    if (window < 1) throw std::invalid_argument("decider window must be >= 1");
    if (std::isnan(phi) || phi == std::numeric_limits<double>::infinity()) {
        throw std::invalid_argument("phi must be finite or -inf");
    }
    if (!(calibration_quantile >= 0.0 && calibration_quantile <= 1.0)) {
        throw std::invalid_argument("calibration quantile must be in [0, 1]");
    }
}

std::vector<bool> decide(std::span<const double> smoothed, double phi) {
    std::vector<bool> out;
    out.reserve(smoothed.size());
    for (double s : smoothed) out.push_back(s < phi);
    return out;
}

OodTrace make_trace(std::span<const double> raw, const ExitDecider& decider) {
    decider.validate();
    OodTrace t;
    t.raw_scores.assign(raw.begin(), raw.end());
    t.smoothed_scores = smooth(raw, decider.window);
    t.decisions = decide(t.smoothed_scores, decider.phi);
    return t;
}

std::string format_trace(const OodTrace& trace) {
    std::ostringstream os;
    for (std::size_t i = 0; i < trace.raw_scores.size(); ++i) {
        os << i << ',' << format_double(trace.raw_scores[i]) << ',' << format_double(trace.smoothed_scores[i]) << ','
           << (trace.decisions[i] ? 1 : 0) << '\n';
    }
    return os.str();
}

OodTrace parse_trace(std::string_view text, const std::string& source) {
    OodTrace t;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string_view> f;
        std::size_t s = 0;
        while (true) {
            const std::size_t c = line.find(',', s);
            f.push_back(line.substr(s, c == std::string_view::npos ? std::string_view::npos : c - s));
            if (c == std::string_view::npos) break;
            s = c + 1;
        }
        if (f.size() != 4) throw ParseError(source, lineno, "expected frame,raw,smoothed,exit");
        const auto idx = parse_int(f[0]);
        const auto raw = parse_double(f[1]);
        const auto sm = parse_double(f[2]);
        if (!idx || !raw || !sm || (f[3] != "0" && f[3] != "1")) throw ParseError(source, lineno, "malformed trace record");
        if (*idx != static_cast<std::int64_t>(t.raw_scores.size())) throw ParseError(source, lineno, "frame index out of order");
        t.raw_scores.push_back(*raw);
        t.smoothed_scores.push_back(*sm);
        t.decisions.push_back(f[3] == "1");
    }
    return t;
}

MovingAverage::MovingAverage(int window) : window_(window) {
    if (window < 1) throw std::invalid_argument("moving average window must be >= 1");
}

double MovingAverage::push(double value) {
    values_.push_back(value);
    if (static_cast<int>(values_.size()) > window_) values_.pop_front();
    double s = 0.0;
    for (double v : values_) s += v;
    return s / static_cast<double>(values_.size());
}

OodDecider::OodDecider(PerturbConfig perturb, ExitDecider decider)
    : perturb_(std::move(perturb)), decider_(decider), avg_(decider.window) {
    perturb_.validate();
    decider_.validate();
}

void OodDecider::reset() {
    avg_.reset();
    trace_ = {};
}

bool OodDecider::decide(const TrackerNet& net, const FrameContext& ctx) {
    const TrackerState& st = *ctx.state;
    double raw = 0.0;
    if (perturb_.epsilon_star == 0.0) {
        raw = score(ctx.output->ood_h, ctx.output->ood_g, perturb_.variant);
    } else {
        raw = perturbed_score(net, st.initial_tokens, st.dynamic_tokens, *ctx.search, perturb_.epsilon_star,
                              perturb_.variant);
    }
    const double sm = avg_.push(raw);
    const bool flag = sm < decider_.phi;
    trace_.raw_scores.push_back(raw);
    trace_.smoothed_scores.push_back(sm);
    trace_.decisions.push_back(flag);
    return flag;
}

}  // namespace exitrack
