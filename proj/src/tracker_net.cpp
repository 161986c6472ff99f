#include "exitrack/tracker_net.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "exitrack/errors.hpp"

namespace exitrack {

using nn::Tape;
using nn::Var;

namespace {

// Parameter order. Every weight is immediately followed by its bias.
enum Id : int {
    kC1W, kC1B, kC2W, kC2B, kC3W, kC3B, kProjW, kProjB,
    kPos,
    kEncAttn, kEncAttnEnd = kEncAttn + 8,
    kEncLn1G = kEncAttnEnd, kEncLn1B,
    kEncFfn, kEncFfnEnd = kEncFfn + 4,
    kEncLn2G = kEncFfnEnd, kEncLn2B,
    kQuery,
    kDecAttn, kDecAttnEnd = kDecAttn + 8,
    kDecLn1G = kDecAttnEnd, kDecLn1B,
    kDecFfn, kDecFfnEnd = kDecFfn + 4,
    kDecLn2G = kDecFfnEnd, kDecLn2B,
    kB1W, kB1B, kB2W, kB2B, kB3W, kB3B,
    kU1W, kU1B, kU2W, kU2B,
    kO1W, kO1B, kO2W, kO2B, kOgW, kOgB,
    kNumParams
};

constexpr int kC1 = 16;
constexpr int kC2 = 32;
constexpr double kGFloor = 1e-6;

Matrix normal(std::mt19937_64& rng, int rows, int cols, double std) {
    std::normal_distribution<double> dist(0.0, std);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

Var element(Tape& t, Var v, int r, int c) { return nn::slice_cols(t, nn::slice_rows(t, v, r, 1), c, 1); }

}  // namespace

std::string to_string(OodInput v) {
    switch (v) {
        case OodInput::kBackbone: return "backbone";
        case OodInput::kEncoder: return "encoder";
        case OodInput::kSimilarity: return "similarity";
        case OodInput::kTargetQuery: return "target-query";
    }
    return "backbone";
}

OodInput ood_input_from_string(const std::string& s) {
    if (s == "backbone") return OodInput::kBackbone;
    if (s == "encoder") return OodInput::kEncoder;
    if (s == "similarity") return OodInput::kSimilarity;
    if (s == "target-query") return OodInput::kTargetQuery;
    throw std::invalid_argument("unknown ood input '" + s + "'");
}

std::string to_string(TrainMode m) { return m == TrainMode::kJoint ? "joint" : "two-stage"; }

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "joint") return TrainMode::kJoint;
    if (s == "two-stage") return TrainMode::kTwoStage;
    throw std::invalid_argument("unknown train mode '" + s + "'");
}

void NetConfig::validate() const {
    if (template_update_period < 1) throw std::invalid_argument("template_update_period must be >= 1");
    if (n_classes < 2) throw std::invalid_argument("n_classes must be >= 2");
    if (feature_dim < 1 || ood_hidden < 1) throw std::invalid_argument("feature widths must be positive");
    if (search_size < 8 || search_size % 4 != 0) throw std::invalid_argument("search_size must be a multiple of 4, >= 8");
    if (template_size < 4 || template_size % 4 != 0) {
        throw std::invalid_argument("template_size must be a multiple of 4");
    }
    if (!(search_factor > 0.0) || !(template_factor > 0.0)) throw std::invalid_argument("crop factors must be positive");
    if (loss_weights.giou < 0 || loss_weights.l1 < 0 || loss_weights.bce < 0 || loss_weights.ce < 0) {
        throw std::invalid_argument("loss weights must be non-negative");
    }
}

KeyValues NetConfig::to_kv() const {
    KeyValues kv;
    kv.set("ood_input", to_string(ood_input));
    kv.set("train_mode", to_string(train_mode));
    kv.set("template_update_period", template_update_period);
    kv.set("feature_dim", feature_dim);
    kv.set("n_classes", n_classes);
    kv.set("lambda_giou", loss_weights.giou);
    kv.set("lambda_l1", loss_weights.l1);
    kv.set("lambda_bce", loss_weights.bce);
    kv.set("lambda_ce", loss_weights.ce);
    kv.set("search_size", search_size);
    kv.set("template_size", template_size);
    kv.set("search_factor", search_factor);
    kv.set("template_factor", template_factor);
    kv.set("ood_hidden", ood_hidden);
    return kv;
}

NetConfig NetConfig::from_kv(const KeyValues& kv) {
    NetConfig c;
    auto get_int = [&](const char* k, int& dst) {
        if (kv.contains(k)) dst = static_cast<int>(kv.get_int(k));
    };
    auto get_dbl = [&](const char* k, double& dst) {
        if (kv.contains(k)) dst = kv.get_double(k);
    };
    if (kv.contains("ood_input")) c.ood_input = ood_input_from_string(kv.require("ood_input"));
    if (kv.contains("train_mode")) c.train_mode = train_mode_from_string(kv.require("train_mode"));
    get_int("template_update_period", c.template_update_period);
    get_int("feature_dim", c.feature_dim);
    get_int("n_classes", c.n_classes);
    get_dbl("lambda_giou", c.loss_weights.giou);
    get_dbl("lambda_l1", c.loss_weights.l1);
    get_dbl("lambda_bce", c.loss_weights.bce);
    get_dbl("lambda_ce", c.loss_weights.ce);
    get_int("search_size", c.search_size);
    get_int("template_size", c.template_size);
    get_dbl("search_factor", c.search_factor);
    get_dbl("template_factor", c.template_factor);
    get_int("ood_hidden", c.ood_hidden);
    c.validate();
    return c;
}

Matrix grid_coordinates(int n) {
    Matrix g(n * n, 2);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            g(r * n + c, 0) = (c + 0.5) / n;
            g(r * n + c, 1) = (r + 0.5) / n;
        }
    }
    return g;
}

CropWindow search_window(const BBox& around, const NetConfig& cfg, int frame_w, int frame_h) {
    return context_window(around, cfg.search_factor, frame_w, frame_h, 8.0);
}

CropWindow template_window(const BBox& box, const NetConfig& cfg, int frame_w, int frame_h) {
    return context_window(box, cfg.template_factor, frame_w, frame_h, 4.0);
}

Matrix soft_argmax(const Matrix& probs, const Matrix& grid) { return probs * grid; }

TrackerNet::TrackerNet(NetConfig cfg, std::uint64_t seed) : cfg_(cfg), grid_(grid_coordinates(cfg.search_grid())) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    const int D = cfg_.feature_dim;
    const int F = 2 * D;
    const int K = cfg_.n_classes;
    const int Hd = cfg_.ood_hidden;
    const int tokens = 2 * cfg_.template_grid() * cfg_.template_grid() + cfg_.search_grid() * cfg_.search_grid();

    auto he = [&](int fan_in, int fan_out) { return normal(rng, fan_in, fan_out, std::sqrt(2.0 / fan_in)); };
    auto xavier = [&](int fan_in, int fan_out) { return normal(rng, fan_in, fan_out, std::sqrt(1.0 / fan_in)); };
    auto zeros = [](int n) { return Matrix::Zero(1, n).eval(); };
    auto ones = [](int n) { return Matrix::Ones(1, n).eval(); };

    auto add = [&](const std::string& name, const char* blk, Matrix m) { params_.add(name, blk, std::move(m)); };

    add("conv1.w", block::kBackbone, he(27, kC1));
    add("conv1.b", block::kBackbone, zeros(kC1));
    add("conv2.w", block::kBackbone, he(9 * kC1, kC2));
    add("conv2.b", block::kBackbone, zeros(kC2));
    add("conv3.w", block::kBackbone, he(9 * kC2, D));
    add("conv3.b", block::kBackbone, zeros(D));
    add("proj.w", block::kBackbone, xavier(D, D));
    add("proj.b", block::kBackbone, zeros(D));

    add("pos", block::kTransformer, normal(rng, tokens, D, 0.1));
    auto attn = [&](const std::string& pfx) {
        for (const char* n : {"q", "k", "v", "o"}) {
            add(pfx + "." + n + ".w", block::kTransformer, xavier(D, D));
            add(pfx + "." + n + ".b", block::kTransformer, zeros(D));
        }
    };
    auto ln = [&](const std::string& pfx) {
        add(pfx + ".g", block::kTransformer, ones(D));
        add(pfx + ".b", block::kTransformer, zeros(D));
    };
    auto ffn = [&](const std::string& pfx) {
        add(pfx + ".1.w", block::kTransformer, he(D, F));
        add(pfx + ".1.b", block::kTransformer, zeros(F));
        add(pfx + ".2.w", block::kTransformer, xavier(F, D));
        add(pfx + ".2.b", block::kTransformer, zeros(D));
    };
    attn("enc.attn");
    ln("enc.ln1");
    ffn("enc.ffn");
    ln("enc.ln2");
    add("dec.query", block::kTransformer, normal(rng, 1, D, 1.0));
    attn("dec.attn");
    ln("dec.ln1");
    ffn("dec.ffn");
    ln("dec.ln2");

    add("box1.w", block::kBoxHead, he(9 * D, 32));
    add("box1.b", block::kBoxHead, zeros(32));
    add("box2.w", block::kBoxHead, he(9 * 32, 16));
    add("box2.b", block::kBoxHead, zeros(16));
    add("box3.w", block::kBoxHead, normal(rng, 16, 2, 0.01));
    add("box3.b", block::kBoxHead, zeros(2));

    add("upd1.w", block::kUpdateHead, he(D, 32));
    add("upd1.b", block::kUpdateHead, zeros(32));
    add("upd2.w", block::kUpdateHead, xavier(32, 1));
    add("upd2.b", block::kUpdateHead, zeros(1));

    add("ood1.w", block::kOodHead, he(D, Hd));
    add("ood1.b", block::kOodHead, zeros(Hd));
    add("ood_h.w", block::kOodHead, xavier(Hd, K));
    add("ood_h.b", block::kOodHead, zeros(K));
    add("ood_g.w", block::kOodHead, xavier(Hd, 1));
    add("ood_g.b", block::kOodHead, zeros(1));

    if (params_.size() != kNumParams) throw std::logic_error("parameter table out of sync");
}

Var TrackerNet::linear(Tape& t, Var in, int w_id) const {
    return nn::add_row(t, nn::matmul(t, in, t.param(w_id)), t.param(w_id + 1));
}

Var TrackerNet::conv(Tape& t, Var in, int size, int k, int stride, int w_id, bool relu) const {
    Var cols = k == 1 && stride == 1 ? in : nn::im2col(t, in, size, size, k, stride, k / 2);
    Var out = linear(t, cols, w_id);
    return relu ? nn::relu(t, out) : out;
}

Var TrackerNet::backbone(Tape& t, Var img, int size) const {
    Var a = conv(t, img, size, 3, 1, kC1W, true);
    Var b = conv(t, a, size, 3, 2, kC2W, true);
    return conv(t, b, size / 2, 3, 2, kC3W, true);
}

Var TrackerNet::attention(Tape& t, Var q_in, Var kv_in, int base) const {
    Var q = linear(t, q_in, base);
    Var k = linear(t, kv_in, base + 2);
    Var v = linear(t, kv_in, base + 4);
    Var scores = nn::scale(t, nn::matmul_t(t, q, k), 1.0 / std::sqrt(static_cast<double>(cfg_.feature_dim)));
    Var mixed = nn::matmul(t, nn::softmax_rows(t, scores), v);
    return linear(t, mixed, base + 6);
}

Var TrackerNet::ffn_block(Tape& t, Var in, int base) const {
    return linear(t, nn::relu(t, linear(t, in, base)), base + 2);
}

Var TrackerNet::template_tokens(Tape& t, Var z) const {
    if (t.value(z).rows() != cfg_.template_size * cfg_.template_size || t.value(z).cols() != 3) {
        throw std::invalid_argument("template crop has the wrong size");
    }
    return linear(t, backbone(t, z, cfg_.template_size), kProjW);
}

OodHeadVars TrackerNet::ood_head(Tape& t, Var feature) const {
    Var hidden = nn::relu(t, linear(t, feature, kO1W));
    Var unit = nn::l2_normalize_rows(t, hidden);
    Var h = nn::matmul_t(t, unit, nn::l2_normalize_rows(t, nn::transpose(t, t.param(kO2W))));
    Var g = nn::clamp_min(t, nn::sigmoid(t, linear(t, unit, kOgW)), kGFloor);
    Var f = nn::div_scalar(t, h, g);
    return {h, g, f};
}

ForwardVars TrackerNet::forward(Tape& t, Var init_tokens, Var dyn_tokens, Var x) const {
    const int S = cfg_.search_size;
    const int n_tmpl = cfg_.template_grid() * cfg_.template_grid();
    const int n_search = cfg_.search_grid() * cfg_.search_grid();
    if (t.value(x).rows() != S * S || t.value(x).cols() != 3) throw std::invalid_argument("search crop has the wrong size");
    if (t.value(init_tokens).rows() != n_tmpl || t.value(dyn_tokens).rows() != n_tmpl) {
        throw std::invalid_argument("template tokens have the wrong size");
    }

    Var fx = backbone(t, x, S);
    Var x_tokens = linear(t, fx, kProjW);
    const Var parts[] = {init_tokens, dyn_tokens, x_tokens};
    Var tokens = nn::add(t, nn::concat_rows(t, parts), t.param(kPos));

    Var e1 = nn::layer_norm(t, nn::add(t, tokens, attention(t, tokens, tokens, kEncAttn)), t.param(kEncLn1G),
                            t.param(kEncLn1B));
    Var memory = nn::layer_norm(t, nn::add(t, e1, ffn_block(t, e1, kEncFfn)), t.param(kEncLn2G), t.param(kEncLn2B));
    Var ex = nn::slice_rows(t, memory, 2 * n_tmpl, n_search);

    Var query = t.param(kQuery);
    Var d1 = nn::layer_norm(t, nn::add(t, query, attention(t, query, memory, kDecAttn)), t.param(kDecLn1G),
                            t.param(kDecLn1B));
    Var ftq = nn::layer_norm(t, nn::add(t, d1, ffn_block(t, d1, kDecFfn)), t.param(kDecLn2G), t.param(kDecLn2B));

    ForwardVars out;
    out.similarity =
        nn::scale(t, nn::matmul_t(t, ex, ftq), 1.0 / std::sqrt(static_cast<double>(cfg_.feature_dim)));
    Var opt = nn::mul_col(t, ex, out.similarity);

    const int G = cfg_.search_grid();
    Var b1 = conv(t, opt, G, 3, 1, kB1W, true);
    Var b2 = conv(t, b1, G, 3, 1, kB2W, true);
    Var corner_logits = nn::transpose(t, conv(t, b2, G, 1, 1, kB3W, false));
    out.corners = nn::matmul(t, nn::softmax_rows(t, corner_logits), t.constant(grid_));

    out.update_logit = linear(t, nn::relu(t, linear(t, ftq, kU1W)), kU2W);

    switch (cfg_.ood_input) {
        case OodInput::kBackbone: out.ood_feature = nn::mean_rows(t, fx); break;
        case OodInput::kEncoder: out.ood_feature = nn::mean_rows(t, ex); break;
        case OodInput::kSimilarity: out.ood_feature = nn::mean_rows(t, opt); break;
        case OodInput::kTargetQuery: out.ood_feature = ftq; break;
    }
    const OodHeadVars head = ood_head(t, out.ood_feature);
    out.h = head.h;
    out.g = head.g;
    out.f = head.f;
    return out;
}

Tape TrackerNet::inference_tape() const {
    return Tape(&params_, std::vector<bool>(static_cast<std::size_t>(params_.size()), false));
}

Matrix TrackerNet::template_features(const Matrix& z) const {
    Tape t = inference_tape();
    return t.value(template_tokens(t, t.constant(z)));
}

StepOutput TrackerNet::infer(const Matrix& init_tokens, const Matrix& dyn_tokens, const Matrix& x) const {
    Tape t = inference_tape();
    const ForwardVars v = forward(t, t.constant(init_tokens), t.constant(dyn_tokens), t.constant(x));
    StepOutput out;
    const Matrix& c = t.value(v.corners);
    out.bbox = BBox::from_corners(c(0, 0), c(0, 1), c(1, 0), c(1, 1));
    const double z = t.value(v.update_logit)(0, 0);
    out.update_score = 1.0 / (1.0 + std::exp(-z));
    const Matrix& h = t.value(v.h);
    const Matrix& f = t.value(v.f);
    out.ood_h.assign(h.data(), h.data() + h.size());
    out.ood_f.assign(f.data(), f.data() + f.size());
    out.ood_g = t.value(v.g)(0, 0);
    return out;
}

LossTerms compute_losses(Tape& t, const ForwardVars& out, const BBox& gt, bool visible, int class_index,
                         const LossWeights& w, LossSelection sel) {
    if (visible && gt.is_exit()) throw InvalidSequenceError("EXIT ground truth on a frame labelled visible");
    LossTerms terms;
    std::vector<Var> parts;

    if (sel.bbox && visible) {
        Matrix target(2, 2);
        target << gt.x, gt.y, gt.right(), gt.bottom();
        Var tc = t.constant(target);
        Var l1 = nn::mean(t, nn::abs(t, nn::sub(t, out.corners, tc)));

        Var px1 = element(t, out.corners, 0, 0), py1 = element(t, out.corners, 0, 1);
        Var px2 = element(t, out.corners, 1, 0), py2 = element(t, out.corners, 1, 1);
        Var tx1 = element(t, tc, 0, 0), ty1 = element(t, tc, 0, 1);
        Var tx2 = element(t, tc, 1, 0), ty2 = element(t, tc, 1, 1);
        constexpr double kEps = 1e-7;
        Var pw = nn::clamp_min(t, nn::sub(t, px2, px1), 0.0);
        Var ph = nn::clamp_min(t, nn::sub(t, py2, py1), 0.0);
        Var iw = nn::clamp_min(t, nn::sub(t, nn::minimum(t, px2, tx2), nn::maximum(t, px1, tx1)), 0.0);
        Var ih = nn::clamp_min(t, nn::sub(t, nn::minimum(t, py2, ty2), nn::maximum(t, py1, ty1)), 0.0);
        Var inter = nn::mul(t, iw, ih);
        Var uni = nn::add_const(t, nn::sub(t, nn::add(t, nn::mul(t, pw, ph), t.constant(Matrix::Constant(1, 1, gt.area()))), inter),
                                kEps);
        Var hw = nn::sub(t, nn::maximum(t, px2, tx2), nn::minimum(t, px1, tx1));
        Var hh = nn::sub(t, nn::maximum(t, py2, ty2), nn::minimum(t, py1, ty1));
        Var hull = nn::add_const(t, nn::mul(t, nn::clamp_min(t, hw, 0.0), nn::clamp_min(t, hh, 0.0)), kEps);
        Var iou_v = nn::div(t, inter, uni);
        Var giou_v = nn::sub(t, iou_v, nn::div(t, nn::sub(t, hull, uni), hull));
        Var giou_loss = nn::add_const(t, nn::scale(t, giou_v, -1.0), 1.0);

        terms.giou_loss = t.value(giou_loss)(0, 0);
        terms.l1 = t.value(l1)(0, 0);
        parts.push_back(nn::scale(t, giou_loss, w.giou));
        parts.push_back(nn::scale(t, l1, w.l1));
    }
    if (sel.update) {
        Var bce = nn::bce_with_logits(t, out.update_logit, visible ? 1.0 : 0.0);
        terms.bce = t.value(bce)(0, 0);
        parts.push_back(nn::scale(t, bce, w.bce));
    }
    if (sel.ood && visible) {
        Var ce = nn::cross_entropy(t, out.f, class_index);
        terms.ce = t.value(ce)(0, 0);
        parts.push_back(nn::scale(t, ce, w.ce));
    }

    if (parts.empty()) {
        terms.total = t.constant(Matrix::Zero(1, 1));
        return terms;
    }
    Var total = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) total = nn::add(t, total, parts[i]);
    terms.total = total;
    return terms;
}

}  // namespace exitrack
