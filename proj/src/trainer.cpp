#include "exitrack/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "exitrack/conveyor.hpp"
#include "exitrack/errors.hpp"
#include "exitrack/nn/adam.hpp"

namespace exitrack {
namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int label_index(const Sequence& seq, int n_classes) {
    const int idx = class_index(seq.class_label);
    if (idx < 0 || idx >= n_classes) {
        throw std::invalid_argument("sequence " + seq.id + ": class '" + seq.class_label + "' outside the class inventory");
    }
    return idx;
}

struct Totals {
    double loss = 0, giou = 0, l1 = 0, bce = 0, ce = 0;
    int n = 0;
    int n_visible = 0;
};

LossSelection selection_for(const std::string& stage) {
    if (stage == "stage1") return {true, false, false};
    if (stage == "stage2") return {false, true, true};
    return {};
}

std::string diagnostics(const std::string& stage, int epoch, int step, const LossTerms& t, double loss) {
    std::ostringstream os;
    os << "non-finite value in " << stage << " epoch " << epoch << " step " << step << ": loss=" << loss
       << " giou=" << t.giou_loss << " l1=" << t.l1 << " bce=" << t.bce << " ce=" << t.ce;
    return os.str();
}

double validation_loss(const TrackerNet& net, const std::vector<TrainingSample>& samples, LossSelection sel) {
    if (samples.empty()) return 0.0;
    double total = 0.0;
    for (const auto& s : samples) {
        nn::Tape t = net.inference_tape();
        const ForwardVars out = net.forward(t, t.constant(net.template_features(s.init_template)),
                                            t.constant(net.template_features(s.dyn_template)), t.constant(s.search));
        total += t.value(compute_losses(t, out, s.gt, s.visible, s.class_index, net.config().loss_weights, sel).total)(0, 0);
    }
    return total / static_cast<double>(samples.size());
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 0 || stage2_epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (samples_per_epoch < 1 || batch_size < 1) throw std::invalid_argument("samples_per_epoch and batch_size must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
    if (weight_decay < 0.0 || grad_clip < 0.0) throw std::invalid_argument("weight_decay and grad_clip must be >= 0");
    if (center_jitter < 0.0 || scale_jitter < 0.0) throw std::invalid_argument("jitter must be >= 0");
    if (max_template_gap < 0 || val_samples < 0) throw std::invalid_argument("max_template_gap and val_samples must be >= 0");
}

KeyValues TrainConfig::to_kv() const {
    KeyValues kv;
    kv.set("epochs", epochs);
    kv.set("stage2_epochs", stage2_epochs);
    kv.set("samples_per_epoch", samples_per_epoch);
    kv.set("batch_size", batch_size);
    kv.set("lr", lr);
    kv.set("weight_decay", weight_decay);
    kv.set("grad_clip", grad_clip);
    kv.set("center_jitter", center_jitter);
    kv.set("scale_jitter", scale_jitter);
    kv.set("max_template_gap", max_template_gap);
    kv.set("val_samples", val_samples);
    kv.set("train_seed", static_cast<std::int64_t>(seed));
    return kv;
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv) {
    TrainConfig c;
    auto i = [&](const char* k, int& d) {
        if (kv.contains(k)) d = static_cast<int>(kv.get_int(k));
    };
    auto f = [&](const char* k, double& d) {
        if (kv.contains(k)) d = kv.get_double(k);
    };
    i("epochs", c.epochs);
    i("stage2_epochs", c.stage2_epochs);
    i("samples_per_epoch", c.samples_per_epoch);
    i("batch_size", c.batch_size);
    f("lr", c.lr);
    f("weight_decay", c.weight_decay);
    f("grad_clip", c.grad_clip);
    f("center_jitter", c.center_jitter);
    f("scale_jitter", c.scale_jitter);
    i("max_template_gap", c.max_template_gap);
    i("val_samples", c.val_samples);
    if (kv.contains("train_seed")) c.seed = static_cast<std::uint64_t>(kv.get_int("train_seed"));
    c.validate();
    return c;
}

std::string format_epoch_log(const EpochLog& e) {
    std::ostringstream os;
    os << "stage=" << e.stage << " epoch=" << e.epoch << " loss=" << format_double(e.loss)
       << " giou=" << format_double(e.giou) << " l1=" << format_double(e.l1) << " bce=" << format_double(e.bce)
       << " ce=" << format_double(e.ce) << " val_loss=" << format_double(e.val_loss)
       << " seconds=" << format_double(std::round(e.seconds * 1000.0) / 1000.0);
    return os.str();
}

std::vector<bool> trainable_mask(const nn::ParameterSet& params, const std::string& stage) {
    std::vector<bool> mask(static_cast<std::size_t>(params.size()), true);
    if (stage != "stage2") return mask;
    for (int i = 0; i < params.size(); ++i) {
        const std::string& b = params.block(i);
        mask[static_cast<std::size_t>(i)] = b == block::kUpdateHead || b == block::kOodHead;
    }
    return mask;
}

TrainingSample draw_sample(std::span<const Sequence> seqs, const NetConfig& net, const TrainConfig& cfg,
                           std::mt19937_64& rng) {
    const Sequence& seq = seqs[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(seqs.size()) - 1))];
    if (seq.frames.size() != seq.size() || seq.size() == 0) {
        throw InvalidSequenceError("sequence " + seq.id + " has no frames loaded");
    }
    const int n = static_cast<int>(seq.size());
    const int c = uniform_int(rng, 0, n - 1);

    // Templates come from visible frames at or before the search frame.
    auto last_visible_at_or_before = [&](int i) {
        while (i > 0 && !seq.visible(static_cast<std::size_t>(i))) --i;
        return i;
    };
    const int a = last_visible_at_or_before(uniform_int(rng, 0, c));
    const int b = last_visible_at_or_before(uniform_int(rng, std::max(0, c - cfg.max_template_gap), c));
    const int anchor = last_visible_at_or_before(c);

    const Image& search_img = seq.frames[static_cast<std::size_t>(c)];
    const int W = search_img.width();
    const int H = search_img.height();

    TrainingSample s;
    const BBox& za = seq.annotations[static_cast<std::size_t>(a)];
    const BBox& zb = seq.annotations[static_cast<std::size_t>(b)];
    s.init_template = crop_to_tensor(seq.frames[static_cast<std::size_t>(a)], template_window(za, net, W, H),
                                     net.template_size);
    s.dyn_template = crop_to_tensor(seq.frames[static_cast<std::size_t>(b)], template_window(zb, net, W, H),
                                    net.template_size);

    const BBox& ref = seq.annotations[static_cast<std::size_t>(anchor)];
    const double size = std::max(ref.w, ref.h);
    BBox around = ref;
    around.x += uniform(rng, -cfg.center_jitter, cfg.center_jitter) * size;
    around.y += uniform(rng, -cfg.center_jitter, cfg.center_jitter) * size;
    const double k = std::exp(uniform(rng, -cfg.scale_jitter, cfg.scale_jitter));
    around.x -= 0.5 * (k - 1.0) * around.w;
    around.y -= 0.5 * (k - 1.0) * around.h;
    around.w *= k;
    around.h *= k;
    const CropWindow win = search_window(around, net, W, H);
    s.search = crop_to_tensor(search_img, win, net.search_size);

    s.visible = seq.visible(static_cast<std::size_t>(c));
    s.gt = s.visible ? frame_to_crop(seq.annotations[static_cast<std::size_t>(c)], win) : BBox::exit();
    s.class_index = label_index(seq, net.n_classes);
    return s;
}

std::vector<EpochLog> train(TrackerNet& net, const TrainConfig& cfg, std::span<const Sequence> train_seqs,
                            std::span<const Sequence> val_seqs, const std::function<void(const EpochLog&)>& on_epoch) {
    cfg.validate();
    for (const auto& s : train_seqs) {
        if (s.has_exit()) throw InvalidSequenceError("training sequence " + s.id + " contains exit frames");
    }
    std::vector<EpochLog> log;
    const bool any_epochs = cfg.epochs > 0 || (net.config().train_mode == TrainMode::kTwoStage && cfg.stage2_epochs > 0);
    if (!any_epochs) return log;
    if (train_seqs.empty()) throw std::invalid_argument("no training sequences");

    std::mt19937_64 rng(cfg.seed);
    std::vector<TrainingSample> val;
    if (!val_seqs.empty()) {
        std::mt19937_64 vrng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
        for (int i = 0; i < cfg.val_samples; ++i) val.push_back(draw_sample(val_seqs, net.config(), cfg, vrng));
    }

    std::vector<std::pair<std::string, int>> stages;
    if (net.config().train_mode == TrainMode::kJoint) {
        stages.emplace_back("joint", cfg.epochs);
    } else {
        stages.emplace_back("stage1", cfg.epochs);
        stages.emplace_back("stage2", cfg.stage2_epochs);
    }

    auto& params = net.params();
    for (const auto& [stage, n_epochs] : stages) {
        const std::vector<bool> mask = trainable_mask(params, stage);
        const LossSelection sel = selection_for(stage);
        nn::Adam adam(params, {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
        int step = 0;
        for (int epoch = 1; epoch <= n_epochs; ++epoch) {
            const auto t0 = std::chrono::steady_clock::now();
            Totals tot;
            int done = 0;
            while (done < cfg.samples_per_epoch) {
                const int bs = std::min(cfg.batch_size, cfg.samples_per_epoch - done);
                nn::Gradients grads = params.zero_gradients();
                for (int k = 0; k < bs; ++k) {
                    const TrainingSample s = draw_sample(train_seqs, net.config(), cfg, rng);
                    nn::Tape t(&params, mask);
                    const ForwardVars out = net.forward(t, net.template_tokens(t, t.constant(s.init_template)),
                                                        net.template_tokens(t, t.constant(s.dyn_template)),
                                                        t.constant(s.search));
                    const LossTerms lt =
                        compute_losses(t, out, s.gt, s.visible, s.class_index, net.config().loss_weights, sel);
                    const double loss = t.value(lt.total)(0, 0);
                    if (!std::isfinite(loss)) throw DivergenceError(diagnostics(stage, epoch, step, lt, loss));
                    t.backward(lt.total);
                    t.accumulate_param_grads(grads);
                    tot.loss += loss;
                    tot.bce += lt.bce;
                    if (s.visible) {
                        tot.giou += lt.giou_loss;
                        tot.l1 += lt.l1;
                        tot.ce += lt.ce;
                        ++tot.n_visible;
                    }
                    ++tot.n;
                }
                for (auto& g : grads) g /= static_cast<double>(bs);
                const double norm = nn::global_norm(grads);
                if (!std::isfinite(norm)) {
                    throw DivergenceError("non-finite gradient norm in " + stage + " epoch " + std::to_string(epoch) +
                                          " step " + std::to_string(step));
                }
                if (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) {
                    for (auto& g : grads) g *= cfg.grad_clip / norm;
                }
                adam.step(params, grads, mask);
                ++step;
                done += bs;
            }
            EpochLog e;
            e.stage = stage;
            e.epoch = epoch;
            e.loss = tot.loss / tot.n;
            e.bce = tot.bce / tot.n;
            if (tot.n_visible > 0) {
                e.giou = tot.giou / tot.n_visible;
                e.l1 = tot.l1 / tot.n_visible;
                e.ce = tot.ce / tot.n_visible;
            }
            e.val_loss = validation_loss(net, val, sel);
            e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            log.push_back(e);
            if (on_epoch) on_epoch(e);
        }
    }
    return log;
}

}  // namespace exitrack
