#include "exitrack/tracker.hpp"

#include <algorithm>
#include <stdexcept>

#include "exitrack/errors.hpp"

namespace exitrack {

TrackerState TrackerState::init(const TrackerNet& net, const Image& frame, const BBox& box) {
    if (box.is_exit()) throw InvalidSequenceError("cannot initialize tracking on an EXIT box");
    TrackerState s;
    const auto& cfg = net.config();
    s.initial_template =
        crop_to_tensor(frame, template_window(box, cfg, frame.width(), frame.height()), cfg.template_size);
    s.dynamic_template = s.initial_template;
    s.initial_tokens = net.template_features(s.initial_template);
    s.dynamic_tokens = s.initial_tokens;
    s.last_box = box;
    s.initialized = true;
    return s;
}

BBox to_frame_box(const BBox& normalized, const CropWindow& window) {
    const double x1 = std::min(normalized.x, normalized.right());
    const double x2 = std::max(normalized.x, normalized.right());
    const double y1 = std::min(normalized.y, normalized.bottom());
    const double y2 = std::max(normalized.y, normalized.bottom());
    BBox b = crop_to_frame(BBox::from_corners(x1, y1, x2, y2), window);
    if (b.w < 1.0) {
        b.x -= 0.5 * (1.0 - b.w);
        b.w = 1.0;
    }
    if (b.h < 1.0) {
        b.y -= 0.5 * (1.0 - b.h);
        b.h = 1.0;
    }
    return b;
}

bool should_update_template(std::size_t frame, int period, double update_score, bool flagged) {
    if (period < 1) throw std::invalid_argument("template update period must be >= 1");
    return frame > 0 && frame % static_cast<std::size_t>(period) == 0 && update_score > 0.5 && !flagged;
}

TrackResult track_sequence(const TrackerNet& net, const Sequence& seq, FrameDecider* decider, bool keep_crops) {
    validate(seq);
    if (seq.frames.size() != seq.size()) throw InvalidSequenceError("sequence " + seq.id + " has no frames loaded");
    const auto& cfg = net.config();
    const std::size_t n = seq.size();
    TrackerState state = TrackerState::init(net, seq.frames[0], seq.annotations[0]);
    if (decider) decider->reset();

    TrackResult r;
    if (keep_crops) r.initial_tokens = state.initial_tokens;
    r.steps.reserve(n);
    r.boxes.reserve(n);
    r.raw_boxes.reserve(n);
    r.flagged.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        const Image& frame = seq.frames[t];
        const CropWindow win = search_window(state.last_box, cfg, frame.width(), frame.height());
        Matrix x = crop_to_tensor(frame, win, cfg.search_size);
        StepOutput out = net.infer(state.initial_tokens, state.dynamic_tokens, x);
        Matrix used_tokens;
        if (keep_crops) used_tokens = state.dynamic_tokens;
        const BBox pred = t == 0 ? seq.annotations[0] : to_frame_box(out.bbox, win);

        bool flag = false;
        if (decider) {
            FrameContext ctx{t, &state, &x, &out, seq.visible(t)};
            flag = decider->decide(net, ctx);
        }

        r.raw_boxes.push_back(pred);
        r.boxes.push_back(flag ? BBox::exit() : pred);
        r.flagged.push_back(flag);
        if (!flag) state.last_box = pred;

        if (should_update_template(t, cfg.template_update_period, out.update_score, flag)) {
            state.dynamic_template =
                crop_to_tensor(frame, template_window(pred, cfg, frame.width(), frame.height()), cfg.template_size);
            state.dynamic_tokens = net.template_features(state.dynamic_template);
            r.template_updates.push_back(t);
        }
        r.steps.push_back(std::move(out));
        if (keep_crops) {
            r.search_crops.push_back(std::move(x));
            r.dynamic_tokens.push_back(used_tokens);
        }
        state.step = t + 1;
    }
    return r;
}

}  // namespace exitrack
