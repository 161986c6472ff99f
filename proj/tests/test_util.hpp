#pragma once

#include <random>

#include "exitrack/conveyor.hpp"
#include "exitrack/tracker_net.hpp"

namespace exitrack::testing_util {

inline NetConfig small_config(OodInput in = OodInput::kBackbone) {
    NetConfig c;
    c.feature_dim = 16;
    c.ood_hidden = 12;
    c.n_classes = 4;
    c.ood_input = in;
    return c;
}

inline Matrix random_crop(int side, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix m(side * side, 3);
    for (int i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

// Network inputs cut from a rendered scene, so the tests see realistic pixel statistics.
struct Inputs {
    Matrix z0;
    Matrix z1;
    Matrix x;
    BBox gt;  // normalized search coordinates
};

inline Inputs scene_inputs(const NetConfig& cfg, std::uint64_t seed, int frame = 6) {
    SceneSpec s;
    s.seed = seed;
    s.n_frames = frame + 1;
    const Sequence seq = generate(s);
    const BBox b0 = seq.annotations[0];
    const BBox bt = seq.annotations[static_cast<std::size_t>(frame)];
    const CropWindow zw = template_window(b0, cfg, s.frame_width, s.frame_height);
    const CropWindow xw = search_window(BBox{b0.x + 1.5, b0.y - 1.0, b0.w, b0.h}, cfg, s.frame_width, s.frame_height);
    Inputs in;
    in.z0 = crop_to_tensor(seq.frames[0], zw, cfg.template_size);
    in.z1 = in.z0;
    in.x = crop_to_tensor(seq.frames[static_cast<std::size_t>(frame)], xw, cfg.search_size);
    in.gt = frame_to_crop(bt, xw);
    return in;
}

}  // namespace exitrack::testing_util
