#include "exitrack/conveyor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace exitrack {
namespace {

constexpr std::array<Shape, 4> kShapes{Shape::kCircle, Shape::kSquare, Shape::kTriangle,
                                       Shape::kDiamond};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE5E4B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Point (u, v) in the object's local box [0, s]^2.
bool inside_shape(Shape shape, double u, double v, double s) {
    if (u < 0.0 || v < 0.0 || u >= s || v >= s) return false;
    const double r = 0.5 * s;
    const double du = u - r;
    const double dv = v - r;
    switch (shape) {
        case Shape::kCircle:
            return du * du + dv * dv <= r * r;
        case Shape::kSquare:
            return true;
        case Shape::kTriangle:
            return std::abs(du) <= 0.5 * v;
        case Shape::kDiamond:
            return std::abs(du) + std::abs(dv) <= r;
    }
    return false;
}

struct Object {
    Shape shape;
    Rgb color;
    double x0;
    double y0;
    double size;
    bool is_target;
};

Rgb scale(Rgb c, double f) {
    auto ch = [f](std::uint8_t v) {
        return static_cast<std::uint8_t>(std::clamp(std::lround(v * f), 0L, 255L));
    };
    return {ch(c.r), ch(c.g), ch(c.b)};
}

std::string window_list(const std::vector<ExitWindow>& ws) {
    std::string out;
    for (const auto& w : ws) {
        if (!out.empty()) out += ';';
        out += std::to_string(w.start) + "-" + std::to_string(w.end);
    }
    return out;
}

std::vector<ExitWindow> parse_window_list(const std::string& text) {
    std::vector<ExitWindow> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find(';', pos);
        if (end == std::string::npos) end = text.size();
        const std::string item = text.substr(pos, end - pos);
        const auto dash = item.find('-');
        const auto a = dash == std::string::npos ? std::nullopt : parse_int(item.substr(0, dash));
        const auto b = dash == std::string::npos ? std::nullopt : parse_int(item.substr(dash + 1));
        if (!a || !b) throw std::invalid_argument("bad exit window '" + item + "'");
        out.push_back({static_cast<int>(*a), static_cast<int>(*b)});
        pos = end + 1;
    }
    return out;
}

}  // namespace

std::string to_string(Shape s) {
    switch (s) {
        case Shape::kCircle: return "circle";
        case Shape::kSquare: return "square";
        case Shape::kTriangle: return "triangle";
        case Shape::kDiamond: return "diamond";
    }
    return "circle";
}

Shape shape_from_string(const std::string& s) {
    for (auto sh : kShapes) {
        if (to_string(sh) == s) return sh;
    }
    throw std::invalid_argument("unknown shape '" + s + "'");
}

const std::vector<std::string>& target_colors() {
    static const std::vector<std::string> colors{"red", "blue"};
    return colors;
}

const std::vector<std::string>& distractor_colors() {
    static const std::vector<std::string> colors{"yellow", "green", "white"};
    return colors;
}

Rgb color_value(const std::string& name) {
    if (name == "red") return {215, 45, 40};
    if (name == "blue") return {40, 75, 215};
    if (name == "yellow") return {225, 200, 45};
    if (name == "green") return {55, 170, 70};
    if (name == "white") return {230, 230, 225};
    throw std::invalid_argument("unknown colour '" + name + "'");
}

const std::vector<std::string>& class_inventory() {
    static const std::vector<std::string> inventory = [] {
        std::vector<std::string> v;
        for (const auto& c : target_colors()) {
            for (auto s : kShapes) v.push_back(class_label(s, c));
        }
        return v;
    }();
    return inventory;
}

int class_index(const std::string& label) {
    const auto& inv = class_inventory();
    const auto it = std::find(inv.begin(), inv.end(), label);
    if (it == inv.end()) throw std::invalid_argument("unknown class label '" + label + "'");
    return static_cast<int>(it - inv.begin());
}

std::string class_label(Shape shape, const std::string& color) {
    return color + "_" + to_string(shape);
}

void SceneSpec::validate() const {
    auto fail = [this](const std::string& what) {
        throw std::invalid_argument("scene '" + id + "': " + what);
    };
    if (frame_width <= 0 || frame_height <= 0) fail("frame size must be positive");
    if (n_frames < 1) fail("n_frames must be >= 1");
    if (!(belt_speed >= 0.0) || !std::isfinite(belt_speed)) fail("belt_speed must be >= 0");
    if (n_distractors < 0) fail("n_distractors must be >= 0");
    if (!(target_size > 0.0)) fail("target_size must be positive");
    if (!(camera_jitter >= 0.0)) fail("camera_jitter must be >= 0");
    if (std::find(target_colors().begin(), target_colors().end(), target_color) ==
        target_colors().end()) {
        fail("target_color must be one of the target palette");
    }
    int prev_end = 0;
    for (const auto& w : exit_windows) {
        if (w.start < 0 || w.end > n_frames || w.start >= w.end) fail("exit window out of range");
        if (w.start < prev_end) fail("exit windows must be sorted and disjoint");
        if (w.start == 0) fail("frame 0 may not be inside an exit window");
        prev_end = w.end;
    }
    const bool visible_at_start = target_x0 + target_size > 0.0 && target_x0 < frame_width &&
                                  target_y0 + target_size > 0.0 && target_y0 < frame_height;
    if (!visible_at_start) fail("target must be inside the frame at frame 0");
}

bool SceneSpec::in_exit_window(int frame) const {
    return std::any_of(exit_windows.begin(), exit_windows.end(),
                       [frame](const ExitWindow& w) { return frame >= w.start && frame < w.end; });
}

KeyValues SceneSpec::to_kv() const {
    KeyValues kv;
    kv.set("id", id);
    kv.set("seed", std::to_string(seed));
    kv.set("frame_width", frame_width);
    kv.set("frame_height", frame_height);
    kv.set("n_frames", n_frames);
    kv.set("belt_speed", belt_speed);
    kv.set("n_distractors", n_distractors);
    kv.set("target_shape", to_string(target_shape));
    kv.set("target_color", target_color);
    kv.set("target_size", target_size);
    kv.set("target_x0", target_x0);
    kv.set("target_y0", target_y0);
    kv.set("exit_windows", window_list(exit_windows));
    kv.set("camera_jitter", camera_jitter);
    return kv;
}

SceneSpec SceneSpec::from_kv(const KeyValues& kv) {
    SceneSpec s;
    s.id = kv.get("id").value_or(s.id);
    if (auto v = kv.get("seed")) {
        try {
            s.seed = std::stoull(*v);
        } catch (const std::exception&) {
            throw std::invalid_argument("seed: not an unsigned integer: " + *v);
        }
    }
    auto geti = [&](const char* k, int& out) {
        if (kv.contains(k)) out = static_cast<int>(kv.get_int(k));
    };
    auto getd = [&](const char* k, double& out) {
        if (kv.contains(k)) out = kv.get_double(k);
    };
    geti("frame_width", s.frame_width);
    geti("frame_height", s.frame_height);
    geti("n_frames", s.n_frames);
    getd("belt_speed", s.belt_speed);
    geti("n_distractors", s.n_distractors);
    if (auto v = kv.get("target_shape")) s.target_shape = shape_from_string(*v);
    s.target_color = kv.get("target_color").value_or(s.target_color);
    getd("target_size", s.target_size);
    getd("target_x0", s.target_x0);
    getd("target_y0", s.target_y0);
    if (auto v = kv.get("exit_windows")) s.exit_windows = parse_window_list(*v);
    getd("camera_jitter", s.camera_jitter);
    s.validate();
    return s;
}

Sequence generate(const SceneSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 2.5);

    const int W = spec.frame_width;
    const int H = spec.frame_height;
    const double belt_top = 0.25 * H;
    const double belt_bottom = 0.75 * H;
    const double v = spec.belt_speed;
    const double T = spec.n_frames;

    std::vector<Object> objects;
    objects.push_back({spec.target_shape, color_value(spec.target_color), spec.target_x0,
                       spec.target_y0, spec.target_size, true});

    // Distractors occupy other belt slots that pass through the view at some point.
    const double pitch = 19.0;
    std::vector<int> slots;
    for (int k = -12; k <= 12; ++k) {
        if (k == 0) continue;
        const double x = spec.target_x0 + k * pitch;
        if (x + v * T > -pitch && x < W + pitch) slots.push_back(k);
    }
    std::shuffle(slots.begin(), slots.end(), rng);
    const auto n_d = std::min<std::size_t>(static_cast<std::size_t>(spec.n_distractors), slots.size());
    const auto& dcolors = distractor_colors();
    for (std::size_t i = 0; i < n_d; ++i) {
        const auto shape = kShapes[static_cast<std::size_t>(unit(rng) * kShapes.size()) % kShapes.size()];
        const auto& cname = dcolors[static_cast<std::size_t>(unit(rng) * dcolors.size()) % dcolors.size()];
        const double size = 9.0 + 5.0 * unit(rng);
        const double x = spec.target_x0 + slots[i] * pitch + (unit(rng) - 0.5) * 4.0;
        const double y = 0.5 * (belt_top + belt_bottom) - 0.5 * size + (unit(rng) - 0.5) * 6.0;
        objects.push_back({shape, scale(color_value(cname), 0.9 + 0.2 * unit(rng)), x, y, size, false});
    }

    const std::uint64_t texture_seed = splitmix64(spec.seed ^ 0x5EEDULL);
    auto background = [&](double wx, double wy, int t) -> std::array<double, 3> {
        if (wy >= belt_top && wy < belt_bottom) {
            if (wy < belt_top + 1.0 || wy >= belt_bottom - 1.0) return {45, 45, 50};
            const double u = wx - v * t;
            const double m = u - 8.0 * std::floor(u / 8.0);
            if (m < 1.5) return {92, 92, 98};
            return {72, 72, 78};
        }
        const auto bx = static_cast<std::int64_t>(std::floor(wx / 4.0));
        const auto by = static_cast<std::int64_t>(std::floor(wy / 4.0));
        const auto hsh = splitmix64(texture_seed ^ static_cast<std::uint64_t>(bx * 73856093LL) ^
                                    static_cast<std::uint64_t>(by * 19349663LL));
        const double d = static_cast<double>(hsh % 21) - 10.0;
        return {118 + d, 86 + d, 58 + d};
    };

    Sequence seq;
    seq.id = spec.id;
    seq.class_label = class_label(spec.target_shape, spec.target_color);
    seq.frames.reserve(static_cast<std::size_t>(spec.n_frames));
    seq.annotations.reserve(static_cast<std::size_t>(spec.n_frames));

    constexpr int kSub = 3;
    for (int t = 0; t < spec.n_frames; ++t) {
        const double jx = spec.camera_jitter * jitter(rng);
        const double jy = spec.camera_jitter * jitter(rng);
        const bool target_present = !spec.in_exit_window(t);

        Image frame(W, H);
        for (int py = 0; py < H; ++py) {
            for (int px = 0; px < W; ++px) {
                std::array<double, 3> acc{0.0, 0.0, 0.0};
                for (int sy = 0; sy < kSub; ++sy) {
                    for (int sx = 0; sx < kSub; ++sx) {
                        const double wx = px + (sx + 0.5) / kSub - jx;
                        const double wy = py + (sy + 0.5) / kSub - jy;
                        std::array<double, 3> c = background(wx, wy, t);
                        for (const auto& o : objects) {
                            if (o.is_target && !target_present) continue;
                            const double ox = o.x0 + v * t;
                            if (inside_shape(o.shape, wx - ox, wy - o.y0, o.size)) {
                                c = {static_cast<double>(o.color.r), static_cast<double>(o.color.g),
                                     static_cast<double>(o.color.b)};
                                break;
                            }
                        }
                        for (int k = 0; k < 3; ++k) acc[k] += c[k];
                    }
                }
                Rgb out;
                std::array<std::uint8_t*, 3> ch{&out.r, &out.g, &out.b};
                for (int k = 0; k < 3; ++k) {
                    const double val = acc[k] / (kSub * kSub) + noise(rng);
                    *ch[k] = static_cast<std::uint8_t>(std::clamp(std::lround(val), 0L, 255L));
                }
                frame.set(px, py, out);
            }
        }
        seq.frames.push_back(std::move(frame));

        const BBox box{spec.target_x0 + v * t + jx, spec.target_y0 + jy, spec.target_size,
                       spec.target_size};
        const bool on_screen = box.right() > 0.0 && box.x < W && box.bottom() > 0.0 && box.y < H;
        seq.annotations.push_back(target_present && on_screen ? box : BBox::exit());
    }
    return seq;
}

void SplitConfig::validate() const {
    if (n_train <= 0 || n_val <= 0 || n_test <= 0) {
        throw std::invalid_argument("split sizes must be positive");
    }
    if (!(exit_ratio >= 0.0 && exit_ratio <= 1.0)) {
        throw std::invalid_argument("exit_ratio must lie in [0, 1]");
    }
    if (frame_size < 32) throw std::invalid_argument("frame_size must be >= 32");
    if (min_frames < 20 || max_frames < min_frames) {
        throw std::invalid_argument("frame count range must satisfy 20 <= min <= max");
    }
    if (n_distractors < 0) throw std::invalid_argument("n_distractors must be >= 0");
    if (!(camera_jitter >= 0.0)) throw std::invalid_argument("camera_jitter must be >= 0");
}

SplitSpecs make_split_specs(const SplitConfig& cfg) {
    cfg.validate();
    SplitSpecs out;
    const auto& inventory = class_inventory();
    const double W = cfg.frame_size;

    auto build = [&](const char* name, int n, std::uint64_t tag, bool with_exits) {
        std::vector<SceneSpec> specs;
        std::mt19937_64 split_rng(splitmix64(cfg.seed * 0x100000001B3ULL + tag));
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        std::shuffle(order.begin(), order.end(), split_rng);
        const int n_exit = with_exits ? static_cast<int>(std::lround(cfg.exit_ratio * n)) : 0;
        std::vector<bool> has_exit(static_cast<std::size_t>(n), false);
        for (int i = 0; i < n_exit; ++i) has_exit[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
        const auto class_offset = static_cast<std::size_t>(split_rng() % inventory.size());

        for (int i = 0; i < n; ++i) {
            SceneSpec s;
            s.seed = splitmix64(splitmix64(cfg.seed ^ (tag << 40)) + static_cast<std::uint64_t>(i));
            std::mt19937_64 rng(s.seed);
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            auto uniform_int = [&](int lo, int hi) {
                return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
            };

            char buf[64];
            std::snprintf(buf, sizeof(buf), "%s_%llu_%04d", name,
                          static_cast<unsigned long long>(cfg.seed), i);
            s.id = buf;
            s.frame_width = cfg.frame_size;
            s.frame_height = cfg.frame_size;
            s.n_frames = uniform_int(cfg.min_frames, cfg.max_frames);
            s.n_distractors = cfg.n_distractors;
            s.camera_jitter = cfg.camera_jitter;

            const auto& label = inventory[(class_offset + static_cast<std::size_t>(i)) % inventory.size()];
            const auto us = label.find('_');
            s.target_color = label.substr(0, us);
            s.target_shape = shape_from_string(label.substr(us + 1));

            const double scale = W / 64.0;
            s.target_size = (10.0 + 4.0 * unit(rng)) * scale;
            s.target_x0 = (2.0 + 6.0 * unit(rng)) * scale;
            s.target_y0 = 0.5 * W - 0.5 * s.target_size + (unit(rng) - 0.5) * 4.0 * scale;
            const double end_center = (44.0 + 8.0 * unit(rng)) * scale;
            const double start_center = s.target_x0 + 0.5 * s.target_size;
            s.belt_speed = std::max(0.0, (end_center - start_center) / (s.n_frames - 1));

            if (has_exit[static_cast<std::size_t>(i)]) {
                // The plate is taken off the belt as it approaches the middle of the view.
                const double approach = (0.35 * W - start_center) / std::max(s.belt_speed, 1e-6);
                int start = static_cast<int>(std::lround(approach)) - uniform_int(0, 6);
                start = std::clamp(start, 6, s.n_frames - 10);
                const int len = uniform_int(12, 30);
                const int end = std::min(start + len, s.n_frames);
                s.exit_windows.push_back({start, end});
                if (unit(rng) < 0.3) {
                    const int start2 = end + uniform_int(10, 20);
                    const int len2 = uniform_int(5, 15);
                    if (start2 + len2 <= s.n_frames - 3) s.exit_windows.push_back({start2, start2 + len2});
                }
            }
            s.validate();
            specs.push_back(std::move(s));
        }
        return specs;
    };

    out.train = build("train", cfg.n_train, 1, false);
    out.val = build("val", cfg.n_val, 2, true);
    out.test = build("test", cfg.n_test, 3, true);
    return out;
}

DatasetSplit generate_split(const SplitConfig& cfg) {
    const SplitSpecs specs = make_split_specs(cfg);
    DatasetSplit out;
    for (const auto& s : specs.train) out.train.push_back(generate(s));
    for (const auto& s : specs.val) out.val.push_back(generate(s));
    for (const auto& s : specs.test) out.test.push_back(generate(s));
    return out;
}

DatasetSplit generate_split(int n_train, int n_val, int n_test, std::uint64_t seed) {
    SplitConfig cfg;
    cfg.n_train = n_train;
    cfg.n_val = n_val;
    cfg.n_test = n_test;
    cfg.seed = seed;
    return generate_split(cfg);
}

void write_split(const SplitSpecs& specs, const std::filesystem::path& root) {
    auto emit = [&](const std::vector<SceneSpec>& list, const char* split) {
        const auto dir = root / split;
        std::filesystem::create_directories(dir);
        for (const auto& s : list) {
            const Sequence seq = generate(s);
            save_sequence_dir(seq, dir);
            write_kv(dir / seq.id / "scene.txt", s.to_kv());
        }
    };
    emit(specs.train, "train");
    emit(specs.val, "val");
    emit(specs.test, "test");
}

}  // namespace exitrack
