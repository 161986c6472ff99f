#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "exitrack/dataset.hpp"
#include "exitrack/kv_file.hpp"

namespace exitrack {

enum class Shape { kCircle, kSquare, kTriangle, kDiamond };

[[nodiscard]] std::string to_string(Shape s);
[[nodiscard]] Shape shape_from_string(const std::string& s);

/// Colours a tracked target may have. Distractors are painted from a disjoint palette.
[[nodiscard]] const std::vector<std::string>& target_colors();
[[nodiscard]] const std::vector<std::string>& distractor_colors();
[[nodiscard]] Rgb color_value(const std::string& name);

/// The target class inventory: every (shape, target colour) pair, as "<color>_<shape>".
[[nodiscard]] const std::vector<std::string>& class_inventory();
[[nodiscard]] int class_index(const std::string& label);
[[nodiscard]] std::string class_label(Shape shape, const std::string& color);

/// Half-open frame range [start, end) during which the target is removed from the belt.
struct ExitWindow {
    int start{0};
    int end{0};
    bool operator==(const ExitWindow&) const = default;
};

struct SceneSpec {
    std::string id{"scene"};
    std::uint64_t seed{0};
    int frame_width{64};
    int frame_height{64};
    int n_frames{90};
    double belt_speed{0.4};  // pixels / frame, +x direction
    int n_distractors{3};
    Shape target_shape{Shape::kCircle};
    std::string target_color{"red"};
    double target_size{12.0};
    double target_x0{4.0};  // top-left x of the target at frame 0, before jitter
    double target_y0{26.0};
    std::vector<ExitWindow> exit_windows;
    double camera_jitter{0.5};  // std of the per-frame view offset, pixels

    /// Throws std::invalid_argument on a broken spec.
    void validate() const;
    [[nodiscard]] bool in_exit_window(int frame) const;

    [[nodiscard]] KeyValues to_kv() const;
    [[nodiscard]] static SceneSpec from_kv(const KeyValues& kv);
};

/// Renders the scene. Bit-identical output for identical specs.
[[nodiscard]] Sequence generate(const SceneSpec& spec);

struct SplitConfig {
    int n_train{200};
    int n_val{40};
    int n_test{50};
    std::uint64_t seed{0};
    double exit_ratio{0.2};  // fraction of val / test sequences containing exits
    int frame_size{64};
    int min_frames{60};
    int max_frames{120};
    int n_distractors{3};
    double camera_jitter{0.5};

    void validate() const;
};

struct SplitSpecs {
    std::vector<SceneSpec> train;
    std::vector<SceneSpec> val;
    std::vector<SceneSpec> test;
};

struct DatasetSplit {
    std::vector<Sequence> train;
    std::vector<Sequence> val;
    std::vector<Sequence> test;
};

/// Scene specs for the three splits. Train scenes never contain exits; exactly
/// round(exit_ratio * n) val and test scenes do.
[[nodiscard]] SplitSpecs make_split_specs(const SplitConfig& cfg);
[[nodiscard]] DatasetSplit generate_split(const SplitConfig& cfg);
[[nodiscard]] DatasetSplit generate_split(int n_train, int n_val, int n_test, std::uint64_t seed);

/// Writes <root>/{train,val,test}/<id>/... plus scene.txt per sequence.
void write_split(const SplitSpecs& specs, const std::filesystem::path& root);

}  // namespace exitrack
