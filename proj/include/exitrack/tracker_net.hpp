#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "exitrack/geometry.hpp"
#include "exitrack/image.hpp"
#include "exitrack/kv_file.hpp"
#include "exitrack/nn/autograd.hpp"
#include "exitrack/nn/parameters.hpp"

namespace exitrack {

/// Which feature feeds the OOD head.
enum class OodInput { kBackbone, kEncoder, kSimilarity, kTargetQuery };
enum class TrainMode { kJoint, kTwoStage };

/// "backbone" | "encoder" | "similarity" | "target-query"
[[nodiscard]] std::string to_string(OodInput v);
[[nodiscard]] OodInput ood_input_from_string(const std::string& s);
/// "joint" | "two-stage"
[[nodiscard]] std::string to_string(TrainMode m);
[[nodiscard]] TrainMode train_mode_from_string(const std::string& s);

struct LossWeights {
    double giou{2.0};
    double l1{5.0};
    double bce{1.0};
    double ce{1.0};
};

struct NetConfig {
    OodInput ood_input{OodInput::kBackbone};
    TrainMode train_mode{TrainMode::kJoint};
    int template_update_period{10};
    int feature_dim{64};
    int n_classes{8};
    LossWeights loss_weights;
    int search_size{32};
    int template_size{16};
    double search_factor{4.0};
    double template_factor{2.0};
    int ood_hidden{64};

    void validate() const;
    [[nodiscard]] int search_grid() const { return search_size / 4; }
    [[nodiscard]] int template_grid() const { return template_size / 4; }

    [[nodiscard]] KeyValues to_kv() const;
    /// Missing keys keep their defaults.
    [[nodiscard]] static NetConfig from_kv(const KeyValues& kv);
};

/// Parameter block tags.
namespace block {
inline constexpr const char* kBackbone = "backbone";
inline constexpr const char* kTransformer = "transformer";
inline constexpr const char* kBoxHead = "box_head";
inline constexpr const char* kUpdateHead = "update_head";
inline constexpr const char* kOodHead = "ood_head";
}  // namespace block

/// Per-frame network output. bbox is in normalized search-crop coordinates.
struct StepOutput {
    BBox bbox;
    double update_score{0.0};
    std::vector<double> ood_h;
    std::vector<double> ood_f;
    double ood_g{1.0};
};

/// Graph handles produced by TrackerNet::forward.
struct ForwardVars {
    nn::Var corners;  // 2 x 2: [[x1, y1], [x2, y2]], normalized crop coordinates
    nn::Var update_logit;  // 1 x 1
    nn::Var h;  // 1 x K
    nn::Var g;  // 1 x 1
    nn::Var f;  // 1 x K, f = h / g
    nn::Var similarity;  // search tokens x 1
    nn::Var ood_feature;  // 1 x D vector fed to the OOD head
};

/// The OOD head on its own, for testing the decomposition.
struct OodHeadVars {
    nn::Var h;
    nn::Var g;
    nn::Var f;
};

class TrackerNet {
public:
    explicit TrackerNet(NetConfig cfg, std::uint64_t seed = 0);

    [[nodiscard]] const NetConfig& config() const { return cfg_; }
    /// Only the OOD input routing may change after construction; parameter shapes do not depend on it.
    void set_ood_input(OodInput v) { cfg_.ood_input = v; }

    [[nodiscard]] nn::ParameterSet& params() { return params_; }
    [[nodiscard]] const nn::ParameterSet& params() const { return params_; }

    /// Template crop ((t*t) x 3) -> projected template tokens ((t/4)^2 x D).
    nn::Var template_tokens(nn::Tape& t, nn::Var z) const;
    ForwardVars forward(nn::Tape& t, nn::Var init_tokens, nn::Var dyn_tokens, nn::Var x) const;
    OodHeadVars ood_head(nn::Tape& t, nn::Var feature) const;

    /// Inference helpers, no parameter gradients.
    [[nodiscard]] Matrix template_features(const Matrix& z) const;
    [[nodiscard]] StepOutput infer(const Matrix& init_tokens, const Matrix& dyn_tokens,
                                   const Matrix& x) const;

    /// Tape that differentiates no parameter.
    [[nodiscard]] nn::Tape inference_tape() const;

private:
    nn::Var conv(nn::Tape& t, nn::Var in, int size, int k, int stride, int w_id, bool relu) const;
    nn::Var backbone(nn::Tape& t, nn::Var img, int size) const;
    nn::Var linear(nn::Tape& t, nn::Var in, int w_id) const;
    nn::Var attention(nn::Tape& t, nn::Var q_in, nn::Var kv_in, int base) const;
    nn::Var ffn_block(nn::Tape& t, nn::Var in, int base) const;

    NetConfig cfg_;
    nn::ParameterSet params_;
    Matrix grid_;  // search cell centres, (g*g) x 2
};

/// Cell-centre coordinates ((c + 0.5) / n, (r + 0.5) / n) of an n x n grid, row-major.
[[nodiscard]] Matrix grid_coordinates(int n);
/// Expected corner position under each row of `probs` (rows sum to 1): probs * grid.
[[nodiscard]] Matrix soft_argmax(const Matrix& probs, const Matrix& grid);

/// Search window: square of search_factor * max(w, h) around `around`, clamped to the frame.
[[nodiscard]] CropWindow search_window(const BBox& around, const NetConfig& cfg, int frame_w, int frame_h);
/// Template window: square of template_factor * max(w, h) around `box`.
[[nodiscard]] CropWindow template_window(const BBox& box, const NetConfig& cfg, int frame_w, int frame_h);

/// Which loss terms to include.
struct LossSelection {
    bool bbox{true};
    bool update{true};
    bool ood{true};
};

struct LossTerms {
    nn::Var total;
    double giou_loss{0.0};  // 1 - giou, unweighted
    double l1{0.0};
    double bce{0.0};
    double ce{0.0};
};

/// Loss for one sample. gt is in normalized crop coordinates. bbox and OOD terms apply to visible
/// frames only. Throws InvalidSequenceError if gt is the EXIT sentinel while visible is true.
LossTerms compute_losses(nn::Tape& t, const ForwardVars& out, const BBox& gt, bool visible,
                         int class_index, const LossWeights& w, LossSelection sel = {});

}  // namespace exitrack
