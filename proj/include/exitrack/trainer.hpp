#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "exitrack/dataset.hpp"
#include "exitrack/kv_file.hpp"
#include "exitrack/tracker_net.hpp"

namespace exitrack {

struct TrainConfig {
    int epochs{30};
    int stage2_epochs{6};  // two-stage mode only
    int samples_per_epoch{2048};
    int batch_size{16};
    double lr{1e-3};
    double weight_decay{1e-4};
    double grad_clip{5.0};
    double center_jitter{0.4};  // search centre offset, fraction of max(w, h)
    double scale_jitter{0.15};  // log-uniform half range of the search window side
    int max_template_gap{30};  // dynamic template is at most this many frames before the search frame
    int val_samples{64};
    std::uint64_t seed{0};

    void validate() const;
    [[nodiscard]] KeyValues to_kv() const;
    [[nodiscard]] static TrainConfig from_kv(const KeyValues& kv);
};

struct EpochLog {
    std::string stage;  // "joint", "stage1" or "stage2"
    int epoch{0};
    double loss{0.0};
    double giou{0.0};  // mean 1 - giou
    double l1{0.0};
    double bce{0.0};
    double ce{0.0};
    double val_loss{0.0};
    double seconds{0.0};
};

[[nodiscard]] std::string format_epoch_log(const EpochLog& e);

/// One network input triple plus targets, cut from a sequence.
struct TrainingSample {
    Matrix init_template;
    Matrix dyn_template;
    Matrix search;
    BBox gt;  // normalized search-crop coordinates, or EXIT
    bool visible{true};
    int class_index{0};
};

/// Draws a sample: random sequence, initial template from an earlier visible frame, dynamic
/// template from a nearby visible frame, search crop around the jittered target.
[[nodiscard]] TrainingSample draw_sample(std::span<const Sequence> seqs, const NetConfig& net,
                                        const TrainConfig& cfg, std::mt19937_64& rng);

/// Trains `net` in place following net.config().train_mode. Throws DivergenceError on a
/// non-finite loss or gradient.
std::vector<EpochLog> train(TrackerNet& net, const TrainConfig& cfg, std::span<const Sequence> train_seqs,
                            std::span<const Sequence> val_seqs,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

/// Per-parameter trainable mask for a stage ("joint", "stage1", "stage2").
[[nodiscard]] std::vector<bool> trainable_mask(const nn::ParameterSet& params, const std::string& stage);

}  // namespace exitrack
