#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "exitrack/geometry.hpp"
#include "exitrack/image.hpp"

namespace exitrack {

struct FrameAnnotation {
    std::size_t frame_index{0};
    BBox bbox;
    bool operator==(const FrameAnnotation&) const = default;
};

/// One tracking video. annotations[i] belongs to frames[i]; EXIT sentinel marks absence.
struct Sequence {
    std::string id;
    std::string class_label;
    std::vector<Image> frames;
    std::vector<BBox> annotations;

    [[nodiscard]] std::size_t size() const { return annotations.size(); }
    [[nodiscard]] bool visible(std::size_t i) const { return !annotations[i].is_exit(); }
    [[nodiscard]] bool has_exit() const;
};

/// Exit-frequency statistics over a set of sequences.
///   evr  : fraction of sequences with at least one EXIT frame
///   ael  : mean total EXIT frames per exit-containing sequence
///   avl  : mean sequence length
///   miel/mael : shortest / longest maximal run of EXIT frames (0 when none)
struct DatasetStats {
    double evr{0.0};
    double ael{0.0};
    double avl{0.0};
    std::size_t miel{0};
    std::size_t mael{0};
    std::size_t n_classes{0};
    std::size_t n_sequences{0};
    bool operator==(const DatasetStats&) const = default;
};

/// Parses "x,y,w,h" lines. Throws ParseError (with line number) on wrong arity,
/// non-numeric fields, or a non-sentinel box without positive extent.
[[nodiscard]] std::vector<FrameAnnotation> parse_annotations(std::string_view text,
                                                             const std::string& source);
[[nodiscard]] std::vector<FrameAnnotation> read_annotations(const std::filesystem::path& path);

/// Lengths of the maximal runs of EXIT frames, in order of appearance.
[[nodiscard]] std::vector<std::size_t> exit_segments(std::span<const BBox> annotations);

/// Throws InvalidSequenceError if the sequence breaks its invariants.
void validate(const Sequence& seq);

/// Loads the annotation file and, when frame_dir is non-empty, frames <frame_dir>/%06d.png.
[[nodiscard]] Sequence load_sequence(const std::filesystem::path& annotation_file,
                                     const std::filesystem::path& frame_dir);
/// Writes the annotation file only.
void write_sequence(const Sequence& seq, const std::filesystem::path& annotation_file);

/// <root>/<id>/frames/%06d.png, <root>/<id>/groundtruth.txt, <root>/<id>/meta.txt
void save_sequence_dir(const Sequence& seq, const std::filesystem::path& root);
[[nodiscard]] Sequence load_sequence_dir(const std::filesystem::path& dir);
/// Every sequence directory under `root`, sorted by id.
[[nodiscard]] std::vector<Sequence> load_dataset(const std::filesystem::path& root);

[[nodiscard]] std::string format_annotation(const BBox& box);
[[nodiscard]] std::string frame_filename(std::size_t index);

[[nodiscard]] DatasetStats compute_stats(std::span<const Sequence> sequences);

}  // namespace exitrack
