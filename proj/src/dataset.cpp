#include "exitrack/dataset.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "exitrack/errors.hpp"
#include "exitrack/kv_file.hpp"

namespace exitrack {

namespace fs = std::filesystem;

bool Sequence::has_exit() const {
    return std::any_of(annotations.begin(), annotations.end(),
                       [](const BBox& b) { return b.is_exit(); });
}

std::vector<FrameAnnotation> parse_annotations(std::string_view text, const std::string& source) {
    std::vector<FrameAnnotation> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() && text.empty()) break;

        std::array<double, 4> v{};
        std::size_t field = 0;
        std::string_view rest = line;
        while (true) {
            const auto comma = rest.find(',');
            if (field >= v.size()) {
                throw ParseError(source, line_no, "expected 4 comma-separated values");
            }
            const auto parsed = parse_double(rest.substr(0, comma));
            if (!parsed) throw ParseError(source, line_no, "non-numeric field");
            v[field++] = *parsed;
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
        if (field != v.size()) throw ParseError(source, line_no, "expected 4 comma-separated values");

        const BBox box{v[0], v[1], v[2], v[3]};
        if (!is_valid(box)) {
            throw ParseError(source, line_no, "box needs positive width and height");
        }
        out.push_back({out.size(), box});
    }
    return out;
}

std::vector<FrameAnnotation> read_annotations(const fs::path& path) {
    return parse_annotations(read_text(path), path.string());
}

std::vector<std::size_t> exit_segments(std::span<const BBox> annotations) {
    std::vector<std::size_t> runs;
    std::size_t run = 0;
    for (const auto& b : annotations) {
        if (b.is_exit()) {
            ++run;
        } else if (run > 0) {
            runs.push_back(run);
            run = 0;
        }
    }
    if (run > 0) runs.push_back(run);
    return runs;
}

void validate(const Sequence& seq) {
    if (seq.annotations.empty()) throw InvalidSequenceError(seq.id + ": no frames");
    if (!seq.frames.empty() && seq.frames.size() != seq.annotations.size()) {
        throw InvalidSequenceError(seq.id + ": frame / annotation count mismatch");
    }
    if (seq.annotations.front().is_exit()) {
        throw InvalidSequenceError(seq.id + ": first frame must show the target");
    }
    for (const auto& b : seq.annotations) {
        if (!is_valid(b)) throw InvalidSequenceError(seq.id + ": invalid box");
    }
}

std::string format_annotation(const BBox& box) {
    if (box.is_exit()) return "-1,-1,-1,-1";
    return format_double(box.x) + "," + format_double(box.y) + "," + format_double(box.w) + "," +
           format_double(box.h);
}

std::string frame_filename(std::size_t index) {
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%06zu.png", index);
    return buf.data();
}

Sequence load_sequence(const fs::path& annotation_file, const fs::path& frame_dir) {
    Sequence seq;
    seq.id = annotation_file.parent_path().filename().string();
    for (const auto& a : read_annotations(annotation_file)) seq.annotations.push_back(a.bbox);
    if (!frame_dir.empty()) {
        seq.frames.reserve(seq.annotations.size());
        for (std::size_t i = 0; i < seq.annotations.size(); ++i) {
            seq.frames.push_back(read_png(frame_dir / frame_filename(i)));
        }
    }
    validate(seq);
    return seq;
}

void write_sequence(const Sequence& seq, const fs::path& annotation_file) {
    std::string text;
    for (const auto& b : seq.annotations) {
        text += format_annotation(b);
        text += '\n';
    }
    write_text(annotation_file, text);
}

void save_sequence_dir(const Sequence& seq, const fs::path& root) {
    validate(seq);
    const fs::path dir = root / seq.id;
    fs::create_directories(dir / "frames");
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        write_png(seq.frames[i], dir / "frames" / frame_filename(i));
    }
    write_sequence(seq, dir / "groundtruth.txt");
    KeyValues meta;
    meta.set("class_label", seq.class_label);
    write_kv(dir / "meta.txt", meta);
}

Sequence load_sequence_dir(const fs::path& dir) {
    Sequence seq = load_sequence(dir / "groundtruth.txt", dir / "frames");
    seq.id = dir.filename().string();
    if (fs::exists(dir / "meta.txt")) {
        seq.class_label = read_kv(dir / "meta.txt").get("class_label").value_or("");
    }
    return seq;
}

std::vector<Sequence> load_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) throw std::runtime_error("not a directory: " + root.string());
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "groundtruth.txt")) {
            dirs.push_back(entry.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    std::vector<Sequence> out;
    out.reserve(dirs.size());
    for (const auto& d : dirs) out.push_back(load_sequence_dir(d));
    return out;
}

DatasetStats compute_stats(std::span<const Sequence> sequences) {
    if (sequences.empty()) throw std::invalid_argument("compute_stats: empty sequence list");
    DatasetStats st;
    st.n_sequences = sequences.size();
    std::set<std::string> classes;
    std::size_t with_exit = 0;
    std::size_t exit_frames = 0;
    std::size_t total_frames = 0;
    bool any_segment = false;
    for (const auto& seq : sequences) {
        classes.insert(seq.class_label);
        total_frames += seq.size();
        const auto runs = exit_segments(seq.annotations);
        if (runs.empty()) continue;
        ++with_exit;
        for (auto r : runs) {
            exit_frames += r;
            st.miel = any_segment ? std::min(st.miel, r) : r;
            st.mael = std::max(st.mael, r);
            any_segment = true;
        }
    }
    const auto n = static_cast<double>(sequences.size());
    st.evr = static_cast<double>(with_exit) / n;
    st.ael = with_exit > 0 ? static_cast<double>(exit_frames) / static_cast<double>(with_exit) : 0.0;
    st.avl = static_cast<double>(total_frames) / n;
    st.n_classes = classes.size();
    return st;
}

}  // namespace exitrack
