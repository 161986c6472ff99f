#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include "exitrack/conveyor.hpp"
#include "exitrack/dataset.hpp"
#include "exitrack/errors.hpp"
#include "exitrack/kv_file.hpp"

using namespace exitrack;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::path(testing::TempDir()) / ("exitrack_dataset_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Sequence with_runs(const std::string& id, std::size_t n, const std::vector<std::pair<int, int>>& runs) {
    Sequence s;
    s.id = id;
    s.class_label = "red_circle";
    for (std::size_t i = 0; i < n; ++i) s.annotations.push_back({10.0 + i, 5.0, 8.0, 8.0});
    for (auto [start, len] : runs) {
        for (int i = start; i < start + len; ++i) s.annotations[static_cast<std::size_t>(i)] = BBox::exit();
    }
    return s;
}

// Independent re-count used as the stats oracle.
DatasetStats recount(const std::vector<Sequence>& seqs) {
    DatasetStats st;
    st.n_sequences = seqs.size();
    std::set<std::string> classes;
    double frames = 0;
    double exits = 0;
    int with_exit = 0;
    std::vector<std::size_t> lengths;
    for (const auto& s : seqs) {
        classes.insert(s.class_label);
        frames += static_cast<double>(s.size());
        bool any = false;
        std::size_t i = 0;
        while (i < s.size()) {
            if (!s.annotations[i].is_exit()) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < s.size() && s.annotations[j].is_exit()) ++j;
            lengths.push_back(j - i);
            exits += static_cast<double>(j - i);
            any = true;
            i = j;
        }
        with_exit += any ? 1 : 0;
    }
    st.evr = with_exit / static_cast<double>(seqs.size());
    st.ael = with_exit ? exits / with_exit : 0.0;
    st.avl = frames / static_cast<double>(seqs.size());
    st.miel = lengths.empty() ? 0 : *std::min_element(lengths.begin(), lengths.end());
    st.mael = lengths.empty() ? 0 : *std::max_element(lengths.begin(), lengths.end());
    st.n_classes = classes.size();
    return st;
}

}  // namespace

TEST(Annotations, ParseLines) {
    const auto a = parse_annotations("10,20,30,40\n-1,-1,-1,-1\n", "t");
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a[0].bbox, (BBox{10, 20, 30, 40}));
    EXPECT_EQ(a[0].frame_index, 0u);
    EXPECT_TRUE(a[1].bbox.is_exit());
    EXPECT_EQ(a[1].frame_index, 1u);
}

TEST(Annotations, RejectsBadLines) {
    EXPECT_THROW((void)parse_annotations("10,20,-5,40\n", "t"), ParseError);
    EXPECT_THROW((void)parse_annotations("10,20,30\n", "t"), ParseError);
    EXPECT_THROW((void)parse_annotations("10,20,30,40,50\n", "t"), ParseError);
    EXPECT_THROW((void)parse_annotations("10,x,30,40\n", "t"), ParseError);
    try {
        (void)parse_annotations("1,2,3,4\n1,2,3,4\n1,2,0,4\n", "gt.txt");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Annotations, ExitSerializesAsSentinel) {
    EXPECT_EQ(format_annotation(BBox::exit()), "-1,-1,-1,-1");
}

TEST(Annotations, SubPixelRoundTrip) {
    const BBox b{0.1 + 0.2, 1.0 / 3.0, 7.123456789012345, 2e-7};
    const auto parsed = parse_annotations(format_annotation(b) + "\n", "t");
    EXPECT_EQ(parsed[0].bbox, b);
}

TEST(Stats, ExitRatio) {
    std::vector<Sequence> seqs;
    for (int i = 0; i < 10; ++i) {
        seqs.push_back(i < 3 ? with_runs("s" + std::to_string(i), 20, {{4, 3}}) : with_runs("s" + std::to_string(i), 20, {}));
    }
    EXPECT_DOUBLE_EQ(compute_stats(seqs).evr, 0.3);
}

TEST(Stats, NoExits) {
    std::vector<Sequence> seqs{with_runs("a", 10, {}), with_runs("b", 30, {})};
    const auto st = compute_stats(seqs);
    EXPECT_EQ(st.evr, 0.0);
    EXPECT_EQ(st.miel, 0u);
    EXPECT_EQ(st.mael, 0u);
    EXPECT_EQ(st.ael, 0.0);
    EXPECT_EQ(st.avl, 20.0);
}

TEST(Stats, RunLengths) {
    std::vector<Sequence> seqs{with_runs("a", 30, {{2, 2}, {10, 5}})};
    const auto st = compute_stats(seqs);
    EXPECT_EQ(st.miel, 2u);
    EXPECT_EQ(st.mael, 5u);
    EXPECT_EQ(st.ael, 7.0);
    EXPECT_EQ(st.avl, 30.0);
}

TEST(Stats, MatchesRecountOracle) {
    std::mt19937_64 rng(21);
    for (int d = 0; d < 100; ++d) {
        std::vector<Sequence> seqs;
        const int n = std::uniform_int_distribution<int>(1, 12)(rng);
        for (int i = 0; i < n; ++i) {
            Sequence s;
            s.id = "s" + std::to_string(i);
            s.class_label = class_inventory()[rng() % class_inventory().size()];
            const int len = std::uniform_int_distribution<int>(1, 60)(rng);
            const double p_exit = std::uniform_real_distribution<double>(0.0, 0.6)(rng);
            for (int t = 0; t < len; ++t) {
                const bool ex = std::bernoulli_distribution(p_exit)(rng);
                s.annotations.push_back(ex ? BBox::exit() : BBox{1, 1, 4, 4});
            }
            seqs.push_back(std::move(s));
        }
        EXPECT_EQ(compute_stats(seqs), recount(seqs)) << "dataset " << d;
    }
}

TEST(SequenceIo, WriteLoadIdentity) {
    const fs::path dir = scratch("io");
    std::mt19937_64 rng(2);
    for (int i = 0; i < 5; ++i) {
        SceneSpec spec;
        spec.id = "seq" + std::to_string(i);
        spec.seed = rng();
        spec.n_frames = 20;
        if (i % 2 == 0) spec.exit_windows = {{5, 9}};
        const Sequence seq = generate(spec);
        save_sequence_dir(seq, dir);
        const Sequence back = load_sequence_dir(dir / seq.id);
        EXPECT_EQ(back.id, seq.id);
        EXPECT_EQ(back.class_label, seq.class_label);
        EXPECT_EQ(back.annotations, seq.annotations);
        EXPECT_EQ(back.frames, seq.frames);
    }
    const auto all = load_dataset(dir);
    ASSERT_EQ(all.size(), 5u);
    EXPECT_TRUE(std::is_sorted(all.begin(), all.end(), [](const Sequence& a, const Sequence& b) { return a.id < b.id; }));
}

TEST(SequenceIo, AnnotationFileOnly) {
    const fs::path dir = scratch("ann");
    const Sequence s = with_runs("x", 12, {{3, 4}});
    write_sequence(s, dir / "gt.txt");
    const Sequence back = load_sequence(dir / "gt.txt", {});
    EXPECT_EQ(back.annotations, s.annotations);
    EXPECT_TRUE(back.frames.empty());
    EXPECT_NE(read_text(dir / "gt.txt").find("-1,-1,-1,-1"), std::string::npos);
}

TEST(SequenceIo, ValidateRejectsBrokenSequences) {
    Sequence s = with_runs("x", 4, {});
    s.annotations[2] = {0, 0, 0, 1};
    EXPECT_THROW(validate(s), InvalidSequenceError);
}
