#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "exitrack/calibration.hpp"
#include "exitrack/checkpoint.hpp"
#include "exitrack/conveyor.hpp"
#include "exitrack/dataset.hpp"
#include "exitrack/errors.hpp"
#include "exitrack/kv_file.hpp"
#include "exitrack/metrics.hpp"
#include "exitrack/ood.hpp"
#include "exitrack/plot.hpp"
#include "exitrack/task_sim.hpp"
#include "exitrack/tracker.hpp"
#include "exitrack/trainer.hpp"

namespace fs = std::filesystem;
using namespace exitrack;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

// Bad option values found after parsing; reported with the usage exit code.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string to_text(const std::string& v) { return v; }
std::string to_text(int v) { return std::to_string(v); }
std::string to_text(std::uint64_t v) { return std::to_string(v); }
std::string to_text(double v) { return format_double(v); }

// Every option of a subcommand, so the resolved values can be written back as a config file.
class Options {
public:
    explicit Options(CLI::App* app) : app_(app) {}

    template <class T>
    CLI::Option* add(const std::string& name, T& ref, const std::string& help) {
        items_.emplace_back(name, [&ref] { return to_text(ref); });
        return app_->add_option("--" + name, ref, help)
            ->capture_default_str()
            ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }

    [[nodiscard]] KeyValues resolved() const {
        KeyValues kv;
        for (const auto& [name, get] : items_) kv.set(name, get());
        return kv;
    }

    [[nodiscard]] CLI::App* app() const { return app_; }

private:
    CLI::App* app_;
    std::vector<std::pair<std::string, std::function<std::string()>>> items_;
};

std::vector<double> parse_list(const std::string& text, const std::string& option) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto v = parse_double(item);
        if (!v) throw UsageError("--" + option + ": not a number: '" + item + "'");
        out.push_back(*v);
    }
    return out;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void write_run_config(const fs::path& out, const std::string& command, const Options& opts) {
    fs::create_directories(out);
    std::string text = "# exitrack " + command + "\n" + opts.resolved().to_string();
    write_text(out / "run_config.txt", text);
}

// Expands "--config FILE" into "--key value" pairs placed right after the subcommand, so
// flags given on the command line come later and win.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::vector<std::string> rest;
    std::vector<std::string> injected;
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a file");
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
            continue;
        }
        const KeyValues kv = read_kv(path);
        for (const auto& [k, v] : kv.entries()) {
            injected.push_back("--" + k);
            injected.push_back(v);
        }
    }
    auto sub = std::find_if(rest.begin(), rest.end(), [](const std::string& a) { return a.empty() || a[0] != '-'; });
    if (sub != rest.end()) ++sub;
    rest.insert(sub, injected.begin(), injected.end());
    return rest;
}

void require_file(const fs::path& p, const std::string& what) {
    if (!fs::is_regular_file(p)) throw std::runtime_error(what + " not found: " + p.string());
}

std::vector<Sequence> load_split(const fs::path& data, const std::string& split) {
    const fs::path dir = data / split;
    if (!fs::is_directory(dir)) throw std::runtime_error("missing split directory " + dir.string());
    auto seqs = load_dataset(dir);
    if (seqs.empty()) throw std::runtime_error("no sequences in " + dir.string());
    return seqs;
}

std::vector<Sequence> id_only(std::vector<Sequence> seqs) {
    std::erase_if(seqs, [](const Sequence& s) { return s.has_exit(); });
    return seqs;
}

std::vector<Sequence> select_subset(std::vector<Sequence> seqs, const std::string& subset) {
    if (subset == "exit") std::erase_if(seqs, [](const Sequence& s) { return !s.has_exit(); });
    if (seqs.empty()) throw std::runtime_error("no " + subset + " sequences to evaluate");
    return seqs;
}

CalibrationResult load_calibration(const fs::path& ckpt) {
    const fs::path p = calibration_path(ckpt);
    require_file(p, "calibration sidecar (run calibrate first)");
    return CalibrationResult::from_kv(read_kv(p));
}

// ---- gen

struct GenArgs {
    std::string out;
    SplitConfig split;
};

void setup_gen(Options& o, GenArgs& a) {
    o.add("out", a.out, "dataset root")->required();
    o.add("seed", a.split.seed, "split seed");
    o.add("n-train", a.split.n_train, "training sequences");
    o.add("n-val", a.split.n_val, "validation sequences");
    o.add("n-test", a.split.n_test, "test sequences");
    o.add("exit-ratio", a.split.exit_ratio, "fraction of val/test sequences with exits");
    o.add("frame-size", a.split.frame_size, "frame side in pixels");
    o.add("min-frames", a.split.min_frames, "shortest sequence");
    o.add("max-frames", a.split.max_frames, "longest sequence");
    o.add("n-distractors", a.split.n_distractors, "distractor objects per scene");
    o.add("camera-jitter", a.split.camera_jitter, "per-frame view offset std, pixels");
}

int run_gen(const GenArgs& a, const Options& o) {
    try {
        a.split.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const SplitSpecs specs = make_split_specs(a.split);
    write_split(specs, a.out);
    write_run_config(a.out, "gen", o);

    KeyValues stats;
    auto add_stats = [&](const std::string& name) {
        const auto seqs = load_dataset(fs::path(a.out) / name);
        const DatasetStats s = compute_stats(seqs);
        stats.set(name + ".n_sequences", static_cast<std::int64_t>(s.n_sequences));
        stats.set(name + ".evr", s.evr);
        stats.set(name + ".ael", s.ael);
        stats.set(name + ".avl", s.avl);
        stats.set(name + ".miel", static_cast<std::int64_t>(s.miel));
        stats.set(name + ".mael", static_cast<std::int64_t>(s.mael));
        stats.set(name + ".n_classes", static_cast<std::int64_t>(s.n_classes));
    };
    add_stats("train");
    add_stats("val");
    add_stats("test");
    write_kv(fs::path(a.out) / "stats.txt", stats);
    std::cout << stats.to_string();
    return kExitOk;
}

// ---- train

struct TrainArgs {
    std::string data;
    std::string out;
    std::string ood_input{"backbone"};
    std::string train_mode{"joint"};
    NetConfig net;
    TrainConfig train;
    std::uint64_t init_seed{0};
};

void setup_train(Options& o, TrainArgs& a) {
    o.add("data", a.data, "dataset root (train/ and val/)")->required();
    o.add("out", a.out, "run directory; the checkpoint is written to <out>/model.ckpt")->required();
    o.add("ood-input", a.ood_input, "feature fed to the OOD head")
        ->check(CLI::IsMember({"backbone", "encoder", "similarity", "target-query"}));
    o.add("train-mode", a.train_mode, "joint or two-stage")->check(CLI::IsMember({"joint", "two-stage"}));
    o.add("template-update-period", a.net.template_update_period, "frames between template refreshes");
    o.add("feature-dim", a.net.feature_dim, "token width");
    o.add("ood-hidden", a.net.ood_hidden, "OOD head hidden width");
    o.add("lambda-giou", a.net.loss_weights.giou, "GIoU loss weight");
    o.add("lambda-l1", a.net.loss_weights.l1, "L1 loss weight");
    o.add("lambda-bce", a.net.loss_weights.bce, "update-score loss weight");
    o.add("lambda-ce", a.net.loss_weights.ce, "OOD classification loss weight");
    o.add("epochs", a.train.epochs, "epochs (stage 1 in two-stage mode)");
    o.add("stage2-epochs", a.train.stage2_epochs, "stage 2 epochs in two-stage mode");
    o.add("samples-per-epoch", a.train.samples_per_epoch, "training samples per epoch");
    o.add("batch-size", a.train.batch_size, "samples per optimizer step");
    o.add("lr", a.train.lr, "learning rate");
    o.add("weight-decay", a.train.weight_decay, "decoupled weight decay");
    o.add("grad-clip", a.train.grad_clip, "global gradient norm clip");
    o.add("center-jitter", a.train.center_jitter, "search centre jitter");
    o.add("scale-jitter", a.train.scale_jitter, "search scale jitter");
    o.add("val-samples", a.train.val_samples, "validation samples per epoch");
    o.add("seed", a.train.seed, "sampling seed");
    o.add("init-seed", a.init_seed, "parameter initialization seed");
}

int run_train(TrainArgs& a, const Options& o) {
    a.net.ood_input = ood_input_from_string(a.ood_input);
    a.net.train_mode = train_mode_from_string(a.train_mode);
    a.net.n_classes = static_cast<int>(class_inventory().size());
    try {
        a.net.validate();
        a.train.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto train_seqs = load_split(a.data, "train");
    const auto val_seqs = id_only(load_split(a.data, "val"));

    write_run_config(a.out, "train", o);
    std::ofstream log(fs::path(a.out) / "train_log.txt");
    TrackerNet net(a.net, a.init_seed);
    train(net, a.train, train_seqs, val_seqs, [&](const EpochLog& e) {
        const std::string line = format_epoch_log(e);
        std::cout << line << std::endl;
        log << line << '\n';
        log.flush();
    });
    const fs::path ckpt = fs::path(a.out) / "model.ckpt";
    save_checkpoint(net, ckpt);
    std::cout << "checkpoint " << ckpt.string() << '\n';
    return kExitOk;
}

// ---- calibrate

struct CalibrateArgs {
    std::string checkpoint;
    std::string data;
    std::string out;
    std::string epsilon_grid{"0.0025,0.005,0.01,0.02,0.04,0.08"};
    std::string score_variant{"max_h"};
    double phi_quantile{0.05};
    int window{5};
};

void setup_calibrate(Options& o, CalibrateArgs& a) {
    o.add("checkpoint", a.checkpoint, "trained checkpoint")->required();
    o.add("data", a.data, "dataset root (val/)")->required();
    o.add("out", a.out, "directory for the run config and a copy of the calibration")->required();
    o.add("epsilon-grid", a.epsilon_grid, "comma-separated perturbation magnitudes");
    o.add("score-variant", a.score_variant, "max_h or g")->check(CLI::IsMember({"max_h", "g"}));
    o.add("phi-quantile", a.phi_quantile, "quantile of smoothed ID scores used as threshold");
    o.add("window", a.window, "moving-average length, frames");
}

int run_calibrate(const CalibrateArgs& a, const Options& o) {
    PerturbConfig pc;
    pc.epsilon_grid = parse_list(a.epsilon_grid, "epsilon-grid");
    pc.variant = score_variant_from_string(a.score_variant);
    ExitDecider dc;
    dc.window = a.window;
    dc.calibration_quantile = a.phi_quantile;
    try {
        pc.validate();
        dc.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    require_file(a.checkpoint, "checkpoint");
    const TrackerNet net = load_checkpoint(a.checkpoint);
    const auto val = id_only(load_split(a.data, "val"));

    const CalibrationSet set = collect_calibration_set(net, val);
    const CalibrationResult cal = calibrate(net, set, pc, dc);
    write_kv(calibration_path(a.checkpoint), cal.to_kv());
    write_run_config(a.out, "calibrate", o);
    write_kv(fs::path(a.out) / "calibration.txt", cal.to_kv());
    std::cout << cal.to_kv().to_string();
    return kExitOk;
}

// ---- eval

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string out;
    std::string subset{"exit"};
    int plot_width{480};
    int plot_height{180};
};

void setup_eval(Options& o, EvalArgs& a) {
    o.add("checkpoint", a.checkpoint, "calibrated checkpoint")->required();
    o.add("data", a.data, "dataset root (test/)")->required();
    o.add("out", a.out, "report directory")->required();
    o.add("subset", a.subset, "exit: exit-containing test sequences; all: every test sequence")
        ->check(CLI::IsMember({"exit", "all"}));
    o.add("plot-width", a.plot_width, "exit-trace image width");
    o.add("plot-height", a.plot_height, "exit-trace image height");
}

int run_eval(const EvalArgs& a, const Options& o) {
    require_file(a.checkpoint, "checkpoint");
    const TrackerNet net = load_checkpoint(a.checkpoint);
    const CalibrationResult cal = load_calibration(a.checkpoint);
    const auto test = select_subset(load_split(a.data, "test"), a.subset);

    const fs::path out(a.out);
    fs::create_directories(out / "plots");
    fs::create_directories(out / "traces");
    write_run_config(out, "eval", o);

    FrameRecords ood_all;
    FrameRecords tmpl_all;
    std::ostringstream jsonl;
    for (const auto& seq : test) {
        OodDecider dec(cal.perturb_config(), cal.decider());
        const TrackResult r = track_sequence(net, seq, &dec);
        const OodTrace& trace = dec.trace();
        ExitSignal ood{trace.smoothed_scores, {}};
        for (bool d : trace.decisions) ood.pred_visible.push_back(!d);

        const TrackResult r0 = track_sequence(net, seq);
        std::vector<double> upd;
        for (const auto& s : r0.steps) upd.push_back(s.update_score);
        const ExitSignal tmpl{upd, baseline_exit_from_template_score(upd)};

        const FrameRecords ro = sequence_records(r.boxes, ood, seq);
        const FrameRecords rt = sequence_records(r0.boxes, tmpl, seq);
        ood_all.append(ro);
        tmpl_all.append(rt);
        jsonl << report_json(seq.id, "ood", report_from_records(ro)) << '\n';
        jsonl << report_json(seq.id, "template", report_from_records(rt)) << '\n';

        write_text(out / "traces" / (seq.id + ".txt"), format_trace(trace));
        ExitTracePlot plot;
        plot.ood_scores = trace.smoothed_scores;
        plot.phi = cal.phi;
        plot.update_scores = upd;
        for (std::size_t t = 0; t < seq.size(); ++t) plot.gt_visible.push_back(seq.visible(t));
        plot.predicted_exit = trace.decisions;
        write_png(render_exit_trace(plot, a.plot_width, a.plot_height), out / "plots" / (seq.id + ".png"));
    }

    const MetricsReport ood_rep = report_from_records(ood_all);
    const MetricsReport tmpl_rep = report_from_records(tmpl_all);
    KeyValues kv;
    kv.set("n_sequences", static_cast<std::int64_t>(test.size()));
    kv.set("epsilon_star", cal.epsilon_star);
    kv.set("phi", cal.phi);
    add_report(kv, "ood.", ood_rep);
    add_report(kv, "template.", tmpl_rep);
    write_kv(out / "report.txt", kv);
    write_text(out / "sequences.jsonl", jsonl.str());
    const std::string table = format_table({{"ood", ood_rep}, {"template", tmpl_rep}});
    write_text(out / "table.txt", table);
    std::cout << table;
    return kExitOk;
}

// ---- simulate

struct SimulateArgs {
    std::string checkpoint;
    std::string data;
    std::string out;
    std::string flags{"ood,none,oracle"};
    std::string subset{"exit"};
    double zone_x0{0.4};
    double zone_x1{0.75};
    int zone_frames{3};
};

void setup_simulate(Options& o, SimulateArgs& a) {
    o.add("checkpoint", a.checkpoint, "trained checkpoint (calibrated for --flags ood)")->required();
    o.add("data", a.data, "dataset root (test/)")->required();
    o.add("out", a.out, "episode log directory")->required();
    o.add("flags", a.flags, "comma-separated exit-signal sources: oracle, ood, none");
    o.add("subset", a.subset, "exit or all")->check(CLI::IsMember({"exit", "all"}));
    o.add("zone-x0", a.zone_x0, "place zone left edge, fraction of frame width");
    o.add("zone-x1", a.zone_x1, "place zone right edge, fraction of frame width");
    o.add("zone-frames", a.zone_frames, "consecutive in-zone frames needed to place");
}

int run_simulate(const SimulateArgs& a, const Options& o) {
    const auto sources = split_words(a.flags);
    if (sources.empty()) throw UsageError("--flags is empty");
    for (const auto& s : sources) {
        if (s != "oracle" && s != "ood" && s != "none") throw UsageError("--flags: unknown source '" + s + "'");
    }
    if (a.zone_frames < 1 || !(a.zone_x0 < a.zone_x1)) throw UsageError("bad place zone");
    require_file(a.checkpoint, "checkpoint");
    const TrackerNet net = load_checkpoint(a.checkpoint);
    CalibrationResult cal;
    if (std::find(sources.begin(), sources.end(), "ood") != sources.end()) cal = load_calibration(a.checkpoint);
    const auto test = select_subset(load_split(a.data, "test"), a.subset);

    const fs::path out(a.out);
    write_run_config(out, "simulate", o);
    KeyValues summary;
    summary.set("n_episodes", static_cast<std::int64_t>(test.size()));
    std::ostringstream table;
    table << "flags  | success | rate\n";
    for (const auto& src : sources) {
        fs::create_directories(out / "episodes" / src);
        std::size_t ok = 0;
        for (const auto& seq : test) {
            const int w = seq.frames.empty() ? 64 : seq.frames.front().width();
            const int h = seq.frames.empty() ? 64 : seq.frames.front().height();
            PlaceZone zone{a.zone_x0 * w, 0.0, a.zone_x1 * w, static_cast<double>(h), a.zone_frames};

            TrackResult r;
            if (src == "ood") {
                OodDecider dec(cal.perturb_config(), cal.decider());
                r = track_sequence(net, seq, &dec);
            } else if (src == "oracle") {
                OracleDecider dec;
                r = track_sequence(net, seq, &dec);
            } else {
                r = track_sequence(net, seq);
            }
            const EpisodeResult ep = run_episode(seq, r.boxes, r.flagged, zone);
            ok += ep.success ? 1 : 0;
            write_text(out / "episodes" / src / (seq.id + ".log"), format_episode_log(ep));
            summary.set(src + "." + seq.id, to_string(ep.final_phase) + (ep.success ? ",success" : ",fail"));
        }
        const double rate = static_cast<double>(ok) / static_cast<double>(test.size());
        summary.set(src + ".successes", static_cast<std::int64_t>(ok));
        summary.set(src + ".success_rate", rate);
        char line[64];
        std::snprintf(line, sizeof line, "%-6s | %3zu/%-3zu | %.2f\n", src.c_str(), ok, test.size(), rate);
        table << line;
    }
    write_kv(out / "summary.txt", summary);
    write_text(out / "summary_table.txt", table.str());
    std::cout << table.str();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exit-aware object tracking on a synthetic conveyor"};
    app.require_subcommand(1);

    GenArgs gen;
    TrainArgs tr;
    CalibrateArgs cal;
    EvalArgs ev;
    SimulateArgs sim;
    Options gen_o(app.add_subcommand("gen", "generate the synthetic dataset"));
    Options tr_o(app.add_subcommand("train", "train the tracker"));
    Options cal_o(app.add_subcommand("calibrate", "select the perturbation size and exit threshold"));
    Options ev_o(app.add_subcommand("eval", "tracking and exit metrics, traces and plots"));
    Options sim_o(app.add_subcommand("simulate", "conveyor pick-and-place episodes"));
    setup_gen(gen_o, gen);
    setup_train(tr_o, tr);
    setup_calibrate(cal_o, cal);
    setup_eval(ev_o, ev);
    setup_simulate(sim_o, sim);
    for (auto* sub : app.get_subcommands({})) {
        sub->add_option("--config", "key=value file; command-line flags override it");
    }

    try {
        std::vector<std::string> args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (gen_o.app()->parsed()) return run_gen(gen, gen_o);
        if (tr_o.app()->parsed()) return run_train(tr, tr_o);
        if (cal_o.app()->parsed()) return run_calibrate(cal, cal_o);
        if (ev_o.app()->parsed()) return run_eval(ev, ev_o);
        if (sim_o.app()->parsed()) return run_simulate(sim, sim_o);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
