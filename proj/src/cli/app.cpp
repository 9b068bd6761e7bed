#include "semdet/cli/app.hpp"

#include "semdet/bench/bench.hpp"
#include "semdet/cli/overlay.hpp"
#include "semdet/common/errors.hpp"
#include "semdet/eval/evaluator.hpp"
#include "semdet/net/checkpoint.hpp"
#include "semdet/net/inference.hpp"
#include "semdet/synth/dataset.hpp"
#include "semdet/train/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <optional>

namespace semdet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    out << text;
    if (!out) {
        throw IoFailure("cannot write " + path.string());
    }
}

void write_run_json(const fs::path& dir, const std::string& command, const std::vector<std::string>& args,
                    const json& resolved)
{
    json j{{"command", command}, {"args", args}, {"config", resolved}};
    write_text(dir / "run.json", j.dump(2) + "\n");
}

std::vector<Detection> above(const std::vector<Detection>& dets, double conf)
{
    std::vector<Detection> out;
    for (const auto& d : dets) {
        if (d.score > conf) {
            out.push_back(d);
        }
    }
    return out;
}

struct Options {
    // shared
    std::string data;
    std::string out;
    std::uint64_t seed = 1;
    std::string family;
    std::string split = "test";
    std::string ckpt;
    double conf_thr = eval::kDefaultConfidence;
    int topk = 100;
    int stride = 4;
    // synth
    std::string scale = "desk";
    std::optional<int> n_train, n_val, n_test, image_size, pitch, line_width;
    std::optional<double> noise;
    std::vector<std::string> classes;
    // train / transfer
    std::optional<int> epochs, eval_every;
    std::string init_ckpt;
    double lr = 1e-3;
    int batch_size = 8;
    bool no_flip = false;
    bool full = false;
    bool no_epoch_ckpts = false;
    // bench
    int warmup = 10;
    int n_images = bench::kMinTimedImages;
    int repeat = 1;
    int threads = 1;
    std::string baseline;
    // overlay
    std::string image;
    std::string detections;
};

fs::path default_out(const Options& o, const std::string& what)
{
    if (!o.out.empty()) {
        return o.out;
    }
    if (o.ckpt.empty()) {
        throw ValidationFailure("--out is required when no --ckpt is given");
    }
    return fs::path(o.ckpt).parent_path() / (what + "_" + o.split);
}

int cmd_synth(const Options& o, const std::vector<std::string>& args, std::ostream& out)
{
    const synth::Family family = synth::parse_family(o.family);
    synth::SynthConfig cfg = synth::SynthConfig::defaults(family);
    cfg.seed = o.seed;
    if (o.image_size) cfg.image_size = *o.image_size;
    if (o.pitch) cfg.pitch = *o.pitch;
    if (o.line_width) cfg.line_width = *o.line_width;
    if (o.noise) cfg.noise_sigma = *o.noise;
    if (!o.classes.empty()) {
        // a class subset is sampled uniformly
        cfg.classes.clear();
        for (const auto& name : o.classes) {
            int id = -1;
            for (const auto& c : synth::defect_classes(family)) {
                if (c.name == name) {
                    id = c.id;
                }
            }
            if (id < 0) {
                throw ValidationFailure("'" + name + "' is not a " + o.family + " defect class");
            }
            cfg.classes.push_back(id);
        }
        cfg.class_mix.assign(cfg.classes.size(), 1.0 / static_cast<double>(cfg.classes.size()));
    }
    synth::SplitCounts counts = o.scale == "full" ? synth::full_counts(family) : synth::desk_counts(family);
    if (o.n_train) counts.train = *o.n_train;
    if (o.n_val) counts.val = *o.n_val;
    if (o.n_test) counts.test = *o.n_test;
    cfg.validate();

    synth::generate_dataset(cfg, counts, o.out);
    for (auto split : {synth::Split::Train, synth::Split::Val, synth::Split::Test}) {
        const auto m = synth::load_manifest(o.out, split);
        out << synth::split_name(split) << ": " << m.entries.size() << " images\n";
    }
    write_run_json(o.out, "synth", args,
                   {{"synth", synth::to_json(cfg)},
                    {"counts", {{"train", counts.train}, {"val", counts.val}, {"test", counts.test}}}});
    out << "dataset written to " << o.out << "\n";
    return kExitOk;
}

int cmd_train(const Options& o, const std::vector<std::string>& args, std::ostream& out, bool is_transfer)
{
    train::TrainConfig cfg = is_transfer ? (o.full ? train::TrainConfig::full_fine_tune() : train::TrainConfig::fine_tune())
                                         : (o.full ? train::TrainConfig::full_fresh() : train::TrainConfig::fresh());
    if (o.epochs) cfg.epochs = *o.epochs;
    if (o.eval_every) cfg.eval_every = *o.eval_every;
    cfg.init_checkpoint = o.init_ckpt;
    cfg.lr = o.lr;
    cfg.batch_size = o.batch_size;
    cfg.seed = o.seed;
    cfg.data_root = o.data;
    cfg.out_dir = o.out;
    cfg.flip_augment = !o.no_flip;
    cfg.eval.confidence_threshold = o.conf_thr;
    cfg.top_k = o.topk;
    cfg.stride = o.stride;
    cfg.keep_epoch_checkpoints = !o.no_epoch_ckpts;
    cfg.validate();
    write_run_json(o.out, is_transfer ? "transfer" : "train", args, train::to_json(cfg));

    const train::TrainResult r = is_transfer ? train::transfer(o.init_ckpt, cfg) : train::train(cfg);
    out << "best epoch " << r.log.best_epoch << ": val mAP@0.5:0.95 " << r.log.best_map << ", mAP@0.5 "
        << r.log.best_map50 << "\n";
    out << "best checkpoint " << r.best_checkpoint.string() << "\n";
    return kExitOk;
}

int cmd_eval(const Options& o, const std::vector<std::string>& args, std::ostream& out)
{
    const fs::path dir = default_out(o, "eval");
    const auto ck = net::load_checkpoint(o.ckpt);
    const auto manifest = synth::load_manifest(o.data, synth::parse_split(o.split));
    eval::EvalConfig ecfg;
    ecfg.confidence_threshold = o.conf_thr;
    ecfg.validate();
    const auto table = net::infer_split(ck.model, manifest, ck.meta.input_mean, ck.meta.input_std,
                                        net::codec_for(ck.model.config(), o.topk));
    const eval::EvalReport report = eval::evaluate(manifest, table, ecfg);

    write_run_json(dir, "eval", args,
                   {{"ckpt", o.ckpt}, {"data", o.data}, {"split", o.split}, {"top_k", o.topk},
                    {"eval", eval::to_json(ecfg)}, {"checkpoint", net::to_json(ck.meta)}});
    codec::write_detections(table, dir / "detections.jsonl");
    write_text(dir / "report.json", eval::to_json(report).dump(2) + "\n");
    const std::string csv = eval::to_csv(report);
    write_text(dir / "report.csv", csv);
    out << csv;
    for (const auto& f : report.flags) {
        out << "note: " << f << "\n";
    }
    return kExitOk;
}

int cmd_infer(const Options& o, const std::vector<std::string>& args, std::ostream& out)
{
    const fs::path dir = default_out(o, "infer");
    const auto ck = net::load_checkpoint(o.ckpt);
    const auto manifest = synth::load_manifest(o.data, synth::parse_split(o.split));
    codec::DetectionTable table = net::infer_split(ck.model, manifest, ck.meta.input_mean, ck.meta.input_std,
                                                   net::codec_for(ck.model.config(), o.topk));
    std::size_t kept = 0;
    for (auto& [name, dets] : table) {
        dets = above(dets, o.conf_thr);
        kept += dets.size();
    }
    write_run_json(dir, "infer", args,
                   {{"ckpt", o.ckpt}, {"data", o.data}, {"split", o.split}, {"top_k", o.topk},
                    {"conf_thr", o.conf_thr}});
    codec::write_detections(table, dir / "detections.jsonl");
    out << kept << " detections on " << table.size() << " images written to " << (dir / "detections.jsonl").string()
        << "\n";
    return kExitOk;
}

int cmd_bench(const Options& o, const std::vector<std::string>& args, std::ostream& out)
{
    const fs::path dir = default_out(o, "bench");
    const auto manifest = synth::load_manifest(o.data, synth::parse_split(o.split));
    std::optional<net::Network<float>> model;
    double mean = manifest.pixel_mean;
    double std = manifest.pixel_std;
    if (!o.ckpt.empty()) {
        auto ck = net::load_checkpoint(o.ckpt);
        mean = ck.meta.input_mean;
        std = ck.meta.input_std;
        model.emplace(std::move(ck.model));
    } else {
        net::ModelConfig mc = net::with_output_stride(net::ModelConfig{}, o.stride);
        mc.in_size = manifest.image_size;
        mc.num_classes = manifest.num_classes();
        model.emplace(mc);
        model->initialize(o.seed);
    }
    bench::BenchConfig cfg;
    cfg.warmup = o.warmup;
    cfg.n_images = o.n_images;
    cfg.repeat = o.repeat;
    cfg.threads = o.threads;
    cfg.top_k = o.topk;
    cfg.validate();
    const bench::BenchReport report = bench::benchmark(*model, manifest, mean, std, cfg);

    json resolved{{"ckpt", o.ckpt.empty() ? json("fresh") : json(o.ckpt)}, {"data", o.data}, {"split", o.split},
                  {"seed", o.seed}, {"model", net::to_json(model->config())},
                  {"bench", {{"warmup", cfg.warmup}, {"n_images", cfg.n_images}, {"repeat", cfg.repeat},
                             {"threads", cfg.threads}, {"top_k", cfg.top_k}}}};
    write_run_json(dir, "bench", args, resolved);
    json rj = bench::to_json(report);
    out << bench::to_table(report);
    if (!o.baseline.empty()) {
        std::ifstream in(o.baseline);
        if (!in) {
            throw IoFailure("cannot open baseline report " + o.baseline);
        }
        json base;
        try {
            base = json::parse(in);
        } catch (const json::exception& e) {
            throw ParseFailure(o.baseline + ": " + e.what());
        }
        const auto cmp = bench::compare_reports(report.stats(), bench::stats_from_json(base));
        rj["comparison_vs_baseline"] = bench::to_json(cmp);
        out << "vs baseline " << o.baseline << " (a = this run, b = baseline)\n";
        for (const auto& row : cmp.rows) {
            out << "  " << row.stat << ": " << row.a << " vs " << row.b << ", faster " << row.faster << " by "
                << row.improvement_pct << "%\n";
        }
        for (const auto& f : cmp.flags) {
            out << "  note: " << f << "\n";
        }
    }
    write_text(dir / "bench.json", rj.dump(2) + "\n");
    return kExitOk;
}

int cmd_overlay(const Options& o, const std::vector<std::string>& args, std::ostream& out)
{
    if (o.ckpt.empty() == o.detections.empty()) {
        throw ValidationFailure("overlay needs exactly one of --ckpt or --detections");
    }
    const fs::path dir = default_out(o, "overlay");
    fs::create_directories(dir);
    const auto manifest = synth::load_manifest(o.data, synth::parse_split(o.split));
    if (manifest.entries.empty()) {
        throw ValidationFailure("split " + o.split + " has no images");
    }
    const synth::ManifestEntry* entry = &manifest.entries.front();
    if (!o.image.empty()) {
        entry = nullptr;
        for (const auto& e : manifest.entries) {
            if (e.image == o.image) {
                entry = &e;
            }
        }
        if (!entry) {
            throw UnknownImage("image '" + o.image + "' is not in the " + o.split + " split");
        }
    }
    const GrayImage image = read_pgm(manifest.image_path(*entry));
    std::vector<Detection> dets;
    if (!o.ckpt.empty()) {
        const auto ck = net::load_checkpoint(o.ckpt);
        dets = net::infer(ck.model, image, ck.meta.input_mean, ck.meta.input_std,
                          net::codec_for(ck.model.config(), o.topk));
    } else {
        const codec::DetectionTable table = codec::read_detections(o.detections);
        if (auto it = table.find(entry->image); it != table.end()) {
            dets = it->second;
        }
    }
    dets = above(dets, o.conf_thr);
    const Overlay ov = overlay(image, dets, entry->boxes);
    const std::string stem = fs::path(entry->image).stem().string();
    write_pgm(ov.image, dir / ("overlay_" + stem + ".pgm"));
    json boxes = ov.boxes;
    boxes["image"] = entry->image;
    write_text(dir / ("overlay_" + stem + ".json"), boxes.dump(2) + "\n");
    write_run_json(dir, "overlay", args,
                   {{"data", o.data}, {"split", o.split}, {"image", entry->image},
                    {"source", o.ckpt.empty() ? o.detections : o.ckpt}, {"conf_thr", o.conf_thr}, {"top_k", o.topk}});
    out << dets.size() << " predictions, " << entry->boxes.size() << " ground-truth boxes drawn to "
        << (dir / ("overlay_" + stem + ".pgm")).string() << "\n";
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Anchor-free defect detection on synthetic SEM line-space images", "semdet"};
    app.require_subcommand(1);
    Options o;

    const auto family_check = CLI::IsMember({"adi", "aei"}, CLI::ignore_case);
    const auto split_check = CLI::IsMember({"train", "val", "test"});
    auto add_common_eval = [&](CLI::App* s) {
        s->add_option("--conf-thr", o.conf_thr, "confidence threshold")->check(CLI::Range(0.0, 1.0));
        s->add_option("--topk", o.topk, "peaks kept by decode")->check(CLI::PositiveNumber);
    };

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    synth_cmd->add_option("--family", o.family, "adi or aei")->required()->check(family_check);
    synth_cmd->add_option("--out", o.out, "dataset root")->required();
    synth_cmd->add_option("--seed", o.seed, "master seed")->default_val(7);
    synth_cmd->add_option("--scale", o.scale, "split sizes")->check(CLI::IsMember({"desk", "full"}));
    synth_cmd->add_option("--train", o.n_train, "train images")->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--val", o.n_val, "val images")->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--test", o.n_test, "test images")->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--image-size", o.image_size, "image side in pixels");
    synth_cmd->add_option("--pitch", o.pitch, "line pitch in pixels");
    synth_cmd->add_option("--line-width", o.line_width, "line width in pixels");
    synth_cmd->add_option("--noise", o.noise, "pixel noise sigma");
    synth_cmd->add_option("--classes", o.classes, "subset of class names, comma separated")->delimiter(',');

    auto add_train = [&](CLI::App* s, bool is_transfer) {
        s->add_option("--data", o.data, "dataset root")->required();
        s->add_option("--out", o.out, "run directory")->required();
        s->add_option("--seed", o.seed, "seed");
        s->add_option("--epochs", o.epochs, "training epochs")->check(CLI::NonNegativeNumber);
        s->add_option("--eval-every", o.eval_every, "epochs between evaluations")->check(CLI::PositiveNumber);
        auto* init = s->add_option("--init-ckpt", o.init_ckpt, "initial weights");
        if (is_transfer) {
            init->required();
        }
        s->add_option("--stride", o.stride, "output stride");
        s->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber);
        s->add_option("--batch-size", o.batch_size, "images per step")->check(CLI::PositiveNumber);
        s->add_flag("--no-flip", o.no_flip, "disable horizontal flips");
        s->add_flag("--full", o.full, "full-length epoch and evaluation cadence");
        s->add_flag("--no-epoch-ckpts", o.no_epoch_ckpts, "keep only best.bin");
        add_common_eval(s);
    };
    auto* train_cmd = app.add_subcommand("train", "train a detector");
    add_train(train_cmd, false);
    auto* transfer_cmd = app.add_subcommand("transfer", "fine-tune from another dataset's checkpoint");
    add_train(transfer_cmd, true);

    auto add_ckpt_split = [&](CLI::App* s, bool ckpt_required) {
        auto* c = s->add_option("--ckpt", o.ckpt, "checkpoint");
        if (ckpt_required) {
            c->required();
        }
        s->add_option("--data", o.data, "dataset root")->required();
        s->add_option("--split", o.split, "train, val or test")->check(split_check);
        s->add_option("--out", o.out, "output directory");
        add_common_eval(s);
    };
    auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a split");
    add_ckpt_split(eval_cmd, true);
    auto* infer_cmd = app.add_subcommand("infer", "write detections for a split");
    add_ckpt_split(infer_cmd, true);

    auto* bench_cmd = app.add_subcommand("bench", "time inference");
    add_ckpt_split(bench_cmd, false);
    bench_cmd->add_option("--seed", o.seed, "init seed when no checkpoint is given");
    bench_cmd->add_option("--stride", o.stride, "output stride when no checkpoint is given");
    bench_cmd->add_option("--warmup", o.warmup, "untimed images")->check(CLI::NonNegativeNumber);
    bench_cmd->add_option("--n-images", o.n_images, "timed images");
    bench_cmd->add_option("--repeat", o.repeat, "timed passes")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--threads", o.threads, "threads while timing")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--baseline", o.baseline, "earlier bench.json to compare against");

    auto* overlay_cmd = app.add_subcommand("overlay", "draw predictions next to ground truth");
    add_ckpt_split(overlay_cmd, false);
    overlay_cmd->add_option("--image", o.image, "image name (default: first of the split)");
    overlay_cmd->add_option("--detections", o.detections, "detections.jsonl instead of a checkpoint");

    std::vector<const char*> argv{"semdet"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return kExitUsage;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(o, args, out);
        if (train_cmd->parsed()) return cmd_train(o, args, out, false);
        if (transfer_cmd->parsed()) return cmd_train(o, args, out, true);
        if (eval_cmd->parsed()) return cmd_eval(o, args, out);
        if (infer_cmd->parsed()) return cmd_infer(o, args, out);
        if (bench_cmd->parsed()) return cmd_bench(o, args, out);
        if (overlay_cmd->parsed()) return cmd_overlay(o, args, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitUsage;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    return run(args, out, err);
}

} // namespace semdet::cli
