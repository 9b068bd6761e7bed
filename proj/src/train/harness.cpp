#include "semdet/train/harness.hpp"

#include "semdet/codec/codec.hpp"
#include "semdet/common/errors.hpp"
#include "semdet/common/rng.hpp"
#include "semdet/net/checkpoint.hpp"
#include "semdet/net/inference.hpp"
#include "semdet/net/optimizer.hpp"
#include "semdet/synth/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>

namespace semdet::train {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kInitStream = 101;
constexpr std::uint64_t kShuffleStream = 102;
constexpr std::uint64_t kFlipStream = 103;

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

nlohmann::json loss_json(const net::LossBreakdown& l)
{
    return {{"total", l.total}, {"heatmap", l.heatmap}, {"offset", l.offset}, {"size", l.size}};
}

struct Sample {
    GrayImage image;
    std::vector<Annotation> boxes;
};

std::vector<Sample> load_samples(const synth::DatasetManifest& m)
{
    std::vector<Sample> out;
    out.reserve(m.entries.size());
    for (const auto& e : m.entries) {
        out.push_back({read_pgm(m.image_path(e)), e.boxes});
    }
    return out;
}

} // namespace

TrainConfig TrainConfig::fresh()
{
    return {};
}

TrainConfig TrainConfig::fine_tune()
{
    TrainConfig c;
    c.epochs = 100;
    c.eval_every = 4;
    return c;
}

TrainConfig TrainConfig::full_fresh()
{
    TrainConfig c;
    c.epochs = 1000;
    c.eval_every = 50;
    return c;
}

TrainConfig TrainConfig::full_fine_tune()
{
    TrainConfig c;
    c.epochs = 500;
    c.eval_every = 20;
    return c;
}

void TrainConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ValidationFailure("train config: " + msg); };
    if (epochs < 0) {
        fail("epochs must be >= 0");
    }
    if (eval_every < 1) {
        fail("eval_every must be >= 1");
    }
    if (epochs > 0 && epochs < eval_every) {
        fail("epochs (" + std::to_string(epochs) + ") must be >= eval_every (" + std::to_string(eval_every) + ")");
    }
    if (!(lr > 0.0)) {
        fail("lr must be positive");
    }
    if (batch_size < 1) {
        fail("batch_size must be >= 1");
    }
    if (top_k < 1) {
        fail("top_k must be >= 1");
    }
    if (data_root.empty()) {
        fail("no dataset root");
    }
    if (out_dir.empty()) {
        fail("no output directory");
    }
    eval.validate();
    loss.validate();
}

nlohmann::json to_json(const TrainConfig& cfg)
{
    return {{"epochs", cfg.epochs},
            {"eval_every", cfg.eval_every},
            {"init", cfg.init_checkpoint.empty() ? nlohmann::json("fresh") : nlohmann::json(cfg.init_checkpoint.string())},
            {"lr", cfg.lr},
            {"batch_size", cfg.batch_size},
            {"seed", cfg.seed},
            {"data_root", cfg.data_root.string()},
            {"out_dir", cfg.out_dir.string()},
            {"flip_augment", cfg.flip_augment},
            {"eval", eval::to_json(cfg.eval)},
            {"top_k", cfg.top_k},
            {"stride", cfg.stride},
            {"model", net::to_json(cfg.model)},
            {"loss",
             {{"heatmap", cfg.loss.heatmap},
              {"offset", cfg.loss.offset},
              {"size", cfg.loss.size},
              {"alpha", cfg.loss.alpha},
              {"beta", cfg.loss.beta}}},
            {"keep_epoch_checkpoints", cfg.keep_epoch_checkpoints}};
}

nlohmann::json to_json(const EvalPoint& p, bool with_timing)
{
    nlohmann::json j{{"epoch", p.epoch},
                     {"train_loss", p.train_loss ? loss_json(*p.train_loss) : nlohmann::json(nullptr)},
                     {"val", eval::to_json(p.val)}};
    if (with_timing) {
        j["seconds"] = p.seconds;
    }
    return j;
}

nlohmann::json summary_json(const TrainLog& log, bool with_timing)
{
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : log.points) {
        points.push_back({{"epoch", p.epoch}, {"map50_95", p.val.map50_95}, {"map50", p.val.map50}});
    }
    nlohmann::json j{{"best", {{"epoch", log.best_epoch}, {"map50_95", log.best_map}, {"map50", log.best_map50}}},
                     {"points", points},
                     {"aborted", log.aborted}};
    if (log.aborted) {
        j["abort_reason"] = log.abort_reason;
    }
    if (with_timing) {
        j["epoch_seconds"] = log.epoch_seconds;
    }
    return j;
}

TrainResult train(const TrainConfig& cfg)
{
    cfg.validate();
    const synth::DatasetManifest train_set = synth::load_manifest(cfg.data_root, synth::Split::Train);
    const synth::DatasetManifest val_set = synth::load_manifest(cfg.data_root, synth::Split::Val);
    const nlohmann::json info = synth::load_dataset_info(cfg.data_root);

    net::ModelConfig mc = net::with_output_stride(cfg.model, cfg.stride);
    mc.in_size = train_set.image_size;
    mc.num_classes = train_set.num_classes();
    mc.validate();

    const std::uint64_t init_seed = derive_seed(cfg.seed, kInitStream, 0);
    net::Network<float> model(mc);
    if (cfg.init_checkpoint.empty()) {
        model.initialize(init_seed);
    } else {
        model = net::load_checkpoint_into(cfg.init_checkpoint, mc, init_seed);
    }

    const double mean = train_set.pixel_mean;
    const double std = train_set.pixel_std;
    const codec::CodecConfig codec_cfg = net::codec_for(mc, cfg.top_k);
    const std::vector<Sample> train_samples = load_samples(train_set);
    const std::vector<Sample> val_samples = load_samples(val_set);

    fs::create_directories(cfg.out_dir);
    std::ofstream log_file(cfg.out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log_file) {
        throw IoFailure("cannot write " + (cfg.out_dir / "train_log.jsonl").string());
    }

    net::CheckpointMeta meta;
    meta.seed = cfg.seed;
    meta.dataset_id = info.value("family", std::string("?")) + ":seed" + std::to_string(info.value("seed", 0ULL));
    meta.input_mean = mean;
    meta.input_std = std;

    TrainResult result;
    TrainLog& log = result.log;
    result.best_checkpoint = cfg.out_dir / "best.bin";
    fs::path last_checkpoint;
    auto clock = std::chrono::steady_clock::now();

    auto eval_point = [&](int epoch, std::optional<net::LossBreakdown> loss) {
        codec::DetectionTable table;
        for (std::size_t i = 0; i < val_samples.size(); ++i) {
            table[val_set.entries[i].image] = net::infer(model, val_samples[i].image, mean, std, codec_cfg);
        }
        EvalPoint p;
        p.epoch = epoch;
        p.train_loss = loss;
        p.val = eval::evaluate(val_set, table, cfg.eval);
        meta.epoch = epoch;
        meta.extra = {{"val_map50_95", p.val.map50_95}, {"val_map50", p.val.map50}};
        if (cfg.keep_epoch_checkpoints) {
            last_checkpoint = cfg.out_dir / ("ckpt_epoch_" + std::to_string(epoch) + ".bin");
            net::save_checkpoint(model, meta, last_checkpoint);
        }
        if (log.best_epoch < 0 || p.val.map50_95 > log.best_map) {
            log.best_epoch = epoch;
            log.best_map = p.val.map50_95;
            log.best_map50 = p.val.map50;
            net::save_checkpoint(model, meta, result.best_checkpoint);
            if (!cfg.keep_epoch_checkpoints) {
                last_checkpoint = result.best_checkpoint;
            }
        }
        p.seconds = seconds_since(clock);
        clock = std::chrono::steady_clock::now();
        log_file << to_json(p).dump() << '\n';
        log_file.flush();
        log.points.push_back(std::move(p));
    };

    auto write_summary = [&]() {
        nlohmann::json s = summary_json(log);
        s["config"] = to_json(cfg);
        s["config"]["model"] = net::to_json(mc);
        std::ofstream out(cfg.out_dir / "summary.json", std::ios::trunc);
        out << s.dump(2) << '\n';
        if (!out) {
            throw IoFailure("cannot write " + (cfg.out_dir / "summary.json").string());
        }
    };

    eval_point(0, std::nullopt);

    net::Adam opt({cfg.lr}, model);
    const std::size_t n = train_samples.size();
    std::vector<std::size_t> order(n);
    try {
        for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
            const auto t0 = std::chrono::steady_clock::now();
            std::iota(order.begin(), order.end(), std::size_t{0});
            Rng rng = make_rng(cfg.seed, kShuffleStream, static_cast<std::uint64_t>(epoch));
            std::shuffle(order.begin(), order.end(), rng);

            net::LossBreakdown sum;
            for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
                const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
                net::Gradients<float> batch = model.zero_gradients();
                net::Gradients<float> g;
                for (std::size_t k = start; k < stop; ++k) {
                    const Sample& s = train_samples[order[k]];
                    const bool flip =
                        cfg.flip_augment &&
                        (derive_seed(cfg.seed, kFlipStream, static_cast<std::uint64_t>(epoch) * n + order[k]) & 1U);
                    std::vector<float> input;
                    codec::EncodedTarget target;
                    if (flip) {
                        std::vector<Annotation> boxes = s.boxes;
                        for (auto& a : boxes) {
                            a.box = flip_box_horizontal(a.box, mc.in_size);
                        }
                        input = net::normalize_image(flip_horizontal(s.image).pixels(), mean, std);
                        target = codec::encode_targets(boxes, mc.in_size, codec_cfg);
                    } else {
                        input = net::normalize_image(s.image.pixels(), mean, std);
                        target = codec::encode_targets(s.boxes, mc.in_size, codec_cfg);
                    }
                    const net::LossBreakdown l = net::backward<float>(model, input, target, cfg.loss, g);
                    net::accumulate(batch, g);
                    sum.total += l.total;
                    sum.heatmap += l.heatmap;
                    sum.offset += l.offset;
                    sum.size += l.size;
                }
                const float scale = 1.0f / static_cast<float>(stop - start);
                for (auto& t : batch) {
                    for (auto& v : t.data()) {
                        v *= scale;
                    }
                }
                opt.step(model, batch);
            }
            if (n > 0) {
                sum.total /= n;
                sum.heatmap /= n;
                sum.offset /= n;
                sum.size /= n;
            }
            log.epoch_seconds.push_back(seconds_since(t0));
            if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
                eval_point(epoch, sum);
            }
        }
    } catch (const NonFiniteLoss& e) {
        log.aborted = true;
        log.abort_reason = e.what();
        write_summary();
        throw NonFiniteLoss(std::string(e.what()) + "; last good checkpoint: " +
                            (last_checkpoint.empty() ? std::string("none") : last_checkpoint.string()));
    }
    write_summary();
    return result;
}

TrainResult transfer(const fs::path& source, TrainConfig cfg)
{
    if (source.empty()) {
        throw ValidationFailure("transfer: no source checkpoint");
    }
    cfg.init_checkpoint = source;
    return train(cfg);
}

std::optional<int> epochs_to_reach(const TrainLog& log, double target)
{
    for (const auto& p : log.points) {
        if (p.val.map50_95 >= target) {
            return p.epoch;
        }
    }
    return std::nullopt;
}

} // namespace semdet::train
