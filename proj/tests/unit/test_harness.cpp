#include "scratch.hpp"
#include "tiny_data.hpp"

#include "semdet/common/errors.hpp"
#include "semdet/net/checkpoint.hpp"
#include "semdet/net/inference.hpp"
#include "semdet/train/harness.hpp"

#include <doctest.h>

#include <fstream>
#include <iterator>

using namespace semdet;
using namespace semdet::train;

namespace {

TrainLog log_of(std::initializer_list<std::pair<int, double>> pts)
{
    TrainLog log;
    for (const auto& [epoch, map] : pts) {
        EvalPoint p;
        p.epoch = epoch;
        p.val.map50_95 = map;
        log.points.push_back(p);
    }
    return log;
}

std::string file_text(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("epochs_to_reach")
{
    const TrainLog log = log_of({{0, 0.0}, {20, 0.1}, {40, 0.3}});
    CHECK(epochs_to_reach(log, 0.25) == 40);
    CHECK_FALSE(epochs_to_reach(log, 0.5).has_value());
    CHECK(epochs_to_reach(log, 0.0) == 0);
    CHECK(epochs_to_reach(log, 0.3) == 40);
    // first crossing, not the best
    CHECK(epochs_to_reach(log_of({{5, 0.4}, {10, 0.2}, {15, 0.5}}), 0.3) == 5);
}

TEST_CASE("protocol defaults")
{
    const TrainConfig f = TrainConfig::fresh();
    CHECK(f.epochs == 200);
    CHECK(f.eval_every == 10);
    CHECK(f.lr == 1e-3);
    CHECK(f.batch_size == 8);
    CHECK(f.top_k == 100);
    CHECK(f.stride == 4);
    CHECK(f.flip_augment);
    CHECK(f.init_checkpoint.empty());
    CHECK(f.eval.confidence_threshold == 0.33);
    CHECK(f.eval.iou_thresholds == eval::default_iou_thresholds());
    const TrainConfig t = TrainConfig::fine_tune();
    CHECK(t.epochs == 100);
    CHECK(t.eval_every == 4);
    CHECK(TrainConfig::full_fresh().epochs == 1000);
    CHECK(TrainConfig::full_fresh().eval_every == 50);
    CHECK(TrainConfig::full_fine_tune().epochs == 500);
    CHECK(TrainConfig::full_fine_tune().eval_every == 20);
    // same ratios at both scales
    CHECK(f.epochs * TrainConfig::full_fresh().eval_every == f.eval_every * TrainConfig::full_fresh().epochs);
    CHECK(t.epochs * TrainConfig::full_fine_tune().eval_every ==
          t.eval_every * TrainConfig::full_fine_tune().epochs);
}

TEST_CASE("config validation")
{
    TrainConfig c = TrainConfig::fresh();
    c.data_root = "d";
    c.out_dir = "o";
    c.validate();
    c.epochs = 5;
    CHECK_THROWS_AS(c.validate(), ValidationFailure);
    c.epochs = 0;
    c.validate();
    c.lr = 0;
    CHECK_THROWS_AS(c.validate(), ValidationFailure);
    c = TrainConfig::fresh();
    CHECK_THROWS_AS(c.validate(), ValidationFailure);
}

TEST_CASE("zero epochs gives a single untrained eval point")
{
    ScratchDir dir("harness");
    make_easy_dataset(dir / "data");
    const auto r = train::train(quick_train(dir / "data", dir / "run", 0));
    REQUIRE(r.log.points.size() == 1);
    CHECK(r.log.points[0].epoch == 0);
    CHECK_FALSE(r.log.points[0].train_loss.has_value());
    CHECK(r.log.best_epoch == 0);
    const auto ck = net::load_checkpoint(r.best_checkpoint);
    CHECK(ck.meta.epoch == 0);
    CHECK(ck.meta.model.num_classes == 2);
    CHECK(ck.meta.model.in_size == 64);
}

TEST_CASE("training is deterministic and the best checkpoint reproduces its score")
{
    ScratchDir dir("harness");
    make_easy_dataset(dir / "data");
    const auto a = train::train(quick_train(dir / "data", dir / "a", 3));
    const auto b = train::train(quick_train(dir / "data", dir / "b", 3));
    CHECK(summary_json(a.log, false) == summary_json(b.log, false));
    CHECK(file_text(a.best_checkpoint) == file_text(b.best_checkpoint));
    for (int e = 0; e <= 3; ++e) {
        const std::string name = "ckpt_epoch_" + std::to_string(e) + ".bin";
        REQUIRE(std::filesystem::exists(dir / ("a/" + name)));
        CHECK(file_text(dir / ("a/" + name)) == file_text(dir / ("b/" + name)));
        net::load_checkpoint(dir / ("a/" + name));
    }

    // log files
    std::ifstream in(dir / "a/train_log.jsonl");
    std::string line;
    int prev = -1, lines = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j["epoch"].get<int>() > prev);
        prev = j["epoch"].get<int>();
        ++lines;
    }
    CHECK(lines == static_cast<int>(a.log.points.size()));
    const auto summary = nlohmann::json::parse(file_text(dir / "a/summary.json"));
    CHECK(summary["best"]["epoch"] == a.log.best_epoch);
    CHECK(summary["config"]["eval"]["confidence_threshold"] == 0.33);

    double best = -1.0;
    for (const auto& p : a.log.points) best = std::max(best, p.val.map50_95);
    CHECK(a.log.best_map == best);

    const auto ck = net::load_checkpoint(a.best_checkpoint);
    const auto val = synth::load_manifest(dir / "data", synth::Split::Val);
    const auto table =
        net::infer_split(ck.model, val, ck.meta.input_mean, ck.meta.input_std, net::codec_for(ck.meta.model));
    const auto rep = eval::evaluate(val, table);
    CHECK(rep.map50_95 == a.log.best_map);
    CHECK(rep.map50 == a.log.best_map50);
}

TEST_CASE("off-grid final epoch is still evaluated")
{
    ScratchDir dir("harness");
    make_easy_dataset(dir / "data", 8, 4, 4);
    auto cfg = quick_train(dir / "data", dir / "run", 3);
    cfg.eval_every = 2;
    const auto r = train::train(cfg);
    REQUIRE(r.log.points.size() == 3);
    CHECK(r.log.points[1].epoch == 2);
    CHECK(r.log.points[2].epoch == 3);
    CHECK(r.log.epoch_seconds.size() == 3);
}

TEST_CASE("transfer from a run's own best checkpoint with no further epochs is idempotent")
{
    ScratchDir dir("harness");
    make_easy_dataset(dir / "data");
    const auto src = train::train(quick_train(dir / "data", dir / "src", 2));
    const auto t = transfer(src.best_checkpoint, quick_train(dir / "data", dir / "t", 0));
    REQUIRE(t.log.points.size() == 1);
    CHECK(t.log.points[0].val.map50_95 == src.log.best_map);
    const auto summary = nlohmann::json::parse(file_text(dir / "t/summary.json"));
    CHECK(summary["config"]["init"] == src.best_checkpoint.string());
    CHECK_THROWS_AS(transfer("", quick_train(dir / "data", dir / "x", 0)), ValidationFailure);
}

TEST_CASE("transfer across class counts reinitializes the class head and runs")
{
    ScratchDir dir("harness");
    make_easy_dataset(dir / "two");
    auto one = easy_synth();
    one.classes = {1};
    one.class_mix = {1.0};
    synth::generate_dataset(one, {8, 4, 4}, dir / "one");
    const auto src = train::train(quick_train(dir / "two", dir / "src", 1));
    const auto t = transfer(src.best_checkpoint, quick_train(dir / "one", dir / "t", 1));
    CHECK(t.log.points.size() == 2);
    CHECK(net::load_checkpoint(t.best_checkpoint).meta.model.num_classes == 1);
}

TEST_CASE("a diverging run aborts with the last good checkpoint named")
{
    ScratchDir dir("harness");
    make_easy_dataset(dir / "data", 8, 4, 4);
    auto cfg = quick_train(dir / "data", dir / "run", 4);
    cfg.lr = 1e30;
    CHECK_THROWS_AS(train::train(cfg), NonFiniteLoss);
    try {
        train::train(cfg);
    } catch (const NonFiniteLoss& e) {
        CHECK(std::string(e.what()).find("ckpt_epoch_0.bin") != std::string::npos);
    }
    const auto summary = nlohmann::json::parse(file_text(dir / "run/summary.json"));
    CHECK(summary["aborted"] == true);
}

}
