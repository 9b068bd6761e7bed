#pragma once

#include "semdet/eval/evaluator.hpp"
#include "semdet/net/loss.hpp"
#include "semdet/net/network.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace semdet::train {

struct TrainConfig {
    int epochs = 200;
    int eval_every = 10;
    std::filesystem::path init_checkpoint;  // empty: fresh initialization
    double lr = 1e-3;
    int batch_size = 8;
    std::uint64_t seed = 1;
    std::filesystem::path data_root;
    std::filesystem::path out_dir;
    bool flip_augment = true;
    eval::EvalConfig eval;
    int top_k = 100;
    int stride = 4;
    net::ModelConfig model;  // in_size and num_classes are taken from the dataset
    net::LossWeights loss;
    bool keep_epoch_checkpoints = true;

    /// Desk-scale fresh run: 200 epochs, eval every 10.
    static TrainConfig fresh();
    /// Desk-scale fine-tune: 100 epochs, eval every 4.
    static TrainConfig fine_tune();
    /// Full-length cadences: 1000/50 fresh, 500/20 fine-tune.
    static TrainConfig full_fresh();
    static TrainConfig full_fine_tune();

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);

struct EvalPoint {
    int epoch = 0;
    std::optional<net::LossBreakdown> train_loss;  // mean over the epoch's images; none at epoch 0
    eval::EvalReport val;
    double seconds = 0.0;  // wall clock since the previous point
};

struct TrainLog {
    std::vector<EvalPoint> points;
    std::vector<double> epoch_seconds;
    int best_epoch = -1;
    double best_map = 0.0;  // val mAP@0.5:0.95 at best_epoch
    double best_map50 = 0.0;
    bool aborted = false;
    std::string abort_reason;
};

nlohmann::json to_json(const EvalPoint& p, bool with_timing = true);
nlohmann::json summary_json(const TrainLog& log, bool with_timing = true);

struct TrainResult {
    TrainLog log;
    std::filesystem::path best_checkpoint;
};

/// Writes <out>/train_log.jsonl (one eval point per line), <out>/summary.json,
/// <out>/ckpt_epoch_<E>.bin at every eval point and <out>/best.bin. On a
/// non-finite loss the log is closed and NonFiniteLoss is rethrown naming
/// the last good checkpoint.
TrainResult train(const TrainConfig& cfg);

/// train() initialized from `source`; parameters are remapped by name and
/// shape, optimizer state starts fresh.
TrainResult transfer(const std::filesystem::path& source, TrainConfig cfg);

/// First eval epoch whose val mAP@0.5:0.95 >= target.
std::optional<int> epochs_to_reach(const TrainLog& log, double target);

} // namespace semdet::train
