#pragma once

#include "semdet/codec/codec.hpp"
#include "semdet/common/box.hpp"
#include "semdet/synth/dataset.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace semdet::eval {

/// 0.50, 0.55, ..., 0.95
std::vector<double> default_iou_thresholds();

inline constexpr double kDefaultConfidence = 0.33;

struct EvalConfig {
    std::vector<double> iou_thresholds = default_iou_thresholds();
    double confidence_threshold = kDefaultConfidence;  // detections must score strictly above

    void validate() const;
};

double iou(const Box& a, const Box& b);

/// One surviving detection after the confidence filter, in score order.
struct LabeledDetection {
    double score = 0.0;
    bool true_positive = false;
};

struct MatchResult {
    std::vector<LabeledDetection> detections;  // sorted by score, descending
    int false_negatives = 0;
};

/// Single image, single class. Greedy in score order; each detection takes
/// the unmatched ground truth of highest IoU >= iou_thr (earlier index on
/// ties).
MatchResult match_detections(std::span<const Detection> dets, std::span<const Box> gts, double iou_thr,
                             double confidence_thr);

/// 101-point interpolated AP over detections pooled across images. Input
/// order among equal scores is kept. nullopt when total_gt == 0.
std::optional<double> average_precision(std::vector<LabeledDetection> dets, int total_gt);

struct ClassReport {
    int class_id = 0;
    std::string name;
    int num_gt = 0;
    std::vector<double> ap;  // per IoU threshold; empty when num_gt == 0
    double ap50 = 0.0;       // AP at the first threshold
    double ap_mean = 0.0;    // mean over thresholds
    int tp = 0;              // counts at the first threshold
    int fp = 0;
    int fn = 0;

    bool scored() const { return num_gt > 0; }
};

struct EvalReport {
    EvalConfig config;
    int num_images = 0;
    std::vector<ClassReport> classes;
    double map50 = 0.0;
    double map50_95 = 0.0;
    std::vector<std::string> flags;  // e.g. classes left out of the mean
};

/// Throws UnknownImage when a detection list names an image outside the split.
EvalReport evaluate(const synth::DatasetManifest& manifest, const codec::DetectionTable& detections,
                    const EvalConfig& cfg = {});

nlohmann::json to_json(const EvalConfig& cfg);
nlohmann::json to_json(const EvalReport& report);

/// class,num_gt,AP@0.5:0.95,AP@0.5,tp,fp,fn rows, then an "all" row of mAPs.
std::string to_csv(const EvalReport& report);

} // namespace semdet::eval
