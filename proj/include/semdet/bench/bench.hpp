#pragma once

#include "semdet/common/image.hpp"
#include "semdet/net/network.hpp"
#include "semdet/synth/dataset.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace semdet::bench {

inline constexpr int kMinTimedImages = 30;

struct BenchConfig {
    int warmup = 10;
    int n_images = 30;
    int repeat = 1;   // timed passes over the same images; per-image time is the median
    int threads = 1;  // OpenMP threads during measurement
    int top_k = 100;
    int anchors_per_cell = 3;

    void validate() const;
};

struct Summary {
    double mean = 0.0;
    double median = 0.0;
    double p95 = 0.0;
    double min = 0.0;
    double max = 0.0;
};

Summary summarize(std::vector<double> values);

struct BenchReport {
    BenchConfig config;
    int input_size = 0;
    int stride = 0;
    int heatmap_cells = 0;
    std::vector<double> total_ms;    // per image: normalize, forward, decode, serialize
    std::vector<double> compute_ms;  // per image: forward + decode
    Summary total;
    Summary compute;
    std::vector<int> peaks;       // per image, local maxima above the decode threshold
    std::vector<int> candidates;  // per image, after top-K
    long anchor_grid = 0;         // (n / R)^2 * anchors_per_cell
    int max_candidates = 0;
    double candidate_ratio = 0.0;  // max_candidates / anchor_grid

    /// Flat name -> value view of the summary statistics.
    std::map<std::string, double> stats() const;
};

/// Throws InsufficientImages when fewer than max(n_images, 30) images are
/// given or n_images < 30.
BenchReport benchmark(const net::Network<float>& model, const std::vector<GrayImage>& images, double mean,
                      double std, const BenchConfig& cfg);

BenchReport benchmark(const net::Network<float>& model, const synth::DatasetManifest& manifest, double mean,
                      double std, const BenchConfig& cfg);

nlohmann::json to_json(const BenchReport& r);

/// Summary statistics present in a serialized report, flattened as in stats().
std::map<std::string, double> stats_from_json(const nlohmann::json& j);
std::string to_table(const BenchReport& r);

struct ComparisonRow {
    std::string stat;
    double a = 0.0;
    double b = 0.0;
    double improvement_pct = 0.0;  // (slower - faster) / slower * 100
    std::string faster;            // "a", "b" or "tie"
};

struct Comparison {
    std::vector<ComparisonRow> rows;
    std::vector<std::string> flags;  // statistics present in only one report
};

Comparison compare_reports(const std::map<std::string, double>& a, const std::map<std::string, double>& b);
Comparison compare_reports(const BenchReport& a, const BenchReport& b);

nlohmann::json to_json(const Comparison& c);

} // namespace semdet::bench
