#include "semdet/bench/bench.hpp"

#include "semdet/codec/codec.hpp"
#include "semdet/common/errors.hpp"
#include "semdet/net/inference.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace semdet::bench {

namespace {

using Clock = std::chrono::steady_clock;
static_assert(Clock::is_steady);

double ms_between(Clock::time_point a, Clock::time_point b)
{
    return std::chrono::duration<double, std::milli>(b - a).count();
}

double median_of(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

class ThreadScope {
public:
    explicit ThreadScope(int n) : saved_(omp_get_max_threads()) { omp_set_num_threads(n); }
    ~ThreadScope() { omp_set_num_threads(saved_); }
    ThreadScope(const ThreadScope&) = delete;
    ThreadScope& operator=(const ThreadScope&) = delete;

private:
    int saved_;
};

} // namespace

void BenchConfig::validate() const
{
    if (warmup < 0 || repeat < 1 || threads < 1 || top_k < 1 || anchors_per_cell < 1) {
        throw ValidationFailure("bench config: warmup >= 0, repeat/threads/top_k/anchors >= 1 required");
    }
}

Summary summarize(std::vector<double> values)
{
    Summary s;
    if (values.empty()) {
        return s;
    }
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    s.median = median_of(values);
    // nearest-rank percentile
    s.p95 = values[static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1];
    s.min = values.front();
    s.max = values.back();
    return s;
}

std::map<std::string, double> BenchReport::stats() const
{
    return {{"total_mean_ms", total.mean},     {"total_median_ms", total.median},
            {"total_p95_ms", total.p95},       {"compute_mean_ms", compute.mean},
            {"compute_median_ms", compute.median}, {"compute_p95_ms", compute.p95}};
}

BenchReport benchmark(const net::Network<float>& model, const std::vector<GrayImage>& images, double mean,
                      double std, const BenchConfig& cfg)
{
    cfg.validate();
    if (cfg.n_images < kMinTimedImages) {
        throw InsufficientImages("bench needs at least " + std::to_string(kMinTimedImages) + " timed images, " +
                                 std::to_string(cfg.n_images) + " requested");
    }
    if (static_cast<int>(images.size()) < cfg.n_images) {
        throw InsufficientImages("bench requested " + std::to_string(cfg.n_images) + " images, dataset has " +
                                 std::to_string(images.size()));
    }
    const net::ModelConfig& mc = model.config();
    const codec::CodecConfig codec_cfg = net::codec_for(mc, cfg.top_k);

    BenchReport r;
    r.config = cfg;
    r.input_size = mc.in_size;
    r.stride = mc.stride_out();
    r.heatmap_cells = mc.out_size() * mc.out_size();
    const long grid = mc.in_size / r.stride;
    r.anchor_grid = grid * grid * cfg.anchors_per_cell;

    const ThreadScope threads(cfg.threads);
    const std::size_t n = static_cast<std::size_t>(cfg.n_images);

    auto run_one = [&](const GrayImage& image, double* compute_ms, codec::DecodeStats* stats) {
        const auto t0 = Clock::now();
        const std::vector<float> input = net::normalize_image(image.pixels(), mean, std);
        const auto c0 = Clock::now();
        const net::ForwardPass<float> pass = model.forward(input);
        const net::Tensor<float> heat = pass.heatmap();
        const net::Tensor<float> size = pass.size();
        codec::HeadMaps maps;
        maps.num_classes = mc.num_classes;
        maps.height = mc.out_size();
        maps.width = mc.out_size();
        maps.heatmap = heat.data();
        maps.offset = pass.offset.data();
        maps.size = size.data();
        const std::vector<Detection> dets = codec::decode_detections(maps, mc.in_size, codec_cfg, stats);
        const auto c1 = Clock::now();
        nlohmann::json out = nlohmann::json::array();
        for (const auto& d : dets) {
            out.push_back(to_json(d));
        }
        const std::string serialized = out.dump();
        const auto t1 = Clock::now();
        if (compute_ms) {
            *compute_ms = ms_between(c0, c1);
        }
        return ms_between(t0, t1);
    };

    for (int i = 0; i < cfg.warmup; ++i) {
        run_one(images[static_cast<std::size_t>(i) % n], nullptr, nullptr);
    }

    std::vector<std::vector<double>> totals(n), computes(n);
    r.peaks.assign(n, 0);
    r.candidates.assign(n, 0);
    for (int pass = 0; pass < cfg.repeat; ++pass) {
        for (std::size_t i = 0; i < n; ++i) {
            double c = 0.0;
            codec::DecodeStats st;
            totals[i].push_back(run_one(images[i], &c, &st));
            computes[i].push_back(c);
            r.peaks[i] = st.peaks;
            r.candidates[i] = st.candidates;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double c = median_of(computes[i]);
        // the compute section is nested inside the total section of the same run
        r.total_ms.push_back(std::max(median_of(totals[i]), c));
        r.compute_ms.push_back(c);
    }
    r.total = summarize(r.total_ms);
    r.compute = summarize(r.compute_ms);
    r.max_candidates = *std::max_element(r.candidates.begin(), r.candidates.end());
    r.candidate_ratio = static_cast<double>(r.max_candidates) / static_cast<double>(r.anchor_grid);
    return r;
}

BenchReport benchmark(const net::Network<float>& model, const synth::DatasetManifest& manifest, double mean,
                      double std, const BenchConfig& cfg)
{
    if (manifest.entries.size() < static_cast<std::size_t>(std::max(0, cfg.n_images))) {
        throw InsufficientImages("bench requested " + std::to_string(cfg.n_images) + " images, split has " +
                                 std::to_string(manifest.entries.size()));
    }
    std::vector<GrayImage> images;
    for (int i = 0; i < cfg.n_images; ++i) {
        images.push_back(read_pgm(manifest.image_path(manifest.entries[static_cast<std::size_t>(i)])));
    }
    return benchmark(model, images, mean, std, cfg);
}

namespace {

nlohmann::json summary_json(const Summary& s)
{
    return {{"mean", s.mean}, {"median", s.median}, {"p95", s.p95}, {"min", s.min}, {"max", s.max}};
}

} // namespace

nlohmann::json to_json(const BenchReport& r)
{
    return {{"config",
             {{"warmup", r.config.warmup},
              {"n_images", r.config.n_images},
              {"repeat", r.config.repeat},
              {"threads", r.config.threads},
              {"top_k", r.config.top_k},
              {"anchors_per_cell", r.config.anchors_per_cell}}},
            {"input_size", r.input_size},
            {"stride", r.stride},
            {"heatmap_cells", r.heatmap_cells},
            {"total_ms", summary_json(r.total)},
            {"compute_ms", summary_json(r.compute)},
            {"per_image_total_ms", r.total_ms},
            {"per_image_compute_ms", r.compute_ms},
            {"candidates",
             {{"peaks", r.peaks},
              {"after_top_k", r.candidates},
              {"max_after_top_k", r.max_candidates},
              {"anchor_grid", r.anchor_grid},
              {"ratio", r.candidate_ratio}}}};
}

std::map<std::string, double> stats_from_json(const nlohmann::json& j)
{
    std::map<std::string, double> out;
    for (const char* section : {"total", "compute"}) {
        const std::string key = std::string(section) + "_ms";
        if (!j.contains(key) || !j[key].is_object()) {
            continue;
        }
        for (const char* stat : {"mean", "median", "p95"}) {
            if (j[key].contains(stat) && j[key][stat].is_number()) {
                out[std::string(section) + "_" + stat + "_ms"] = j[key][stat].get<double>();
            }
        }
    }
    return out;
}

std::string to_table(const BenchReport& r)
{
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    os << "input " << r.input_size << "x" << r.input_size << ", stride " << r.stride << ", " << r.config.n_images
       << " images, warmup " << r.config.warmup << ", threads " << r.config.threads << "\n";
    os << "                 mean     median        p95\n";
    auto row = [&](const char* name, const Summary& s) {
        os << name;
        os.width(10);
        os << s.mean << " ";
        os.width(10);
        os << s.median << " ";
        os.width(10);
        os << s.p95 << "\n";
    };
    row("total ms    ", r.total);
    row("compute ms  ", r.compute);
    os << "candidates after top-K (max) " << r.max_candidates << " vs anchor grid " << r.anchor_grid << " (ratio ";
    os.precision(6);
    os << r.candidate_ratio << ")\n";
    return os.str();
}

Comparison compare_reports(const std::map<std::string, double>& a, const std::map<std::string, double>& b)
{
    Comparison c;
    for (const auto& [name, va] : a) {
        auto it = b.find(name);
        if (it == b.end()) {
            c.flags.push_back(name + " missing from report b");
            continue;
        }
        const double vb = it->second;
        ComparisonRow row{name, va, vb, 0.0, "tie"};
        const double slow = std::max(va, vb);
        if (va != vb && slow > 0) {
            row.improvement_pct = (slow - std::min(va, vb)) / slow * 100.0;
            row.faster = va < vb ? "a" : "b";
        }
        c.rows.push_back(row);
    }
    for (const auto& [name, vb] : b) {
        if (!a.count(name)) {
            c.flags.push_back(name + " missing from report a");
        }
    }
    return c;
}

Comparison compare_reports(const BenchReport& a, const BenchReport& b)
{
    return compare_reports(a.stats(), b.stats());
}

nlohmann::json to_json(const Comparison& c)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : c.rows) {
        rows.push_back({{"stat", r.stat}, {"a", r.a}, {"b", r.b}, {"improvement_pct", r.improvement_pct},
                        {"faster", r.faster}});
    }
    return {{"rows", rows}, {"flags", c.flags}};
}

} // namespace semdet::bench
