#include "semdet/codec/codec.hpp"

#include "semdet/common/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace semdet::codec {

void CodecConfig::validate() const
{
    if (stride < 1) {
        throw ValidationFailure("codec: stride must be >= 1");
    }
    if (num_classes < 1) {
        throw ValidationFailure("codec: num_classes must be >= 1");
    }
    if (!(min_iou > 0.0 && min_iou < 1.0)) {
        throw ValidationFailure("codec: min_iou must be in (0, 1)");
    }
    if (top_k < 1) {
        throw ValidationFailure("codec: top_k must be >= 1");
    }
    if (!(peak_threshold >= 0.0 && peak_threshold <= 1.0)) {
        throw ValidationFailure("codec: peak_threshold must be in [0, 1]");
    }
}

namespace {

// IoU of a w x h box against itself shifted by d pixels along both axes.
double shifted_iou(double w, double h, double d)
{
    if (d >= w || d >= h) {
        return 0.0;
    }
    const double inter = (w - d) * (h - d);
    return inter / (2.0 * w * h - inter);
}

} // namespace

int gaussian_radius(double box_h, double box_w, double min_iou, int stride)
{
    if (!(box_h > 0.0) || !(box_w > 0.0)) {
        return 0;
    }
    // (w - d)(h - d) >= c with c = 2 t w h / (1 + t); smaller root of the quadratic.
    const double c = 2.0 * min_iou * box_w * box_h / (1.0 + min_iou);
    const double disc = (box_w - box_h) * (box_w - box_h) + 4.0 * c;
    const double d_max = 0.5 * ((box_w + box_h) - std::sqrt(disc));
    int r = std::max(0, static_cast<int>(std::floor(d_max / stride)));
    // Settle rounding at the boundary against the direct overlap test.
    while (r > 0 && shifted_iou(box_w, box_h, r * static_cast<double>(stride)) < min_iou) {
        --r;
    }
    while (shifted_iou(box_w, box_h, (r + 1) * static_cast<double>(stride)) >= min_iou) {
        ++r;
    }
    return r;
}

double gaussian_sigma(int radius)
{
    return std::max((2.0 * radius + 1.0) / 6.0, 1.0 / 3.0);
}

EncodedTarget encode_targets(std::span<const Annotation> annotations, int image_size, const CodecConfig& cfg)
{
    cfg.validate();
    if (image_size <= 0 || image_size % cfg.stride != 0) {
        throw EncodeError("stride " + std::to_string(cfg.stride) + " does not divide image size " +
                          std::to_string(image_size));
    }
    EncodedTarget t;
    t.num_classes = cfg.num_classes;
    t.height = image_size / cfg.stride;
    t.width = t.height;
    t.heatmap.assign(static_cast<std::size_t>(cfg.num_classes) * t.cells(), 0.0f);
    t.offset.assign(2 * t.cells(), 0.0f);
    t.size.assign(2 * t.cells(), 0.0f);
    t.center_mask.assign(t.cells(), 0);

    const double R = cfg.stride;
    for (const auto& a : annotations) {
        const Box& b = a.box;
        if (a.class_id < 0 || a.class_id >= cfg.num_classes) {
            throw EncodeError("annotation class " + std::to_string(a.class_id) + " out of range");
        }
        if (!(b.w > 0.0 && b.h > 0.0) || b.x < 0.0 || b.y < 0.0 || b.right() > image_size ||
            b.bottom() > image_size) {
            throw EncodeError("annotation box outside the image or degenerate");
        }
        const double sx = b.cx() / R;
        const double sy = b.cy() / R;
        const int cx = std::min(static_cast<int>(std::floor(sx)), t.width - 1);
        const int cy = std::min(static_cast<int>(std::floor(sy)), t.height - 1);

        const int radius = gaussian_radius(b.h, b.w, cfg.min_iou, cfg.stride);
        const double sigma = gaussian_sigma(radius);
        const int window = std::max(radius, 1);
        float* channel = t.heatmap.data() + static_cast<std::size_t>(a.class_id) * t.cells();
        for (int dy = -window; dy <= window; ++dy) {
            const int y = cy + dy;
            if (y < 0 || y >= t.height) {
                continue;
            }
            for (int dx = -window; dx <= window; ++dx) {
                const int x = cx + dx;
                if (x < 0 || x >= t.width) {
                    continue;
                }
                const auto v = static_cast<float>(std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)));
                float& cell = channel[static_cast<std::size_t>(y) * t.width + x];
                cell = std::max(cell, v);
            }
        }

        const std::size_t at = static_cast<std::size_t>(cy) * t.width + cx;
        t.offset[at] = static_cast<float>(sx - cx);
        t.offset[t.cells() + at] = static_cast<float>(sy - cy);
        // float rounding of an offset just below 1 must not reach 1
        for (std::size_t k : {at, t.cells() + at}) {
            if (t.offset[k] >= 1.0f) {
                t.offset[k] = std::nextafter(1.0f, 0.0f);
            }
        }
        t.size[at] = static_cast<float>(b.w);
        t.size[t.cells() + at] = static_cast<float>(b.h);
        t.center_mask[at] = 1;
    }
    return t;
}

HeadMaps HeadMaps::of(const EncodedTarget& t)
{
    return HeadMaps{t.num_classes, t.height, t.width, t.heatmap, t.offset, t.size};
}

namespace {

struct Peak {
    float value;
    int channel;
    int row;
    int col;
};

bool peak_order(const Peak& a, const Peak& b)
{
    if (a.value != b.value) {
        return a.value > b.value;
    }
    if (a.channel != b.channel) {
        return a.channel < b.channel;
    }
    if (a.row != b.row) {
        return a.row < b.row;
    }
    return a.col < b.col;
}

} // namespace

std::vector<Detection> decode_detections(const HeadMaps& maps, int image_size, const CodecConfig& cfg,
                                         DecodeStats* stats)
{
    const std::size_t cells = static_cast<std::size_t>(maps.height) * maps.width;
    if (maps.heatmap.size() != static_cast<std::size_t>(maps.num_classes) * cells ||
        maps.offset.size() != 2 * cells || maps.size.size() != 2 * cells) {
        throw ShapeMismatch("decode: head map sizes are inconsistent");
    }
    const auto threshold = static_cast<float>(cfg.peak_threshold);
    const int H = maps.height;
    const int W = maps.width;

    std::vector<Peak> peaks;
    for (int c = 0; c < maps.num_classes; ++c) {
        const float* ch = maps.heatmap.data() + static_cast<std::size_t>(c) * cells;
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const float v = ch[static_cast<std::size_t>(y) * W + x];
                if (!(v > threshold)) {
                    continue;
                }
                bool is_peak = true;
                for (int dy = -1; dy <= 1 && is_peak; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int ny = y + dy;
                        const int nx = x + dx;
                        if ((dx == 0 && dy == 0) || ny < 0 || ny >= H || nx < 0 || nx >= W) {
                            continue;
                        }
                        if (ch[static_cast<std::size_t>(ny) * W + nx] > v) {
                            is_peak = false;
                            break;
                        }
                    }
                }
                if (is_peak) {
                    peaks.push_back(Peak{v, c, y, x});
                }
            }
        }
    }

    const std::size_t keep = std::min(peaks.size(), static_cast<std::size_t>(cfg.top_k));
    if (stats != nullptr) {
        stats->peaks = static_cast<int>(peaks.size());
        stats->candidates = static_cast<int>(keep);
    }
    std::partial_sort(peaks.begin(), peaks.begin() + static_cast<std::ptrdiff_t>(keep), peaks.end(), peak_order);
    peaks.resize(keep);

    std::vector<Detection> out;
    out.reserve(keep);
    const double R = cfg.stride;
    for (const Peak& p : peaks) {
        const std::size_t at = static_cast<std::size_t>(p.row) * W + p.col;
        const double cx = (p.col + static_cast<double>(maps.offset[at])) * R;
        const double cy = (p.row + static_cast<double>(maps.offset[cells + at])) * R;
        const double w = maps.size[at];
        const double h = maps.size[cells + at];
        if (!(w > 0.0 && h > 0.0) || !std::isfinite(cx) || !std::isfinite(cy)) {
            continue;
        }
        const Box box = clip_box(Box{cx - 0.5 * w, cy - 0.5 * h, w, h}, image_size, image_size);
        if (!(box.w > 0.0 && box.h > 0.0)) {
            continue;
        }
        out.push_back(Detection{p.channel, box, std::clamp(static_cast<double>(p.value), 0.0, 1.0)});
    }
    return out;
}

RoundtripResult roundtrip_check(std::span<const Annotation> annotations, int image_size, const CodecConfig& cfg)
{
    CodecConfig dcfg = cfg;
    dcfg.top_k = std::max(cfg.top_k, static_cast<int>(annotations.size()));
    dcfg.peak_threshold = 0.0;
    const EncodedTarget t = encode_targets(annotations, image_size, dcfg);
    const auto dets = decode_detections(HeadMaps::of(t), image_size, dcfg);

    RoundtripResult r;
    r.expected = static_cast<int>(annotations.size());
    std::vector<bool> used(dets.size(), false);
    for (const auto& a : annotations) {
        int best = -1;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < dets.size(); ++k) {
            if (used[k] || dets[k].class_id != a.class_id) {
                continue;
            }
            const double d = std::hypot(dets[k].box.cx() - a.box.cx(), dets[k].box.cy() - a.box.cy());
            if (d < best_dist) {
                best_dist = d;
                best = static_cast<int>(k);
            }
        }
        if (best < 0) {
            continue;
        }
        used[static_cast<std::size_t>(best)] = true;
        ++r.recovered;
        const Box& b = dets[static_cast<std::size_t>(best)].box;
        r.max_center_error = std::max({r.max_center_error, std::abs(b.cx() - a.box.cx()), std::abs(b.cy() - a.box.cy())});
        r.max_size_error = std::max({r.max_size_error, std::abs(b.w - a.box.w), std::abs(b.h - a.box.h)});
    }
    return r;
}

void write_detections(const DetectionTable& table, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoFailure("cannot open " + path.string() + " for writing");
    }
    for (const auto& [image, dets] : table) {
        nlohmann::json row{{"image", image}, {"boxes", nlohmann::json::array()}};
        for (const auto& d : dets) {
            row["boxes"].push_back(to_json(d));
        }
        out << row.dump() << "\n";
    }
    if (!out) {
        throw IoFailure("write failed for " + path.string());
    }
}

DetectionTable read_detections(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoFailure("cannot open " + path.string());
    }
    DetectionTable table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto row = nlohmann::json::parse(line);
            auto& dets = table[row.at("image").get<std::string>()];
            for (const auto& b : row.at("boxes")) {
                dets.push_back(detection_from_json(b));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseFailure(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const ParseFailure& e) {
            throw ParseFailure(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return table;
}

} // namespace semdet::codec
