#pragma once

#include "semdet/common/box.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace semdet::codec {

struct CodecConfig {
    int stride = 4;
    int num_classes = 5;
    double min_iou = 0.7;   // displacement tolerance that sets the Gaussian radius
    int top_k = 100;
    double peak_threshold = 0.0;  // peaks must score strictly above this

    void validate() const;
};

/// Stride-R training targets. All maps are row-major, channel-major.
struct EncodedTarget {
    int num_classes = 0;
    int height = 0;
    int width = 0;
    std::vector<float> heatmap;           // C x H x W, values in [0, 1]
    std::vector<float> offset;            // 2 x H x W: (x, y) sub-cell offset in [0, 1)
    std::vector<float> size;              // 2 x H x W: (w, h) in image pixels
    std::vector<std::uint8_t> center_mask;  // H x W

    std::size_t cells() const { return static_cast<std::size_t>(height) * width; }
    float heat(int c, int y, int x) const { return heatmap[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    bool is_center(int y, int x) const { return center_mask[static_cast<std::size_t>(y) * width + x] != 0; }
};

/// Largest r >= 0 such that shifting the box centre by up to r cells
/// (r * stride pixels) along both axes keeps IoU >= min_iou.
int gaussian_radius(double box_h, double box_w, double min_iou, int stride);

/// Gaussian spread (cells) used for a given radius.
double gaussian_sigma(int radius);

/// Throws EncodeError if stride does not divide image_size, or an annotation
/// lies outside the image or has an unknown class.
EncodedTarget encode_targets(std::span<const Annotation> annotations, int image_size, const CodecConfig& cfg);

/// Read-only view of the three prediction maps of one image.
struct HeadMaps {
    int num_classes = 0;
    int height = 0;
    int width = 0;
    std::span<const float> heatmap;  // C x H x W scores in [0, 1]
    std::span<const float> offset;   // 2 x H x W
    std::span<const float> size;     // 2 x H x W, pixels

    static HeadMaps of(const EncodedTarget& t);
};

struct DecodeStats {
    int peaks = 0;       // local maxima scoring above the threshold
    int candidates = 0;  // peaks kept after top-K
};

/// Peak extraction (8-neighbour, >=), pooled top-K across classes, then box
/// construction at each kept peak. Boxes are clipped to the image.
std::vector<Detection> decode_detections(const HeadMaps& maps, int image_size, const CodecConfig& cfg,
                                         DecodeStats* stats = nullptr);

struct RoundtripResult {
    int expected = 0;
    int recovered = 0;  // annotations matched by a decoded detection of the same class
    double max_center_error = 0.0;
    double max_size_error = 0.0;
};

/// decode(encode(annotations)) with K >= |annotations| and threshold 0.
RoundtripResult roundtrip_check(std::span<const Annotation> annotations, int image_size, const CodecConfig& cfg);

/// One line per image: {"image": name, "boxes": [{class, x, y, w, h, score}]}.
using DetectionTable = std::map<std::string, std::vector<Detection>>;
void write_detections(const DetectionTable& table, const std::filesystem::path& path);
DetectionTable read_detections(const std::filesystem::path& path);

} // namespace semdet::codec
