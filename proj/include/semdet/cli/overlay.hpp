#pragma once

#include "semdet/common/box.hpp"
#include "semdet/common/image.hpp"

#include <json.hpp>

#include <span>

namespace semdet::cli {

inline constexpr int kGutter = 4;

/// Pixel rectangle actually drawn for a box, inclusive corners.
struct DrawnRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    friend bool operator==(const DrawnRect&, const DrawnRect&) = default;
};

/// Inclusive pixel bounds of `box` clipped to the image; x1 < x0 when
/// nothing is left.
DrawnRect rect_of(const Box& box, int width, int height);

struct Overlay {
    GrayImage image;      // (2w + gutter) x h: predictions left, ground truth right
    nlohmann::json boxes;  // {"predictions": [...], "ground_truth": [...]}
};

/// 1-px rectangles at 255; predictions carry their score as a small label.
Overlay overlay(const GrayImage& image, std::span<const Detection> detections,
                std::span<const Annotation> ground_truth);

} // namespace semdet::cli
