#include "semdet/cli/overlay.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

namespace semdet::cli {

namespace {

constexpr std::uint8_t kInk = 255;

// 3x5 glyphs, one row per entry, bit 2 = left column
constexpr std::array<std::array<std::uint8_t, 5>, 11> kGlyphs{{
    {7, 5, 5, 5, 7},  // 0
    {2, 6, 2, 2, 7},  // 1
    {7, 1, 7, 4, 7},  // 2
    {7, 1, 7, 1, 7},  // 3
    {5, 5, 7, 1, 1},  // 4
    {7, 4, 7, 1, 7},  // 5
    {7, 4, 7, 5, 7},  // 6
    {7, 1, 1, 1, 1},  // 7
    {7, 5, 7, 5, 7},  // 8
    {7, 5, 7, 1, 7},  // 9
    {0, 0, 0, 0, 2},  // .
}};

void put(GrayImage& img, int x, int y)
{
    if (x >= 0 && y >= 0 && x < img.width() && y < img.height()) {
        img.at(x, y) = kInk;
    }
}

void draw_rect(GrayImage& img, int ox, const DrawnRect& r)
{
    if (r.x1 < r.x0 || r.y1 < r.y0) {
        return;
    }
    for (int x = r.x0; x <= r.x1; ++x) {
        put(img, ox + x, r.y0);
        put(img, ox + x, r.y1);
    }
    for (int y = r.y0; y <= r.y1; ++y) {
        put(img, ox + r.x0, y);
        put(img, ox + r.x1, y);
    }
}

// Text is clipped to the panel [ox, ox + panel_w).
void draw_text(GrayImage& img, int ox, int panel_w, int x, int y, const std::string& text)
{
    for (char ch : text) {
        const int g = ch == '.' ? 10 : ch - '0';
        if (g < 0 || g > 10) {
            continue;
        }
        for (int row = 0; row < 5; ++row) {
            for (int col = 0; col < 3; ++col) {
                if ((kGlyphs[static_cast<std::size_t>(g)][static_cast<std::size_t>(row)] >> (2 - col)) & 1) {
                    const int px = x + col;
                    if (px >= 0 && px < panel_w) {
                        put(img, ox + px, y + row);
                    }
                }
            }
        }
        x += 4;
    }
}

nlohmann::json rect_json(const DrawnRect& r)
{
    return {{"x0", r.x0}, {"y0", r.y0}, {"x1", r.x1}, {"y1", r.y1}};
}

} // namespace

DrawnRect rect_of(const Box& box, int width, int height)
{
    DrawnRect r;
    r.x0 = std::max(0, static_cast<int>(std::floor(box.x)));
    r.y0 = std::max(0, static_cast<int>(std::floor(box.y)));
    r.x1 = std::min(width - 1, static_cast<int>(std::ceil(box.right())) - 1);
    r.y1 = std::min(height - 1, static_cast<int>(std::ceil(box.bottom())) - 1);
    return r;
}

Overlay overlay(const GrayImage& image, std::span<const Detection> detections,
                std::span<const Annotation> ground_truth)
{
    const int w = image.width();
    const int h = image.height();
    Overlay out{GrayImage(2 * w + kGutter, h, 0), {{"predictions", nlohmann::json::array()},
                                                    {"ground_truth", nlohmann::json::array()}}};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            out.image.at(x, y) = image.at(x, y);
            out.image.at(w + kGutter + x, y) = image.at(x, y);
        }
    }
    for (const auto& d : detections) {
        const DrawnRect r = rect_of(clip_box(d.box, w, h), w, h);
        draw_rect(out.image, 0, r);
        char label[16];
        std::snprintf(label, sizeof label, "%.2f", d.score);
        // above the box when there is room, else just inside it
        const int ty = r.y0 >= 6 ? r.y0 - 6 : r.y0 + 2;
        draw_text(out.image, 0, w, r.x0, ty, label);
        nlohmann::json j = rect_json(r);
        j["class"] = d.class_id;
        j["score"] = d.score;
        j["label"] = label;
        out.boxes["predictions"].push_back(std::move(j));
    }
    for (const auto& a : ground_truth) {
        const DrawnRect r = rect_of(clip_box(a.box, w, h), w, h);
        draw_rect(out.image, w + kGutter, r);
        nlohmann::json j = rect_json(r);
        j["class"] = a.class_id;
        out.boxes["ground_truth"].push_back(std::move(j));
    }
    return out;
}

} // namespace semdet::cli
