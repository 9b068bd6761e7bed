#pragma once

#include <json.hpp>

namespace semdet {

/// Axis-aligned box in image pixels; (x, y) is the top-left corner.
struct Box {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double cx() const { return x + 0.5 * w; }
    double cy() const { return y + 0.5 * h; }
    double right() const { return x + w; }
    double bottom() const { return y + h; }
    double area() const { return w * h; }

    friend bool operator==(const Box&, const Box&) = default;
};

struct Annotation {
    int class_id = 0;
    Box box;

    friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Detection {
    int class_id = 0;
    Box box;
    double score = 0.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Clip to [0, width) x [0, height); may produce an empty box.
Box clip_box(const Box& box, double width, double height);

/// Mirror about the vertical axis of an image of the given width.
Box flip_box_horizontal(const Box& box, double image_width);

nlohmann::json to_json(const Annotation& a);
nlohmann::json to_json(const Detection& d);
Annotation annotation_from_json(const nlohmann::json& j);
Detection detection_from_json(const nlohmann::json& j);

} // namespace semdet
