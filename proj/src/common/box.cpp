#include "semdet/common/box.hpp"

#include "semdet/common/errors.hpp"

#include <algorithm>

namespace semdet {

namespace {

// An axis already inside [0, limit] is returned untouched so that in-bounds
// boxes keep their exact extent.
void clip_axis(double& start, double& extent, double limit)
{
    if (start >= 0.0 && start + extent <= limit) {
        return;
    }
    const double lo = std::clamp(start, 0.0, limit);
    const double hi = std::clamp(start + extent, 0.0, limit);
    start = lo;
    extent = std::max(0.0, hi - lo);
}

} // namespace

Box clip_box(const Box& box, double width, double height)
{
    Box out = box;
    clip_axis(out.x, out.w, width);
    clip_axis(out.y, out.h, height);
    return out;
}

Box flip_box_horizontal(const Box& box, double image_width)
{
    return Box{image_width - box.x - box.w, box.y, box.w, box.h};
}

nlohmann::json to_json(const Annotation& a)
{
    return {{"class", a.class_id}, {"x", a.box.x}, {"y", a.box.y}, {"w", a.box.w}, {"h", a.box.h}};
}

nlohmann::json to_json(const Detection& d)
{
    return {{"class", d.class_id}, {"x", d.box.x}, {"y", d.box.y},
            {"w", d.box.w},        {"h", d.box.h}, {"score", d.score}};
}

namespace {

double number_field(const nlohmann::json& j, const char* key)
{
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw ParseFailure(std::string("box is missing numeric field '") + key + "'");
    }
    return j.at(key).get<double>();
}

} // namespace

Annotation annotation_from_json(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("class") || !j.at("class").is_number_integer()) {
        throw ParseFailure("box is missing integer field 'class'");
    }
    Annotation a;
    a.class_id = j.at("class").get<int>();
    a.box = Box{number_field(j, "x"), number_field(j, "y"), number_field(j, "w"), number_field(j, "h")};
    return a;
}

Detection detection_from_json(const nlohmann::json& j)
{
    const Annotation a = annotation_from_json(j);
    return Detection{a.class_id, a.box, number_field(j, "score")};
}

} // namespace semdet
