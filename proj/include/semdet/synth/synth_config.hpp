#pragma once

#include "semdet/synth/defect_class.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace semdet::synth {

/// Per-class geometry ranges. Lengths suffixed `_pitch` are multiples of the
/// line pitch; `_px` are absolute pixels. Each drawn value is uniform in
/// [min, max].
struct DefectGeometry {
    double gap_len_min_pitch = 0.6;        // gap: length of the removed line segment
    double gap_len_max_pitch = 1.5;
    double pgap_len_min_pitch = 0.4;       // p_gap: pinched segment leaving a thin neck
    double pgap_len_max_pitch = 1.0;
    int thin_bridge_min_px = 2;            // microbridge / thin_bridge height
    int thin_bridge_max_px = 4;
    double microbridge_material = 0.7;     // partial fill of a microbridge
    double bridge_min_pitch = 0.3;         // bridge / single_bridge height
    double bridge_max_pitch = 0.9;
    double collapse_len_min_pitch = 1.5;   // line_collapse: displaced segment length
    double collapse_len_max_pitch = 4.0;
    int multi_spaces_min = 3;              // multi bridges cross this many spaces
    int multi_spaces_max = 4;
    double multi_height_min_pitch = 0.3;
    double multi_height_max_pitch = 0.6;
    double multi_step_min_pitch = 0.3;     // vertical drift per space, non-horizontal only
    double multi_step_max_pitch = 0.6;

    friend bool operator==(const DefectGeometry&, const DefectGeometry&) = default;
};

struct SynthConfig {
    Family family = Family::AEI;
    int image_size = 480;
    int pitch = 24;
    int line_width = 12;
    double noise_sigma = 8.0;
    double contrast_jitter = 0.15;
    int space_level = 60;
    int line_level = 180;
    int defects_min = 1;
    int defects_max = 1;
    std::vector<int> classes;        // family class ids in use, relabelled 0..k-1; empty: all
    std::vector<double> class_mix;   // one weight per class in use
    std::uint64_t seed = 0;
    int placement_retries = 200;
    DefectGeometry geometry;

    /// Family defaults: image size per family, class mix from the per-class
    /// train-split instance counts of the reference datasets.
    static SynthConfig defaults(Family family);

    /// Family class ids that labels 0..k-1 refer to.
    std::vector<int> active_classes() const;
    std::vector<std::string> class_names() const;

    /// Throws ValidationFailure describing the first violated invariant.
    void validate() const;

    friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

nlohmann::json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);

/// Image counts per split.
struct SplitCounts {
    int train = 0;
    int val = 0;
    int test = 0;
};

/// 10% of the reference split sizes (rounded).
SplitCounts desk_counts(Family family);
/// Reference split sizes.
SplitCounts full_counts(Family family);

} // namespace semdet::synth
