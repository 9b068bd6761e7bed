#include "semdet/synth/synth_config.hpp"

#include "semdet/common/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace semdet::synth {

SynthConfig SynthConfig::defaults(Family family)
{
    SynthConfig cfg;
    cfg.family = family;
    if (family == Family::AEI) {
        // Mostly one defect per image; 923 train instances over 920 images.
        cfg.image_size = 480;
        cfg.pitch = 24;
        cfg.line_width = 12;
        cfg.defects_min = 1;
        cfg.defects_max = 1;
        // thin_bridge, single_bridge, multi_bridge_non_horizontal, multi_bridge_horizontal, line_collapse
        const double counts[] = {241, 240, 160, 80, 202};
        cfg.class_mix.assign(std::begin(counts), std::end(counts));
    } else {
        // 2529 train instances over 1053 images, about 2.4 per image.
        cfg.image_size = 1024;
        cfg.pitch = 32;
        cfg.line_width = 16;
        cfg.defects_min = 1;
        cfg.defects_max = 4;
        // gap, p_gap, microbridge, bridge, line_collapse
        const double counts[] = {1046, 315, 380, 238, 550};
        cfg.class_mix.assign(std::begin(counts), std::end(counts));
    }
    const double total = std::accumulate(cfg.class_mix.begin(), cfg.class_mix.end(), 0.0);
    for (double& p : cfg.class_mix) {
        p /= total;
    }
    return cfg;
}

std::vector<int> SynthConfig::active_classes() const
{
    if (!classes.empty()) {
        return classes;
    }
    std::vector<int> all(static_cast<std::size_t>(num_classes(family)));
    std::iota(all.begin(), all.end(), 0);
    return all;
}

std::vector<std::string> SynthConfig::class_names() const
{
    std::vector<std::string> names;
    for (int id : active_classes()) {
        names.push_back(defect_class(family, id).name);
    }
    return names;
}

void SynthConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ValidationFailure("synth config: " + msg); };
    if (image_size <= 0) {
        fail("image_size must be positive");
    }
    if (!(pitch > line_width && line_width > 0)) {
        fail("need pitch > line_width > 0");
    }
    const int min_lines = geometry.multi_spaces_max + 2;
    if (image_size < (min_lines + 1) * pitch) {
        fail("image_size " + std::to_string(image_size) + " holds fewer than " + std::to_string(min_lines) +
             " full lines at pitch " + std::to_string(pitch));
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        fail("noise_sigma must be finite and >= 0");
    }
    if (!(contrast_jitter >= 0.0 && contrast_jitter < 1.0)) {
        fail("contrast_jitter must be in [0, 1)");
    }
    if (space_level < 0 || line_level > 255 || space_level >= line_level) {
        fail("need 0 <= space_level < line_level <= 255");
    }
    if (defects_min < 0 || defects_max < defects_min) {
        fail("need 0 <= defects_min <= defects_max");
    }
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] < 0 || classes[i] >= num_classes(family)) {
            fail("class id " + std::to_string(classes[i]) + " is not a " + std::string(family_name(family)) +
                 " class");
        }
        if (std::count(classes.begin(), classes.begin() + static_cast<long>(i), classes[i])) {
            fail("class id " + std::to_string(classes[i]) + " listed twice");
        }
    }
    const std::size_t active = classes.empty() ? static_cast<std::size_t>(num_classes(family)) : classes.size();
    if (class_mix.size() != active) {
        fail("class_mix needs " + std::to_string(active) + " entries");
    }
    double total = 0.0;
    for (double p : class_mix) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            fail("class_mix entries must be finite and >= 0");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        fail("class_mix must sum to 1 (sums to " + std::to_string(total) + ")");
    }
    if (placement_retries < 1) {
        fail("placement_retries must be >= 1");
    }
    const auto& g = geometry;
    if (g.thin_bridge_min_px < 1 || g.thin_bridge_max_px < g.thin_bridge_min_px) {
        fail("bad thin bridge range");
    }
    if (g.multi_spaces_min < 2 || g.multi_spaces_max < g.multi_spaces_min) {
        fail("multi bridges must cross at least 2 spaces");
    }
    const std::pair<double, double> ranges[] = {
        {g.gap_len_min_pitch, g.gap_len_max_pitch},       {g.pgap_len_min_pitch, g.pgap_len_max_pitch},
        {g.bridge_min_pitch, g.bridge_max_pitch},         {g.collapse_len_min_pitch, g.collapse_len_max_pitch},
        {g.multi_height_min_pitch, g.multi_height_max_pitch}, {g.multi_step_min_pitch, g.multi_step_max_pitch},
    };
    for (const auto& [lo, hi] : ranges) {
        if (!(lo > 0.0 && hi >= lo)) {
            fail("geometry ranges need 0 < min <= max");
        }
    }
    if (!(g.microbridge_material > 0.0 && g.microbridge_material <= 1.0)) {
        fail("microbridge_material must be in (0, 1]");
    }
}

nlohmann::json to_json(const SynthConfig& cfg)
{
    const auto& g = cfg.geometry;
    return {
        {"family", family_name(cfg.family)},
        {"image_size", cfg.image_size},
        {"pitch", cfg.pitch},
        {"line_width", cfg.line_width},
        {"noise_sigma", cfg.noise_sigma},
        {"contrast_jitter", cfg.contrast_jitter},
        {"space_level", cfg.space_level},
        {"line_level", cfg.line_level},
        {"defects_min", cfg.defects_min},
        {"defects_max", cfg.defects_max},
        {"classes", cfg.active_classes()},
        {"class_mix", cfg.class_mix},
        {"seed", cfg.seed},
        {"placement_retries", cfg.placement_retries},
        {"geometry",
         {
             {"gap_len_pitch", {g.gap_len_min_pitch, g.gap_len_max_pitch}},
             {"pgap_len_pitch", {g.pgap_len_min_pitch, g.pgap_len_max_pitch}},
             {"thin_bridge_px", {g.thin_bridge_min_px, g.thin_bridge_max_px}},
             {"microbridge_material", g.microbridge_material},
             {"bridge_pitch", {g.bridge_min_pitch, g.bridge_max_pitch}},
             {"collapse_len_pitch", {g.collapse_len_min_pitch, g.collapse_len_max_pitch}},
             {"multi_spaces", {g.multi_spaces_min, g.multi_spaces_max}},
             {"multi_height_pitch", {g.multi_height_min_pitch, g.multi_height_max_pitch}},
             {"multi_step_pitch", {g.multi_step_min_pitch, g.multi_step_max_pitch}},
         }},
    };
}

SynthConfig synth_config_from_json(const nlohmann::json& j)
{
    try {
        SynthConfig cfg = SynthConfig::defaults(parse_family(j.at("family").get<std::string>()));
        cfg.image_size = j.at("image_size").get<int>();
        cfg.pitch = j.at("pitch").get<int>();
        cfg.line_width = j.at("line_width").get<int>();
        cfg.noise_sigma = j.at("noise_sigma").get<double>();
        cfg.contrast_jitter = j.at("contrast_jitter").get<double>();
        cfg.space_level = j.at("space_level").get<int>();
        cfg.line_level = j.at("line_level").get<int>();
        cfg.defects_min = j.at("defects_min").get<int>();
        cfg.defects_max = j.at("defects_max").get<int>();
        cfg.classes = j.value("classes", std::vector<int>{});
        std::vector<int> all(static_cast<std::size_t>(num_classes(cfg.family)));
        std::iota(all.begin(), all.end(), 0);
        if (cfg.classes == all) {
            cfg.classes.clear();  // the full set is stored explicitly but kept implicit in memory
        }
        cfg.class_mix = j.at("class_mix").get<std::vector<double>>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.placement_retries = j.at("placement_retries").get<int>();
        const auto& g = j.at("geometry");
        auto& d = cfg.geometry;
        auto pair = [&](const char* key, auto& lo, auto& hi) {
            lo = g.at(key).at(0).get<std::decay_t<decltype(lo)>>();
            hi = g.at(key).at(1).get<std::decay_t<decltype(hi)>>();
        };
        pair("gap_len_pitch", d.gap_len_min_pitch, d.gap_len_max_pitch);
        pair("pgap_len_pitch", d.pgap_len_min_pitch, d.pgap_len_max_pitch);
        pair("thin_bridge_px", d.thin_bridge_min_px, d.thin_bridge_max_px);
        d.microbridge_material = g.at("microbridge_material").get<double>();
        pair("bridge_pitch", d.bridge_min_pitch, d.bridge_max_pitch);
        pair("collapse_len_pitch", d.collapse_len_min_pitch, d.collapse_len_max_pitch);
        pair("multi_spaces", d.multi_spaces_min, d.multi_spaces_max);
        pair("multi_height_pitch", d.multi_height_min_pitch, d.multi_height_max_pitch);
        pair("multi_step_pitch", d.multi_step_min_pitch, d.multi_step_max_pitch);
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ParseFailure(std::string("synth config: ") + e.what());
    }
}

SplitCounts desk_counts(Family family)
{
    return family == Family::AEI ? SplitCounts{92, 12, 12} : SplitCounts{105, 12, 15};
}

SplitCounts full_counts(Family family)
{
    return family == Family::AEI ? SplitCounts{920, 120, 120} : SplitCounts{1053, 117, 154};
}

} // namespace semdet::synth
