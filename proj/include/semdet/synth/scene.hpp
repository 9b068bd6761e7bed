#pragma once

#include "semdet/common/box.hpp"
#include "semdet/common/image.hpp"
#include "semdet/common/rng.hpp"
#include "semdet/synth/synth_config.hpp"

#include <cstdint>
#include <vector>

namespace semdet::synth {

/// Noise-free material layout of one image plus the per-image appearance
/// draws. Material is 0 for space and 1 for line; defects edit the material
/// map, and rasterization applies contrast and a per-pixel noise field that
/// is addressed by pixel index. Two scenes that differ only inside a region
/// therefore rasterize to images that differ only inside that region.
class Scene {
public:
    Scene(const SynthConfig& cfg, int phase, double gain, std::uint64_t noise_seed);

    int size() const { return size_; }
    int phase() const { return phase_; }
    double gain() const { return gain_; }

    float material(int x, int y) const { return material_[static_cast<std::size_t>(y) * size_ + x]; }
    void set_material(int x, int y, float m) { material_[static_cast<std::size_t>(y) * size_ + x] = m; }

    /// Left edge of every line that lies fully inside the image, ascending.
    const std::vector<int>& line_starts() const { return line_starts_; }

    /// Regions claimed by defects injected so far.
    const std::vector<Box>& occupied() const { return occupied_; }
    void claim(const Box& region) { occupied_.push_back(region); }

    GrayImage rasterize() const;

private:
    int size_;
    int phase_;
    double gain_;
    std::uint64_t noise_seed_;
    double noise_sigma_;
    double space_level_;
    double line_level_;
    std::vector<float> material_;
    std::vector<int> line_starts_;
    std::vector<Box> occupied_;
};

/// Draws phase, contrast gain and noise seed; the number of draws does not
/// depend on the noise or jitter settings.
Scene sample_scene(const SynthConfig& cfg, Rng& rng);

/// Vertical line/space pattern with contrast jitter and Gaussian noise.
GrayImage render_pattern(const SynthConfig& cfg, Rng& rng);

/// Draws one defect of `class_id` at a free site and returns its tight
/// bounding box (the bounding rectangle of every modified pixel).
/// Throws PlacementFailure after cfg.placement_retries unsuccessful tries.
Annotation inject_defect(Scene& scene, const SynthConfig& cfg, int class_id, Rng& rng);

/// Draws a class id from cfg.class_mix.
int sample_class(const SynthConfig& cfg, Rng& rng);

} // namespace semdet::synth
