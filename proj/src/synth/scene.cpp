#include "semdet/synth/scene.hpp"

#include "semdet/common/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace semdet::synth {

Scene::Scene(const SynthConfig& cfg, int phase, double gain, std::uint64_t noise_seed)
    : size_(cfg.image_size),
      phase_(phase),
      gain_(gain),
      noise_seed_(noise_seed),
      noise_sigma_(cfg.noise_sigma),
      space_level_(cfg.space_level),
      line_level_(cfg.line_level),
      material_(static_cast<std::size_t>(cfg.image_size) * cfg.image_size, 0.0f)
{
    for (int x = 0; x < size_; ++x) {
        // ((x - phase) mod pitch) < line_width marks line columns
        const int r = ((x - phase_) % cfg.pitch + cfg.pitch) % cfg.pitch;
        if (r < cfg.line_width) {
            for (int y = 0; y < size_; ++y) {
                set_material(x, y, 1.0f);
            }
        }
    }
    for (int x0 = phase_; x0 + cfg.line_width <= size_; x0 += cfg.pitch) {
        line_starts_.push_back(x0);
    }
}

GrayImage Scene::rasterize() const
{
    GrayImage image(size_, size_);
    const double mid = 0.5 * (space_level_ + line_level_);
    auto px = image.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        const double level = space_level_ + (line_level_ - space_level_) * material_[i];
        double v = mid + gain_ * (level - mid);
        if (noise_sigma_ > 0.0) {
            v += noise_sigma_ * hashed_normal(noise_seed_, i);
        }
        px[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    return image;
}

Scene sample_scene(const SynthConfig& cfg, Rng& rng)
{
    const int phase = uniform_int(rng, 0, cfg.pitch - 1);
    const double gain = 1.0 + cfg.contrast_jitter * uniform_real(rng, -1.0, 1.0);
    const std::uint64_t noise_seed = rng();
    return Scene(cfg, phase, gain, noise_seed);
}

GrayImage render_pattern(const SynthConfig& cfg, Rng& rng)
{
    return sample_scene(cfg, rng).rasterize();
}

int sample_class(const SynthConfig& cfg, Rng& rng)
{
    std::discrete_distribution<int> dist(cfg.class_mix.begin(), cfg.class_mix.end());
    return dist(rng);
}

namespace {

// Half-open integer rectangle.
struct Rect {
    int x0, y0, x1, y1;
};

bool intersects(const Rect& r, const Box& b)
{
    return r.x0 < b.right() && b.x < r.x1 && r.y0 < b.bottom() && b.y < r.y1;
}

// Material assignments for one defect, applied only if the site is free.
struct Stroke {
    int x0, x1, y0, y1;
    float material;
};

class DefectPainter {
public:
    DefectPainter(Scene& scene, const SynthConfig& cfg, Rng& rng) : scene_(scene), cfg_(cfg), rng_(rng) {}

    Annotation inject(int class_id)
    {
        defect_class(cfg_.family, class_id);
        for (int attempt = 0; attempt < cfg_.placement_retries; ++attempt) {
            strokes_.clear();
            if (!plan(class_id)) {
                continue;
            }
            const Rect site = bounds();
            if (!site_free(site)) {
                continue;
            }
            if (auto box = apply()) {
                scene_.claim(*box);
                return Annotation{class_id, *box};
            }
        }
        throw PlacementFailure("no free site for class '" + defect_class(cfg_.family, class_id).name + "' after " +
                               std::to_string(cfg_.placement_retries) + " attempts");
    }

private:
    int lines() const { return static_cast<int>(scene_.line_starts().size()); }
    int line_start(int i) const { return scene_.line_starts()[static_cast<std::size_t>(i)]; }
    int space_start(int j) const { return line_start(j) + cfg_.line_width; }
    int space_end(int j) const { return line_start(j + 1); }

    int pitch_len(double lo, double hi, int min_px)
    {
        return std::max(min_px, static_cast<int>(std::lround(uniform_real(rng_, lo, hi) * cfg_.pitch)));
    }

    int row_start(int extent) { return uniform_int(rng_, 0, std::max(0, cfg_.image_size - extent)); }

    void paint(int x0, int x1, int y0, int y1, float m) { strokes_.push_back(Stroke{x0, x1, y0, y1, m}); }

    bool plan(int class_id)
    {
        const auto& g = cfg_.geometry;
        const int n = cfg_.image_size;
        if (lines() < 2) {
            return false;
        }
        if (cfg_.family == Family::ADI) {
            switch (class_id) {
            case adi::kGap: {
                const int i = uniform_int(rng_, 0, lines() - 1);
                const int len = pitch_len(g.gap_len_min_pitch, g.gap_len_max_pitch, 2);
                const int y0 = row_start(len);
                paint(line_start(i), line_start(i) + cfg_.line_width, y0, y0 + len, 0.0f);
                return len <= n;
            }
            case adi::kProbableGap: {
                const int i = uniform_int(rng_, 0, lines() - 1);
                const int len = pitch_len(g.pgap_len_min_pitch, g.pgap_len_max_pitch, 2);
                const int y0 = row_start(len);
                const int neck = std::max(1, cfg_.line_width / 4);
                const int x0 = line_start(i);
                if (uniform_int(rng_, 0, 1) == 0) {
                    paint(x0 + neck, x0 + cfg_.line_width, y0, y0 + len, 0.0f);
                } else {
                    paint(x0, x0 + cfg_.line_width - neck, y0, y0 + len, 0.0f);
                }
                return len <= n;
            }
            case adi::kMicrobridge:
                return plan_bridge(uniform_int(rng_, g.thin_bridge_min_px, g.thin_bridge_max_px),
                                   static_cast<float>(g.microbridge_material));
            case adi::kBridge:
                return plan_bridge(pitch_len(g.bridge_min_pitch, g.bridge_max_pitch, 2), 1.0f);
            case adi::kLineCollapse:
                return plan_collapse();
            default:
                return false;
            }
        }
        switch (class_id) {
        case aei::kThinBridge:
            return plan_bridge(uniform_int(rng_, g.thin_bridge_min_px, g.thin_bridge_max_px), 1.0f);
        case aei::kSingleBridge:
            return plan_bridge(pitch_len(g.bridge_min_pitch, g.bridge_max_pitch, 2), 1.0f);
        case aei::kMultiBridgeNonHorizontal:
            return plan_multi_bridge(false);
        case aei::kMultiBridgeHorizontal:
            return plan_multi_bridge(true);
        case aei::kLineCollapse:
            return plan_collapse();
        default:
            return false;
        }
    }

    // Material across the space between line j and j+1.
    bool plan_bridge(int height, float material)
    {
        const int j = uniform_int(rng_, 0, lines() - 2);
        const int y0 = row_start(height);
        paint(space_start(j), space_end(j), y0, y0 + height, material);
        return height <= cfg_.image_size;
    }

    // Line segment displaced sideways until it merges with its neighbour.
    bool plan_collapse()
    {
        const auto& g = cfg_.geometry;
        const int i = uniform_int(rng_, 0, lines() - 1);
        const int dir = uniform_int(rng_, 0, 1) == 0 ? -1 : 1;
        const int len = pitch_len(g.collapse_len_min_pitch, g.collapse_len_max_pitch, 2);
        const int y0 = row_start(len);
        const int j = dir > 0 ? i + 1 : i - 1;
        if (j < 0 || j >= lines() || len > cfg_.image_size) {
            return false;
        }
        const int shift = cfg_.pitch - cfg_.line_width;
        const int x0 = line_start(i);
        const int nx0 = x0 + dir * shift;
        paint(x0, x0 + cfg_.line_width, y0, y0 + len, 0.0f);
        paint(nx0, nx0 + cfg_.line_width, y0, y0 + len, 1.0f);
        return true;
    }

    // Bridges across `spaces` consecutive spaces, level or stepping diagonally.
    bool plan_multi_bridge(bool horizontal)
    {
        const auto& g = cfg_.geometry;
        const int spaces = uniform_int(rng_, g.multi_spaces_min, g.multi_spaces_max);
        if (lines() < spaces + 1) {
            return false;
        }
        const int j = uniform_int(rng_, 0, lines() - 1 - spaces);
        const int height = pitch_len(g.multi_height_min_pitch, g.multi_height_max_pitch, 2);
        int step = 0;
        if (!horizontal) {
            step = pitch_len(g.multi_step_min_pitch, g.multi_step_max_pitch, 1);
            if (uniform_int(rng_, 0, 1) == 0) {
                step = -step;
            }
        }
        const int extent = height + (spaces - 1) * std::abs(step);
        if (extent > cfg_.image_size) {
            return false;
        }
        const int top = row_start(extent);
        const int first = step >= 0 ? top : top + (spaces - 1) * (-step);
        for (int k = 0; k < spaces; ++k) {
            const int y0 = first + k * step;
            paint(space_start(j + k), space_end(j + k), y0, y0 + height, 1.0f);
        }
        return true;
    }

    Rect bounds() const
    {
        Rect r{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), std::numeric_limits<int>::min(),
               std::numeric_limits<int>::min()};
        for (const auto& s : strokes_) {
            r.x0 = std::min(r.x0, s.x0);
            r.y0 = std::min(r.y0, s.y0);
            r.x1 = std::max(r.x1, s.x1);
            r.y1 = std::max(r.y1, s.y1);
        }
        return r;
    }

    bool site_free(const Rect& r) const
    {
        const int n = cfg_.image_size;
        if (strokes_.empty() || r.x0 < 0 || r.y0 < 0 || r.x1 > n || r.y1 > n || r.x0 >= r.x1 || r.y0 >= r.y1) {
            return false;
        }
        const int margin = cfg_.pitch / 2;
        const Rect grown{r.x0 - margin, r.y0 - margin, r.x1 + margin, r.y1 + margin};
        return std::none_of(scene_.occupied().begin(), scene_.occupied().end(),
                            [&](const Box& b) { return intersects(grown, b); });
    }

    // Applies strokes in order; returns the bounding box of changed pixels.
    std::optional<Box> apply()
    {
        int x0 = std::numeric_limits<int>::max();
        int y0 = x0;
        int x1 = std::numeric_limits<int>::min();
        int y1 = x1;
        const auto before = snapshot();
        for (const auto& s : strokes_) {
            for (int y = s.y0; y < s.y1; ++y) {
                for (int x = s.x0; x < s.x1; ++x) {
                    scene_.set_material(x, y, s.material);
                }
            }
        }
        const Rect r = bounds();
        std::size_t k = 0;
        for (int y = r.y0; y < r.y1; ++y) {
            for (int x = r.x0; x < r.x1; ++x, ++k) {
                if (scene_.material(x, y) != before[k]) {
                    x0 = std::min(x0, x);
                    y0 = std::min(y0, y);
                    x1 = std::max(x1, x);
                    y1 = std::max(y1, y);
                }
            }
        }
        if (x1 < x0) {
            return std::nullopt;
        }
        return Box{static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 - x0 + 1),
                   static_cast<double>(y1 - y0 + 1)};
    }

    std::vector<float> snapshot() const
    {
        const Rect r = bounds();
        std::vector<float> out;
        out.reserve(static_cast<std::size_t>(r.x1 - r.x0) * (r.y1 - r.y0));
        for (int y = r.y0; y < r.y1; ++y) {
            for (int x = r.x0; x < r.x1; ++x) {
                out.push_back(scene_.material(x, y));
            }
        }
        return out;
    }

    Scene& scene_;
    const SynthConfig& cfg_;
    Rng& rng_;
    std::vector<Stroke> strokes_;
};

} // namespace

Annotation inject_defect(Scene& scene, const SynthConfig& cfg, int class_id, Rng& rng)
{
    return DefectPainter(scene, cfg, rng).inject(class_id);
}

} // namespace semdet::synth
