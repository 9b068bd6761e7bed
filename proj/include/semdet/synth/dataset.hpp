#pragma once

#include "semdet/common/box.hpp"
#include "semdet/common/image.hpp"
#include "semdet/synth/synth_config.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace semdet::synth {

enum class Split { Train, Val, Test };

std::string_view split_name(Split split);
Split parse_split(std::string_view text);

struct ManifestEntry {
    std::string image;  // file name relative to <root>/<split>/images
    std::vector<Annotation> boxes;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
    std::filesystem::path root;
    Split split = Split::Train;
    Family family = Family::AEI;
    int image_size = 0;
    std::vector<std::string> class_names;
    double pixel_mean = 0.0;  // train-split statistics of pixel/255
    double pixel_std = 1.0;
    std::vector<ManifestEntry> entries;

    std::filesystem::path image_path(const ManifestEntry& entry) const;
    std::filesystem::path split_dir() const;
    int num_classes() const { return static_cast<int>(class_names.size()); }

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Rendered image plus its annotations, before anything touches disk.
struct GeneratedImage {
    GrayImage image;
    std::vector<Annotation> boxes;
};

/// Image `index` of `split`: a pure function of (cfg, split, index).
GeneratedImage generate_image(const SynthConfig& cfg, Split split, int index);

/// Writes `<root>/<split>/images/<idx>.pgm`, `<root>/<split>/annotations.jsonl`
/// and `<root>/dataset.json`; returns the train manifest. Images are generated
/// in parallel; file contents do not depend on the thread count.
DatasetManifest generate_dataset(const SynthConfig& cfg, const SplitCounts& counts,
                                 const std::filesystem::path& root);

/// Parses and validates one split. Throws ParseFailure (with file and line)
/// or ValidationFailure (naming the offending annotation).
DatasetManifest load_manifest(const std::filesystem::path& root, Split split);

/// Contents of `<root>/dataset.json`.
nlohmann::json load_dataset_info(const std::filesystem::path& root);

/// Throws ValidationFailure if any box is degenerate, out of bounds or of an
/// unknown class.
void validate_annotation(const Annotation& a, int image_size, int num_classes, const std::string& where);

} // namespace semdet::synth
