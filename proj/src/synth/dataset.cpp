#include "semdet/synth/dataset.hpp"

#include "semdet/common/errors.hpp"
#include "semdet/common/rng.hpp"
#include "semdet/synth/scene.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <string>

namespace semdet::synth {

namespace fs = std::filesystem;

namespace {

constexpr int kDatasetFormat = 1;

std::uint64_t split_stream(Split split)
{
    switch (split) {
    case Split::Train:
        return 0x7472616eULL;
    case Split::Val:
        return 0x76616c00ULL;
    case Split::Test:
        return 0x74657374ULL;
    }
    return 0;
}

std::string image_name(int index)
{
    return std::to_string(index) + ".pgm";
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoFailure("cannot create directory " + dir.string() + (ec ? ": " + ec.message() : ""));
    }
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoFailure("cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw IoFailure("write failed for " + path.string());
    }
}

} // namespace

std::string_view split_name(Split split)
{
    switch (split) {
    case Split::Train:
        return "train";
    case Split::Val:
        return "val";
    case Split::Test:
        return "test";
    }
    return "train";
}

Split parse_split(std::string_view text)
{
    if (text == "train") {
        return Split::Train;
    }
    if (text == "val") {
        return Split::Val;
    }
    if (text == "test") {
        return Split::Test;
    }
    throw ValidationFailure("unknown split '" + std::string(text) + "' (expected train, val or test)");
}

fs::path DatasetManifest::split_dir() const
{
    return root / std::string(split_name(split));
}

fs::path DatasetManifest::image_path(const ManifestEntry& entry) const
{
    return split_dir() / "images" / entry.image;
}

GeneratedImage generate_image(const SynthConfig& cfg, Split split, int index)
{
    Rng rng = make_rng(cfg.seed, split_stream(split), static_cast<std::uint64_t>(index));
    Scene scene = sample_scene(cfg, rng);
    const int count = uniform_int(rng, cfg.defects_min, cfg.defects_max);
    const std::vector<int> active = cfg.active_classes();
    GeneratedImage out;
    for (int k = 0; k < count; ++k) {
        const int label = sample_class(cfg, rng);
        Annotation a = inject_defect(scene, cfg, active[static_cast<std::size_t>(label)], rng);
        a.class_id = label;
        out.boxes.push_back(a);
    }
    out.image = scene.rasterize();
    return out;
}

DatasetManifest generate_dataset(const SynthConfig& cfg, const SplitCounts& counts, const fs::path& root)
{
    cfg.validate();
    if (counts.train <= 0 || counts.val <= 0 || counts.test <= 0) {
        throw ValidationFailure("split counts must be positive");
    }
    ensure_dir(root);

    nlohmann::json splits_json;
    double pixel_mean = 0.0;
    double pixel_std = 1.0;
    DatasetManifest train_manifest;

    for (Split split : {Split::Train, Split::Val, Split::Test}) {
        const int count = split == Split::Train ? counts.train : split == Split::Val ? counts.val : counts.test;
        const fs::path dir = root / std::string(split_name(split));
        ensure_dir(dir / "images");

        std::vector<std::vector<Annotation>> boxes(static_cast<std::size_t>(count));
        std::vector<double> sums(static_cast<std::size_t>(count), 0.0);
        std::vector<double> sums_sq(static_cast<std::size_t>(count), 0.0);
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));

#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < count; ++i) {
            const auto k = static_cast<std::size_t>(i);
            try {
                GeneratedImage g = generate_image(cfg, split, i);
                write_pgm(g.image, dir / "images" / image_name(i));
                double s = 0.0;
                double s2 = 0.0;
                for (std::uint8_t p : g.image.pixels()) {
                    const double v = p / 255.0;
                    s += v;
                    s2 += v * v;
                }
                sums[k] = s;
                sums_sq[k] = s2;
                boxes[k] = std::move(g.boxes);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }

        std::string lines;
        DatasetManifest manifest;
        manifest.root = root;
        manifest.split = split;
        for (int i = 0; i < count; ++i) {
            const auto k = static_cast<std::size_t>(i);
            nlohmann::json row{{"image", image_name(i)}, {"boxes", nlohmann::json::array()}};
            for (const auto& a : boxes[k]) {
                row["boxes"].push_back(to_json(a));
            }
            lines += row.dump() + "\n";
            manifest.entries.push_back(ManifestEntry{image_name(i), boxes[k]});
        }
        write_text(dir / "annotations.jsonl", lines);
        splits_json[std::string(split_name(split))] = count;

        if (split == Split::Train) {
            double s = 0.0;
            double s2 = 0.0;
            for (std::size_t k = 0; k < sums.size(); ++k) {
                s += sums[k];
                s2 += sums_sq[k];
            }
            const double n = static_cast<double>(count) * cfg.image_size * cfg.image_size;
            pixel_mean = s / n;
            pixel_std = std::sqrt(std::max(1e-12, s2 / n - pixel_mean * pixel_mean));
            train_manifest = std::move(manifest);
        }
    }

    const nlohmann::json classes = cfg.class_names();
    const nlohmann::json info{
        {"format", kDatasetFormat},
        {"family", family_name(cfg.family)},
        {"classes", classes},
        {"image_size", cfg.image_size},
        {"seed", cfg.seed},
        {"config", to_json(cfg)},
        {"splits", splits_json},
        {"pixel_mean", pixel_mean},
        {"pixel_std", pixel_std},
    };
    write_text(root / "dataset.json", info.dump(2) + "\n");

    train_manifest.family = cfg.family;
    train_manifest.image_size = cfg.image_size;
    train_manifest.class_names = cfg.class_names();
    train_manifest.pixel_mean = pixel_mean;
    train_manifest.pixel_std = pixel_std;
    return train_manifest;
}

nlohmann::json load_dataset_info(const fs::path& root)
{
    const fs::path path = root / "dataset.json";
    std::ifstream in(path);
    if (!in) {
        throw IoFailure("cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseFailure(path.string() + ": " + e.what());
    }
}

void validate_annotation(const Annotation& a, int image_size, int num_classes, const std::string& where)
{
    const Box& b = a.box;
    auto fail = [&](const std::string& msg) { throw ValidationFailure(where + ": " + msg); };
    if (a.class_id < 0 || a.class_id >= num_classes) {
        fail("class " + std::to_string(a.class_id) + " out of range [0, " + std::to_string(num_classes) + ")");
    }
    if (!std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.w) || !std::isfinite(b.h)) {
        fail("non-finite box");
    }
    if (!(b.w > 0.0) || !(b.h > 0.0)) {
        fail("box has non-positive size " + std::to_string(b.w) + "x" + std::to_string(b.h));
    }
    if (b.x < 0.0 || b.y < 0.0 || b.right() > image_size || b.bottom() > image_size) {
        fail("box exceeds image bounds " + std::to_string(image_size) + "x" + std::to_string(image_size));
    }
}

DatasetManifest load_manifest(const fs::path& root, Split split)
{
    if (!fs::is_directory(root)) {
        throw IoFailure("dataset root " + root.string() + " does not exist");
    }
    const nlohmann::json info = load_dataset_info(root);
    DatasetManifest m;
    m.root = root;
    m.split = split;
    try {
        m.family = parse_family(info.at("family").get<std::string>());
        m.image_size = info.at("image_size").get<int>();
        m.class_names = info.at("classes").get<std::vector<std::string>>();
        m.pixel_mean = info.at("pixel_mean").get<double>();
        m.pixel_std = info.at("pixel_std").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseFailure((root / "dataset.json").string() + ": " + e.what());
    }
    if (m.image_size <= 0 || m.class_names.empty()) {
        throw ValidationFailure((root / "dataset.json").string() + ": bad image_size or empty class table");
    }

    const fs::path ann_path = m.split_dir() / "annotations.jsonl";
    std::ifstream in(ann_path);
    if (!in) {
        throw IoFailure("cannot open " + ann_path.string());
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = ann_path.string() + ":" + std::to_string(line_no);
        ManifestEntry entry;
        try {
            const auto row = nlohmann::json::parse(line);
            entry.image = row.at("image").get<std::string>();
            const auto& boxes = row.at("boxes");
            if (!boxes.is_array()) {
                throw ParseFailure("'boxes' is not an array");
            }
            for (const auto& b : boxes) {
                entry.boxes.push_back(annotation_from_json(b));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseFailure(where + ": " + e.what());
        } catch (const ParseFailure& e) {
            throw ParseFailure(where + ": " + e.what());
        }
        for (std::size_t k = 0; k < entry.boxes.size(); ++k) {
            validate_annotation(entry.boxes[k], m.image_size, m.num_classes(),
                                where + " (" + entry.image + ", box " + std::to_string(k) + ")");
        }
        const fs::path image = m.image_path(entry);
        if (!fs::is_regular_file(image)) {
            throw ValidationFailure(where + ": image file " + image.string() + " does not exist");
        }
        const PgmHeader h = read_pgm_header(image);
        if (h.width != m.image_size || h.height != m.image_size) {
            throw ValidationFailure(where + ": image " + entry.image + " is " + std::to_string(h.width) + "x" +
                                    std::to_string(h.height) + ", expected " + std::to_string(m.image_size));
        }
        m.entries.push_back(std::move(entry));
    }
    return m;
}

} // namespace semdet::synth
