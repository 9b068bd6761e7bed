#include "semdet/common/image.hpp"

#include "semdet/common/errors.hpp"

#include <cctype>
#include <fstream>
#include <string>

namespace semdet {

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height)
{
    if (width <= 0 || height <= 0) {
        throw ValidationFailure("image dimensions must be positive, got " + std::to_string(width) + "x" +
                                std::to_string(height));
    }
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoFailure("cannot open " + path.string() + " for writing");
    }
    out << "P5\n" << image.width() << " " << image.height() << "\n255\n";
    const auto px = image.pixels();
    out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!out) {
        throw IoFailure("write failed for " + path.string());
    }
}

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in, const std::filesystem::path& path)
{
    std::string token;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') {
                c = in.get();
            }
        } else if (std::isspace(c)) {
            if (!token.empty()) {
                return token;
            }
        } else {
            token.push_back(static_cast<char>(c));
        }
        c = in.get();
    }
    if (token.empty()) {
        throw ParseFailure(path.string() + ": truncated PGM header");
    }
    return token;
}

int parse_positive(const std::string& token, const std::filesystem::path& path)
{
    try {
        std::size_t used = 0;
        const int v = std::stoi(token, &used);
        if (used != token.size() || v <= 0) {
            throw ParseFailure(path.string() + ": bad PGM header value '" + token + "'");
        }
        return v;
    } catch (const std::logic_error&) {
        throw ParseFailure(path.string() + ": bad PGM header value '" + token + "'");
    }
}

PgmHeader read_header(std::istream& in, const std::filesystem::path& path)
{
    if (next_token(in, path) != "P5") {
        throw ParseFailure(path.string() + ": not a binary PGM (P5)");
    }
    PgmHeader h;
    h.width = parse_positive(next_token(in, path), path);
    h.height = parse_positive(next_token(in, path), path);
    if (parse_positive(next_token(in, path), path) != 255) {
        throw ParseFailure(path.string() + ": only maxval 255 is supported");
    }
    return h;
}

} // namespace

PgmHeader read_pgm_header(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoFailure("cannot open " + path.string());
    }
    return read_header(in, path);
}

GrayImage read_pgm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoFailure("cannot open " + path.string());
    }
    const PgmHeader h = read_header(in, path);
    GrayImage image(h.width, h.height);
    auto px = image.pixels();
    in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (in.gcount() != static_cast<std::streamsize>(px.size())) {
        throw ParseFailure(path.string() + ": truncated pixel data");
    }
    return image;
}

GrayImage flip_horizontal(const GrayImage& image)
{
    GrayImage out(image.width(), image.height());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            out.at(image.width() - 1 - x, y) = image.at(x, y);
        }
    }
    return out;
}

} // namespace semdet
