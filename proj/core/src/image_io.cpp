#include "tbs/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace tbs {

namespace {

void write_netpbm(const std::filesystem::path& path, const char* magic, std::size_t w, std::size_t h,
                  const std::vector<std::uint8_t>& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    const std::string header = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
    if (img.pixels.size() != img.width * img.height) throw DimensionError("write_pgm: pixel count mismatch");
    write_netpbm(path, "P5", img.width, img.height, img.pixels);
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
    if (img.pixels.size() != 3 * img.width * img.height) throw DimensionError("write_ppm: pixel count mismatch");
    write_netpbm(path, "P6", img.width, img.height, img.pixels);
}

GrayImage score_image(const Tensor<float>& plane, std::size_t factor, ScoreRange& range) {
    if (plane.rank() != 2) throw DimensionError("score_image: expected an h x w plane, got " + shape_str(plane.shape()));
    if (factor == 0) throw DegenerateInputError("score_image: factor must be positive");
    const auto [mn, mx] = std::minmax_element(plane.span().begin(), plane.span().end());
    range = {*mn, *mx};
    const std::size_t h = plane.dim(0), w = plane.dim(1);
    GrayImage img{w * factor, h * factor, std::vector<std::uint8_t>(w * h * factor * factor)};
    const double span = range.hi - range.lo;
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) {
            const double v = plane.at(y / factor, x / factor);
            const double g = span > 0 ? 255.0 * (v - range.lo) / span : 255.0;
            img.pixels[y * img.width + x] = static_cast<std::uint8_t>(std::lround(std::clamp(g, 0.0, 255.0)));
        }
    return img;
}

RgbImage intensity_rgb(const Tensor<float>& image) {
    const std::size_t h = image.dim(image.rank() - 2), w = image.dim(image.rank() - 1);
    if (image.size() != h * w) throw DimensionError("intensity_rgb: expected one channel, got " + shape_str(image.shape()));
    RgbImage out{w, h, std::vector<std::uint8_t>(3 * w * h)};
    for (std::size_t i = 0; i < w * h; ++i) {
        const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(double(image[i]), 0.0, 1.0) * 255.0));
        out.pixels[3 * i] = out.pixels[3 * i + 1] = out.pixels[3 * i + 2] = g;
    }
    return out;
}

void draw_contour(RgbImage& img, const Mask& mask, std::array<std::uint8_t, 3> color) {
    if (mask.width() != img.width || mask.height() != img.height)
        throw DimensionError("draw_contour: mask and image differ in size");
    const std::size_t h = mask.height(), w = mask.width();
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            if (!mask.at(y, x)) continue;
            const bool edge = y == 0 || x == 0 || y + 1 == h || x + 1 == w || !mask.at(y - 1, x) ||
                              !mask.at(y + 1, x) || !mask.at(y, x - 1) || !mask.at(y, x + 1);
            if (!edge) continue;
            std::copy(color.begin(), color.end(), img.pixels.begin() + 3 * (y * w + x));
        }
}

}  // namespace tbs
