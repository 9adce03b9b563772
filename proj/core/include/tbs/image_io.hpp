#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tbs/mask.hpp"
#include "tbs/tensor.hpp"

namespace tbs {

struct GrayImage {
    std::size_t width = 0, height = 0;
    std::vector<std::uint8_t> pixels;
};

struct RgbImage {
    std::size_t width = 0, height = 0;
    std::vector<std::uint8_t> pixels;  // r,g,b interleaved
};

// Binary P5 / P6 writers. Throw IoError naming the path.
void write_pgm(const std::filesystem::path& path, const GrayImage& img);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);

struct ScoreRange {
    double lo = 0, hi = 0;
};

// Linear map of [lo, hi] to 0..255 with nearest upscaling by `factor`. A flat
// plane maps to 255. The range actually used is returned through `range`.
GrayImage score_image(const Tensor<float>& plane, std::size_t factor, ScoreRange& range);

// Gray image from a 1 x H x W (or H x W) intensity tensor in [0, 1], clamped.
RgbImage intensity_rgb(const Tensor<float>& image);

// Paints the one-pixel inner boundary of `mask` in `color`.
void draw_contour(RgbImage& img, const Mask& mask, std::array<std::uint8_t, 3> color);

}  // namespace tbs
