#include "tbs/mask.hpp"

#include <string>

namespace tbs {

Mask::Mask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
    if (bits_.size() != height_ * width_)
        throw DimensionError("mask data length " + std::to_string(bits_.size()) + " does not match " +
                             std::to_string(height_) + "x" + std::to_string(width_));
    for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t Mask::count() const noexcept {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
}

}  // namespace tbs
