#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tbs/tensor.hpp"

namespace tbs {

// Binary H x W mask, row-major, values 0 or 1.
class Mask {
public:
    Mask() = default;
    Mask(std::size_t height, std::size_t width, std::uint8_t fill = 0)
        : height_(height), width_(width), bits_(height * width, fill ? 1 : 0) {}
    Mask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return bits_.size(); }

    std::uint8_t operator[](std::size_t i) const noexcept { return bits_[i]; }
    std::uint8_t at(std::size_t y, std::size_t x) const noexcept { return bits_[y * width_ + x]; }
    void set(std::size_t y, std::size_t x, bool on) noexcept { bits_[y * width_ + x] = on ? 1 : 0; }
    void set(std::size_t i, bool on) noexcept { bits_[i] = on ? 1 : 0; }
    const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

    std::size_t count() const noexcept;
    bool any() const noexcept { return count() > 0; }
    bool all() const noexcept { return count() == size(); }

    // 0/1 values as a flat tensor of shape [H*W].
    template <typename T>
    Tensor<T> as_tensor() const {
        Tensor<T> out({bits_.size()});
        for (std::size_t i = 0; i < bits_.size(); ++i) out[i] = bits_[i] ? T(1) : T(0);
        return out;
    }
    // 1 - mask.
    template <typename T>
    Tensor<T> complement_tensor() const {
        Tensor<T> out({bits_.size()});
        for (std::size_t i = 0; i < bits_.size(); ++i) out[i] = bits_[i] ? T(0) : T(1);
        return out;
    }

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint8_t> bits_;
};

}  // namespace tbs
