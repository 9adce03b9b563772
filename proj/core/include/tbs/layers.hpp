#pragma once

#include <cstddef>
#include <optional>

#include "tbs/random.hpp"
#include "tbs/tensor.hpp"

namespace tbs {

// Fully connected head; also serves as a 1x1 convolution when rows are pixels.
template <typename T>
struct LinearParams {
    Tensor<T> weight;                // out x in
    std::optional<Tensor<T>> bias;   // out

    std::size_t in_features() const { return weight.dim(1); }
    std::size_t out_features() const { return weight.dim(0); }

    template <typename U>
    LinearParams<U> cast() const {
        LinearParams<U> out{weight.template cast<U>(), std::nullopt};
        if (bias) out.bias = bias->template cast<U>();
        return out;
    }
};

// 3x3 convolution, padding 1.
template <typename T>
struct ConvParams {
    Tensor<T> weight;  // out x in x 3 x 3
    Tensor<T> bias;    // out
    std::size_t stride = 1;

    template <typename U>
    ConvParams<U> cast() const {
        return ConvParams<U>{weight.template cast<U>(), bias.template cast<U>(), stride};
    }
};

// Weights uniform in [-a, a], a = sqrt(6 / (fan_in + fan_out)); biases zero.
template <typename T>
LinearParams<T> init_linear(std::size_t in, std::size_t out, bool with_bias, Rng& rng);

template <typename T>
ConvParams<T> init_conv3x3(std::size_t in, std::size_t out, std::size_t stride, Rng& rng);

}  // namespace tbs
