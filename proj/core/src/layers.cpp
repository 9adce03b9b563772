#include "tbs/layers.hpp"

#include <cmath>

namespace tbs {

namespace {

template <typename T>
Tensor<T> glorot(Shape shape, double fan_in, double fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor<T> w(std::move(shape));
    for (auto& v : w.span()) v = static_cast<T>(rng.uniform(-a, a));
    return w;
}

}  // namespace

template <typename T>
LinearParams<T> init_linear(std::size_t in, std::size_t out, bool with_bias, Rng& rng) {
    LinearParams<T> p{glorot<T>({out, in}, double(in), double(out), rng), std::nullopt};
    if (with_bias) p.bias = Tensor<T>::zeros({out});
    return p;
}

template <typename T>
ConvParams<T> init_conv3x3(std::size_t in, std::size_t out, std::size_t stride, Rng& rng) {
    return ConvParams<T>{glorot<T>({out, in, 3, 3}, double(in * 9), double(out * 9), rng), Tensor<T>::zeros({out}),
                         stride};
}

template LinearParams<float> init_linear(std::size_t, std::size_t, bool, Rng&);
template LinearParams<double> init_linear(std::size_t, std::size_t, bool, Rng&);
template ConvParams<float> init_conv3x3(std::size_t, std::size_t, std::size_t, Rng&);
template ConvParams<double> init_conv3x3(std::size_t, std::size_t, std::size_t, Rng&);

}  // namespace tbs
