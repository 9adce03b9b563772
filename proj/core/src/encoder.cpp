#include "tbs/encoder.hpp"

#include "tbs/episodes.hpp"
#include "tbs/ops.hpp"

namespace tbs {

template <typename T>
EncoderParams<T> EncoderParams<T>::init(Rng& rng) {
    EncoderParams p;
    p.patch_embed = init_linear<T>(kPatchSize * kPatchSize, kFeatureChannels, true, rng);
    p.conv1 = init_conv3x3<T>(kFeatureChannels, kFeatureChannels, 2, rng);
    p.conv2 = init_conv3x3<T>(kFeatureChannels, kFeatureChannels, 1, rng);
    return p;
}

template <typename T>
Tensor<T> patchify(const Tensor<T>& image, std::size_t patch) {
    if (image.rank() != 3 || image.dim(0) != 1 || image.dim(1) % patch || image.dim(2) % patch)
        throw DimensionError("patchify: expected 1 x H x W with H, W divisible by " + std::to_string(patch) +
                             ", got " + shape_str(image.shape()));
    const std::size_t H = image.dim(1), W = image.dim(2), gh = H / patch, gw = W / patch;
    Tensor<T> out({gh * gw, patch * patch});
    for (std::size_t py = 0; py < gh; ++py)
        for (std::size_t px = 0; px < gw; ++px)
            for (std::size_t y = 0; y < patch; ++y)
                for (std::size_t x = 0; x < patch; ++x)
                    out[(py * gw + px) * patch * patch + y * patch + x] =
                        image[(py * patch + y) * W + px * patch + x];
    return out;
}

template <typename T>
Var to_tokens(Tape<T>& t, Var feature_map) {
    const auto& F = t.value(feature_map);
    if (F.rank() != 3) throw DimensionError("to_tokens: expected C x H x W, got " + shape_str(F.shape()));
    const std::size_t C = F.dim(0), HW = F.dim(1) * F.dim(2);
    return ops::transpose(t, ops::reshape(t, feature_map, {C, HW}));
}

template <typename T>
Var extract_features(Tape<T>& t, const EncoderParams<T>& p, const Tensor<T>& image) {
    if (image.shape() != Shape{1, kImageSize, kImageSize})
        throw DimensionError("extract_features: expected a 1x64x64 image, got " + shape_str(image.shape()));
    const std::size_t g = kImageSize / kPatchSize;
    const Var patches = t.constant(patchify(image, kPatchSize));
    const Var embedded = ops::relu(t, ops::linear(t, p.patch_embed, patches));  // (g*g) x C
    const Var grid = ops::reshape(t, ops::transpose(t, embedded), {kFeatureChannels, g, g});
    const Var h1 = ops::relu(t, ops::conv2d(t, p.conv1, grid));
    return ops::conv2d(t, p.conv2, h1);
}

template struct EncoderParams<float>;
template struct EncoderParams<double>;
template Tensor<float> patchify(const Tensor<float>&, std::size_t);
template Tensor<double> patchify(const Tensor<double>&, std::size_t);
template Var extract_features(Tape<float>&, const EncoderParams<float>&, const Tensor<float>&);
template Var extract_features(Tape<double>&, const EncoderParams<double>&, const Tensor<double>&);
template Var to_tokens(Tape<float>&, Var);
template Var to_tokens(Tape<double>&, Var);

}  // namespace tbs
