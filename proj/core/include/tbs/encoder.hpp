#pragma once

#include <cstddef>
#include <string>

#include "tbs/layers.hpp"
#include "tbs/tape.hpp"

namespace tbs {

inline constexpr std::size_t kPatchSize = 4;
inline constexpr std::size_t kFeatureChannels = 32;

// Desk-scale feature extractor, output stride 8:
//   4x4 patch embedding (16 -> 32) + ReLU      64x64 -> 16x16
//   conv 3x3 stride 2 + ReLU                   16x16 -> 8x8
//   conv 3x3 stride 1                           8x8  -> 8x8
template <typename T>
struct EncoderParams {
    LinearParams<T> patch_embed;
    ConvParams<T> conv1;
    ConvParams<T> conv2;

    static EncoderParams init(Rng& rng);

    template <typename F>
    void for_each(F&& f) {
        visit(*this, f);
    }
    template <typename F>
    void for_each(F&& f) const {
        visit(*this, f);
    }

    template <typename U>
    EncoderParams<U> cast() const {
        return {patch_embed.template cast<U>(), conv1.template cast<U>(), conv2.template cast<U>()};
    }

private:
    template <typename Self, typename F>
    static void visit(Self& self, F& f) {
        f(std::string("encoder.patch.weight"), self.patch_embed.weight);
        f(std::string("encoder.patch.bias"), *self.patch_embed.bias);
        f(std::string("encoder.conv1.weight"), self.conv1.weight);
        f(std::string("encoder.conv1.bias"), self.conv1.bias);
        f(std::string("encoder.conv2.weight"), self.conv2.weight);
        f(std::string("encoder.conv2.bias"), self.conv2.bias);
    }
};

// Non-overlapping p x p patches of a 1 x H x W image, one row per patch in
// h-major order: (H/p * W/p) x p^2.
template <typename T>
Tensor<T> patchify(const Tensor<T>& image, std::size_t patch);

// Returns a C x H/8 x W/8 feature map. Throws DimensionError unless the image
// is 1 x 64 x 64.
template <typename T>
Var extract_features(Tape<T>& t, const EncoderParams<T>& p, const Tensor<T>& image);

// C x H x W -> (H*W) x C.
template <typename T>
Var to_tokens(Tape<T>& t, Var feature_map);

}  // namespace tbs
