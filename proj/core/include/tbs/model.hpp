#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tbs/encoder.hpp"
#include "tbs/episodes.hpp"
#include "tbs/head.hpp"
#include "tbs/tbs_module.hpp"

namespace tbs {

// Every learnable tensor of the pipeline encoder -> TBS -> head.
template <typename T>
struct ModelParams {
    EncoderParams<T> encoder;
    TbsParams<T> tbs;
    HeadParams<T> head;

    static ModelParams init(std::uint64_t seed);

    // Visits (name, tensor) in a fixed order; checkpoints and the optimizer
    // rely on it.
    template <typename F>
    void for_each(F&& f) {
        encoder.for_each(f);
        tbs.for_each(f);
        head.for_each(f);
    }
    template <typename F>
    void for_each(F&& f) const {
        encoder.for_each(f);
        tbs.for_each(f);
        head.for_each(f);
    }

    template <typename U>
    ModelParams<U> cast() const {
        return {encoder.template cast<U>(), tbs.template cast<U>(), head.template cast<U>()};
    }

    std::size_t parameter_count() const;
};

struct EpisodeForward {
    HeadOutput head;
    Var loss;
    std::vector<TbsTrace> traces;  // one per shot
    Mask query_mask;               // feature resolution
    std::vector<Mask> support_masks;
};

// Encodes query and supports, adapts every shot independently, predicts the
// query mask and scores it against the downsampled ground truth.
template <typename T>
EpisodeForward forward_episode(Tape<T>& t, const ModelParams<T>& p, const Episode& ep, const Ablation& ablation);

template <typename T>
T episode_loss(const ModelParams<T>& p, const Episode& ep, const Ablation& ablation);

}  // namespace tbs
