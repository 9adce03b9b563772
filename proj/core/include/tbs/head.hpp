#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tbs/layers.hpp"
#include "tbs/mask.hpp"
#include "tbs/tape.hpp"

namespace tbs {

// Mask-value aggregation head. Every query pixel attends over all support
// pixels of all shots and takes the attention-weighted mean of the support
// foreground indicator as its foreground probability.
template <typename T>
struct HeadParams {
    LinearParams<T> q_head;
    LinearParams<T> k_head;

    static HeadParams init(std::size_t channels, Rng& rng);

    template <typename F>
    void for_each(F&& f) {
        f(std::string("head.q.weight"), q_head.weight);
        f(std::string("head.k.weight"), k_head.weight);
    }
    template <typename F>
    void for_each(F&& f) const {
        f(std::string("head.q.weight"), q_head.weight);
        f(std::string("head.k.weight"), k_head.weight);
    }

    template <typename U>
    HeadParams<U> cast() const {
        return {q_head.template cast<U>(), k_head.template cast<U>()};
    }
};

struct ShotFeatures {
    Var features;       // N_s x C (adapted or raw support tokens)
    const Mask* mask;   // feature-resolution support mask
};

struct HeadOutput {
    Var probs;  // {query_height, query_width}, in [0, 1]
    Var attn;   // N_q x (K * N_s), row-stochastic
};

template <typename T>
HeadOutput predict_mask(Tape<T>& t, const HeadParams<T>& hp, Var query, const std::vector<ShotFeatures>& shots,
                        std::size_t query_height, std::size_t query_width);

// Attention mass exchanged between matching query/support pixel groups.
// The *_mass statistics average, over query rows of one group, the total
// attention landing on support columns of the same group. The *_pair
// statistics average the individual attention entries over all such pairs.
// A statistic is absent when its query group is empty.
struct AttentionStats {
    std::optional<double> sf_qf_mass;
    std::optional<double> sb_qb_mass;
    std::optional<double> sf_qf_pair;
    std::optional<double> sb_qb_pair;
    // Mass that query-foreground rows put on support background.
    std::optional<double> sb_from_qf_mass;

    std::optional<double> average() const {
        if (!sf_qf_mass || !sb_qb_mass) return std::nullopt;
        return (*sf_qf_mass + *sb_qb_mass) / 2.0;
    }
};

// attn: N_q x (K * N_s); support masks in shot order.
template <typename T>
AttentionStats averaged_attention(const Tensor<T>& attn, const Mask& query_mask,
                                  const std::vector<Mask>& support_masks);

}  // namespace tbs
