#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tbs/attention.hpp"
#include "tbs/layers.hpp"
#include "tbs/mask.hpp"
#include "tbs/random.hpp"
#include "tbs/tape.hpp"

// Task-disruptive background suppression.
//
// For one support shot with features F_S (N_s x C tokens), binary feature mask
// M and query features F_Q (N_q x C):
//
//   R_Q  = cos(L(recon(F_S <- F_Q)),        L(V(F_S)))   query relevance
//   R_T  = cos(L(recon(F_S <- F_S[M=1])),   L(V(F_S)))   target relevance
//   R_B  = (R_Q - R_T) * (1 - M)
//   R~_B = sigmoid(conv1x1(conv1x1([R_B, layer_norm(R_B)])))
//   R._B = R~_B where M = 0, 1 where M = 1
//   A_S  = R._B * F_S                                     (broadcast over channels)
//
// The q/k/v/l projections are one set of parameters used by both scores.
namespace tbs {

inline constexpr std::size_t kRefineHidden = 256;

template <typename T>
struct TbsParams {
    LinearParams<T> q_head;
    LinearParams<T> k_head;
    LinearParams<T> v_head;
    LinearParams<T> l_head;
    LinearParams<T> refine_conv1;  // 2 -> 256
    LinearParams<T> refine_conv2;  // 256 -> 1

    static TbsParams init(std::size_t channels, Rng& rng);

    AttentionHeads<T> heads() const { return {q_head, k_head, v_head}; }

    template <typename F>
    void for_each(F&& f) {
        visit(*this, f);
    }
    template <typename F>
    void for_each(F&& f) const {
        visit(*this, f);
    }

    template <typename U>
    TbsParams<U> cast() const {
        return {q_head.template cast<U>(),       k_head.template cast<U>(),
                v_head.template cast<U>(),       l_head.template cast<U>(),
                refine_conv1.template cast<U>(), refine_conv2.template cast<U>()};
    }

private:
    template <typename Self, typename F>
    static void visit(Self& self, F& f) {
        auto lin = [&f](const std::string& name, auto& p) {
            f(name + ".weight", p.weight);
            if (p.bias) f(name + ".bias", *p.bias);
        };
        lin("tbs.q", self.q_head);
        lin("tbs.k", self.k_head);
        lin("tbs.v", self.v_head);
        lin("tbs.l", self.l_head);
        lin("tbs.refine1", self.refine_conv1);
        lin("tbs.refine2", self.refine_conv2);
    }
};

enum class ScoreStage { query, target, background, refined, pinned };

const char* stage_name(ScoreStage s);

// Score plane of shape {H, W} recorded on a tape.
struct ScoreMap {
    Var values;
    ScoreStage stage;
    std::size_t height;
    std::size_t width;
};

struct SupportSplit {
    std::vector<std::size_t> object_indices;
    std::vector<std::size_t> background_indices;
};

// Which score terms enter R_B. Both off bypasses the module entirely.
struct Ablation {
    bool use_qs = true;
    bool use_ts = true;

    bool bypass() const noexcept { return !use_qs && !use_ts; }
    std::string label() const;
    friend bool operator==(const Ablation&, const Ablation&) = default;
};

SupportSplit split_support(const Mask& feature_mask);

template <typename T>
ScoreMap query_relevant_score(Tape<T>& t, const TbsParams<T>& p, Var support, Var query, std::size_t height,
                              std::size_t width);

// Throws DegenerateSupportError when the split has no object pixels.
template <typename T>
ScoreMap target_relevant_score(Tape<T>& t, const TbsParams<T>& p, Var support, const SupportSplit& split,
                               std::size_t height, std::size_t width);

template <typename T>
ScoreMap background_relevant_score(Tape<T>& t, const ScoreMap& rq, const ScoreMap& rt, const Mask& feature_mask);

template <typename T>
ScoreMap refine_score(Tape<T>& t, const TbsParams<T>& p, const ScoreMap& rb);

// No gradient reaches the refined scores at foreground positions.
template <typename T>
ScoreMap pin_foreground(Tape<T>& t, const ScoreMap& refined, const Mask& feature_mask);

// support: N_s x C tokens; returns N_s x C.
template <typename T>
Var adapt_support(Tape<T>& t, Var support, const ScoreMap& pinned);

struct TbsTrace {
    Var adapted;  // A_S, N_s x C
    // Absent when the module is bypassed, or for a term the ablation removes.
    std::optional<ScoreMap> query;
    std::optional<ScoreMap> target;
    std::optional<ScoreMap> background;
    std::optional<ScoreMap> refined;
    std::optional<ScoreMap> pinned;
};

// Full pipeline for one support shot. Removed score terms are replaced by
// zeros before the subtraction.
template <typename T>
TbsTrace tbs_forward(Tape<T>& t, const TbsParams<T>& p, Var query, Var support, const Mask& feature_mask,
                     const Ablation& ablation);

}  // namespace tbs
