#include "tbs/tbs_module.hpp"

#include "tbs/ops.hpp"

namespace tbs {

const char* stage_name(ScoreStage s) {
    switch (s) {
        case ScoreStage::query: return "query";
        case ScoreStage::target: return "target";
        case ScoreStage::background: return "background";
        case ScoreStage::refined: return "refined";
        case ScoreStage::pinned: return "pinned";
    }
    return "?";
}

std::string Ablation::label() const {
    if (use_qs && use_ts) return "qs+ts";
    if (use_qs) return "qs";
    if (use_ts) return "ts";
    return "baseline";
}

template <typename T>
TbsParams<T> TbsParams<T>::init(std::size_t channels, Rng& rng) {
    TbsParams p{init_linear<T>(channels, channels, true, rng),      init_linear<T>(channels, channels, true, rng),
                init_linear<T>(channels, channels, true, rng),      init_linear<T>(channels, channels, true, rng),
                init_linear<T>(2, kRefineHidden, true, rng),        init_linear<T>(kRefineHidden, 1, true, rng)};
    return p;
}

SupportSplit split_support(const Mask& feature_mask) {
    SupportSplit s;
    for (std::size_t i = 0; i < feature_mask.size(); ++i)
        (feature_mask[i] == 1 ? s.object_indices : s.background_indices).push_back(i);
    return s;
}

namespace {

template <typename T>
void require_plane(Tape<T>& t, Var support, std::size_t height, std::size_t width, const char* op) {
    if (t.value(support).rows() != height * width)
        throw DimensionError(std::string(op) + ": " + shape_str(t.value(support).shape()) +
                             " support tokens for a " + std::to_string(height) + "x" + std::to_string(width) +
                             " plane");
}

template <typename T>
void require_mask(const ScoreMap& s, const Mask& m, const char* op) {
    if (s.height != m.height() || s.width != m.width())
        throw DimensionError(std::string(op) + ": score plane " + std::to_string(s.height) + "x" +
                             std::to_string(s.width) + " vs mask " + std::to_string(m.height()) + "x" +
                             std::to_string(m.width()));
}

// cos(L(recon), L(V(support))) reshaped to a plane.
template <typename T>
Var relevance(Tape<T>& t, const TbsParams<T>& p, Var recon, Var support, std::size_t height, std::size_t width) {
    const Var projected_recon = ops::linear(t, p.l_head, recon);
    const Var projected_self = ops::linear(t, p.l_head, ops::linear(t, p.v_head, support));
    return ops::reshape(t, ops::cosine_rows(t, projected_recon, projected_self), {height, width});
}

}  // namespace

template <typename T>
ScoreMap query_relevant_score(Tape<T>& t, const TbsParams<T>& p, Var support, Var query, std::size_t height,
                              std::size_t width) {
    require_plane(t, support, height, width, "query_relevant_score");
    const AttentionOutput rec = cross_reconstruct(t, p.heads(), support, query);
    return {relevance(t, p, rec.recon, support, height, width), ScoreStage::query, height, width};
}

template <typename T>
ScoreMap target_relevant_score(Tape<T>& t, const TbsParams<T>& p, Var support, const SupportSplit& split,
                               std::size_t height, std::size_t width) {
    require_plane(t, support, height, width, "target_relevant_score");
    if (split.object_indices.empty())
        throw DegenerateSupportError("target_relevant_score: support mask has no foreground pixel");
    const AttentionOutput rec = cross_reconstruct_rows(t, p.heads(), support, support, split.object_indices);
    return {relevance(t, p, rec.recon, support, height, width), ScoreStage::target, height, width};
}

template <typename T>
ScoreMap background_relevant_score(Tape<T>& t, const ScoreMap& rq, const ScoreMap& rt, const Mask& feature_mask) {
    if (rq.height != rt.height || rq.width != rt.width)
        throw DimensionError("background_relevant_score: query and target planes differ in size");
    require_mask<T>(rq, feature_mask, "background_relevant_score");
    const Tensor<T> keep = feature_mask.complement_tensor<T>().reshaped({rq.height, rq.width});
    const Var diff = ops::sub(t, rq.values, rt.values);
    return {ops::mul_const(t, diff, keep), ScoreStage::background, rq.height, rq.width};
}

template <typename T>
ScoreMap refine_score(Tape<T>& t, const TbsParams<T>& p, const ScoreMap& rb) {
    const std::size_t n = rb.height * rb.width;
    if (n < 2) throw DegenerateInputError("refine_score: score plane needs at least 2 pixels");
    const Var column = ops::reshape(t, rb.values, {n, 1});
    const Var normed = ops::layer_norm(t, column);
    const Var x = ops::concat_cols(t, column, normed);       // n x 2
    const Var hidden = ops::linear(t, p.refine_conv1, x);    // n x 256
    const Var logit = ops::linear(t, p.refine_conv2, hidden);  // n x 1
    const Var refined = ops::reshape(t, ops::sigmoid(t, logit), {rb.height, rb.width});
    return {refined, ScoreStage::refined, rb.height, rb.width};
}

template <typename T>
ScoreMap pin_foreground(Tape<T>& t, const ScoreMap& refined, const Mask& feature_mask) {
    require_mask<T>(refined, feature_mask, "pin_foreground");
    const Tensor<T> keep = feature_mask.complement_tensor<T>().reshaped({refined.height, refined.width});
    const Tensor<T> ones = feature_mask.as_tensor<T>().reshaped({refined.height, refined.width});
    // r * (1 - m) + m: foreground becomes exactly 1 and its gradient is zero.
    const Var pinned = ops::add_const(t, ops::mul_const(t, refined.values, keep), ones);
    return {pinned, ScoreStage::pinned, refined.height, refined.width};
}

template <typename T>
Var adapt_support(Tape<T>& t, Var support, const ScoreMap& pinned) {
    if (t.value(support).rows() != pinned.height * pinned.width)
        throw DimensionError("adapt_support: " + shape_str(t.value(support).shape()) + " tokens for a " +
                             std::to_string(pinned.height) + "x" + std::to_string(pinned.width) + " score plane");
    return ops::scale_rows(t, support, pinned.values);
}

template <typename T>
TbsTrace tbs_forward(Tape<T>& t, const TbsParams<T>& p, Var query, Var support, const Mask& feature_mask,
                     const Ablation& ablation) {
    const SupportSplit split = split_support(feature_mask);
    if (split.object_indices.empty())
        throw DegenerateSupportError("tbs_forward: support mask has no foreground pixel");
    TbsTrace trace;
    if (ablation.bypass()) {
        trace.adapted = support;
        return trace;
    }
    const std::size_t h = feature_mask.height(), w = feature_mask.width();
    auto zeros = [&](ScoreStage stage) {
        return ScoreMap{t.constant(Tensor<T>::zeros({h, w})), stage, h, w};
    };
    ScoreMap rq = zeros(ScoreStage::query);
    ScoreMap rt = zeros(ScoreStage::target);
    if (ablation.use_qs) {
        rq = query_relevant_score(t, p, support, query, h, w);
        trace.query = rq;
    }
    if (ablation.use_ts) {
        rt = target_relevant_score(t, p, support, split, h, w);
        trace.target = rt;
    }
    trace.background = background_relevant_score<T>(t, rq, rt, feature_mask);
    trace.refined = refine_score(t, p, *trace.background);
    trace.pinned = pin_foreground<T>(t, *trace.refined, feature_mask);
    trace.adapted = adapt_support(t, support, *trace.pinned);
    return trace;
}

#define TBS_INSTANTIATE_MODULE(T)                                                                               \
    template struct TbsParams<T>;                                                                               \
    template ScoreMap query_relevant_score(Tape<T>&, const TbsParams<T>&, Var, Var, std::size_t, std::size_t); \
    template ScoreMap target_relevant_score(Tape<T>&, const TbsParams<T>&, Var, const SupportSplit&,           \
                                            std::size_t, std::size_t);                                         \
    template ScoreMap background_relevant_score<T>(Tape<T>&, const ScoreMap&, const ScoreMap&, const Mask&);   \
    template ScoreMap refine_score(Tape<T>&, const TbsParams<T>&, const ScoreMap&);                            \
    template ScoreMap pin_foreground<T>(Tape<T>&, const ScoreMap&, const Mask&);                               \
    template Var adapt_support(Tape<T>&, Var, const ScoreMap&);                                                \
    template TbsTrace tbs_forward(Tape<T>&, const TbsParams<T>&, Var, Var, const Mask&, const Ablation&);

TBS_INSTANTIATE_MODULE(float)
TBS_INSTANTIATE_MODULE(double)

}  // namespace tbs
