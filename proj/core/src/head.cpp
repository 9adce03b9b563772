#include "tbs/head.hpp"

#include <cmath>

#include "tbs/ops.hpp"

namespace tbs {

template <typename T>
HeadParams<T> HeadParams<T>::init(std::size_t channels, Rng& rng) {
    return {init_linear<T>(channels, channels, false, rng), init_linear<T>(channels, channels, false, rng)};
}

template <typename T>
HeadOutput predict_mask(Tape<T>& t, const HeadParams<T>& hp, Var query, const std::vector<ShotFeatures>& shots,
                        std::size_t query_height, std::size_t query_width) {
    if (shots.empty()) throw EmptyContextError("predict_mask: no support shots");
    const auto& Q = t.value(query);
    if (Q.rank() != 2 || Q.dim(0) != query_height * query_width)
        throw DimensionError("predict_mask: query tokens " + shape_str(Q.shape()) + " for a " +
                             std::to_string(query_height) + "x" + std::to_string(query_width) + " plane");
    std::vector<Var> keys;
    std::vector<T> indicator;
    for (const auto& shot : shots) {
        const auto& S = t.value(shot.features);
        if (shot.mask == nullptr || S.rank() != 2 || S.dim(0) != shot.mask->size())
            throw DimensionError("predict_mask: support tokens " + shape_str(S.shape()) +
                                 " do not match the support mask");
        if (S.dim(1) != Q.dim(1))
            throw DimensionError("predict_mask: query width " + std::to_string(Q.dim(1)) +
                                 " differs from support width " + std::to_string(S.dim(1)));
        keys.push_back(ops::linear(t, hp.k_head, shot.features));
        for (auto b : shot.mask->bits()) indicator.push_back(b ? T(1) : T(0));
    }
    const std::size_t channels = Q.dim(1);
    const Var q = ops::linear(t, hp.q_head, query);
    const Var k = keys.size() == 1 ? keys[0] : ops::concat_rows(t, keys);
    const Var logits = ops::scale(t, ops::matmul_nt(t, q, k), T(1) / std::sqrt(T(channels)));
    const Var attn = ops::softmax_rows(t, logits);
    const std::size_t n = indicator.size();
    const Var values = t.constant(Tensor<T>({n, 1}, std::move(indicator)));
    const Var probs = ops::reshape(t, ops::matmul(t, attn, values), {query_height, query_width});
    return {probs, attn};
}

template <typename T>
AttentionStats averaged_attention(const Tensor<T>& attn, const Mask& query_mask,
                                  const std::vector<Mask>& support_masks) {
    std::vector<std::uint8_t> column_fg;
    for (const auto& m : support_masks) column_fg.insert(column_fg.end(), m.bits().begin(), m.bits().end());
    if (attn.rank() != 2 || attn.dim(0) != query_mask.size() || attn.dim(1) != column_fg.size())
        throw DimensionError("averaged_attention: attention " + shape_str(attn.shape()) +
                             " does not match the query/support masks");
    const std::size_t nq = attn.dim(0), ns = attn.dim(1);
    std::size_t sf_cols = 0;
    for (auto b : column_fg) sf_cols += b;
    const std::size_t sb_cols = ns - sf_cols;

    double fg_mass = 0, bg_mass = 0, fg_to_bg = 0, fg_pair = 0, bg_pair = 0;
    std::size_t fg_rows = 0, bg_rows = 0;
    for (std::size_t i = 0; i < nq; ++i) {
        double on_fg = 0, on_bg = 0;
        for (std::size_t j = 0; j < ns; ++j) (column_fg[j] ? on_fg : on_bg) += attn[i * ns + j];
        if (query_mask[i]) {
            ++fg_rows;
            fg_mass += on_fg;
            fg_to_bg += on_bg;
            fg_pair += on_fg;
        } else {
            ++bg_rows;
            bg_mass += on_bg;
            bg_pair += on_bg;
        }
    }
    AttentionStats s;
    if (fg_rows) {
        s.sf_qf_mass = fg_mass / double(fg_rows);
        s.sb_from_qf_mass = fg_to_bg / double(fg_rows);
        if (sf_cols) s.sf_qf_pair = fg_pair / double(fg_rows * sf_cols);
    }
    if (bg_rows) {
        s.sb_qb_mass = bg_mass / double(bg_rows);
        if (sb_cols) s.sb_qb_pair = bg_pair / double(bg_rows * sb_cols);
    }
    return s;
}

template struct HeadParams<float>;
template struct HeadParams<double>;
template HeadOutput predict_mask(Tape<float>&, const HeadParams<float>&, Var, const std::vector<ShotFeatures>&,
                                 std::size_t, std::size_t);
template HeadOutput predict_mask(Tape<double>&, const HeadParams<double>&, Var, const std::vector<ShotFeatures>&,
                                 std::size_t, std::size_t);
template AttentionStats averaged_attention(const Tensor<float>&, const Mask&, const std::vector<Mask>&);
template AttentionStats averaged_attention(const Tensor<double>&, const Mask&, const std::vector<Mask>&);

}  // namespace tbs
