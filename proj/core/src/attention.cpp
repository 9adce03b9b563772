#include "tbs/attention.hpp"

#include <cmath>
#include <vector>

#include "tbs/ops.hpp"

namespace tbs {

template <typename T>
AttentionOutput cross_reconstruct(Tape<T>& t, const AttentionHeads<T>& heads, Var src, Var ctx) {
    if (!ctx.valid()) throw EmptyContextError("cross_reconstruct: context has no rows");
    const std::size_t d = heads.query.out_features();
    if (heads.key.out_features() != d)
        throw DimensionError("cross_reconstruct: query width " + std::to_string(d) + " differs from key width " +
                             std::to_string(heads.key.out_features()));
    const Var q = ops::linear(t, heads.query, src);
    const Var k = ops::linear(t, heads.key, ctx);
    const Var v = ops::linear(t, heads.value, ctx);
    const Var logits = ops::scale(t, ops::matmul_nt(t, q, k), T(1) / std::sqrt(T(d)));
    const Var attn = ops::softmax_rows(t, logits);
    return {ops::matmul(t, attn, v), attn};
}

template <typename T>
AttentionOutput cross_reconstruct_rows(Tape<T>& t, const AttentionHeads<T>& heads, Var src, Var pool,
                                       std::span<const std::size_t> ctx_rows) {
    if (ctx_rows.empty()) throw EmptyContextError("cross_reconstruct: context has no rows");
    const Var ctx = ops::gather_rows(t, pool, std::vector<std::size_t>(ctx_rows.begin(), ctx_rows.end()));
    return cross_reconstruct(t, heads, src, ctx);
}

template AttentionOutput cross_reconstruct(Tape<float>&, const AttentionHeads<float>&, Var, Var);
template AttentionOutput cross_reconstruct(Tape<double>&, const AttentionHeads<double>&, Var, Var);
template AttentionOutput cross_reconstruct_rows(Tape<float>&, const AttentionHeads<float>&, Var, Var,
                                                std::span<const std::size_t>);
template AttentionOutput cross_reconstruct_rows(Tape<double>&, const AttentionHeads<double>&, Var, Var,
                                                std::span<const std::size_t>);

}  // namespace tbs
