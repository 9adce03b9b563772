#pragma once

#include <span>

#include "tbs/layers.hpp"
#include "tbs/tape.hpp"

namespace tbs {

// Query/key/value projections, borrowed from the owning parameter set.
template <typename T>
struct AttentionHeads {
    const LinearParams<T>& query;
    const LinearParams<T>& key;
    const LinearParams<T>& value;
};

struct AttentionOutput {
    Var recon;  // N_src x d
    Var attn;   // N_src x N_ctx, row-stochastic
};

// Reconstructs every source row from the context rows:
//   attn  = softmax_rows(Q(src) K(ctx)^T / sqrt(d))
//   recon = attn V(ctx)
// Each source pixel distributes unit mass over the context pixels. An invalid
// ctx handle means "no context" and raises EmptyContextError.
template <typename T>
AttentionOutput cross_reconstruct(Tape<T>& t, const AttentionHeads<T>& heads, Var src, Var ctx);

// Same, with the context restricted to the given rows of `pool`.
template <typename T>
AttentionOutput cross_reconstruct_rows(Tape<T>& t, const AttentionHeads<T>& heads, Var src, Var pool,
                                       std::span<const std::size_t> ctx_rows);

}  // namespace tbs
