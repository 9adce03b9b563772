#include "tbs/ops.hpp"

#include <algorithm>
#include <cmath>

namespace tbs::ops {

namespace {

template <typename T>
void require_matrix(const Tensor<T>& a, const char* op) {
    if (a.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
}

// C (m x n) += A (m x k) B (k x n)
template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        T* ci = c + i * n;
        for (std::size_t t = 0; t < k; ++t) {
            const T av = a[i * k + t];
            const T* bt = b + t * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
}

// C (m x n) += A (m x k) B^T, B: n x k
template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* ai = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const T* bj = b + j * k;
            T acc = 0;
            for (std::size_t t = 0; t < k; ++t) acc += ai[t] * bj[t];
            c[i * n + j] += acc;
        }
    }
}

// C (m x n) += A^T B, A: k x m, B: k x n
template <typename T>
void gemm_tn(std::size_t k, std::size_t m, std::size_t n, const T* a, const T* b, T* c) {
    for (std::size_t t = 0; t < k; ++t) {
        const T* at = a + t * m;
        const T* bt = b + t * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T av = at[i];
            T* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

template <typename T>
Var matmul(Tape<T>& t, Var a, Var b) {
    const auto& A = t.value(a);
    const auto& B = t.value(b);
    require_matrix(A, "matmul");
    require_matrix(B, "matmul");
    const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
    if (B.dim(0) != k)
        throw DimensionError("matmul: inner extents differ, " + shape_str(A.shape()) + " vs " + shape_str(B.shape()));
    Tensor<T> C({m, n});
    gemm_nn(m, k, n, A.data(), B.data(), C.data());
    return t.push(std::move(C), {a, b}, [a, b, m, k, n](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        if (tp.needs_grad(a)) gemm_nt(m, n, k, g.data(), tp.value_at(b.id).data(), tp.grad_buffer(a).data());
        if (tp.needs_grad(b)) gemm_tn(m, k, n, tp.value_at(a.id).data(), g.data(), tp.grad_buffer(b).data());
    });
}

template <typename T>
Var matmul_nt(Tape<T>& t, Var a, Var b) {
    const auto& A = t.value(a);
    const auto& B = t.value(b);
    require_matrix(A, "matmul_nt");
    require_matrix(B, "matmul_nt");
    const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(0);
    if (B.dim(1) != k)
        throw DimensionError("matmul_nt: inner extents differ, " + shape_str(A.shape()) + " vs " +
                             shape_str(B.shape()));
    Tensor<T> C({m, n});
    gemm_nt(m, k, n, A.data(), B.data(), C.data());
    return t.push(std::move(C), {a, b}, [a, b, m, k, n](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        if (tp.needs_grad(a)) gemm_nn(m, n, k, g.data(), tp.value_at(b.id).data(), tp.grad_buffer(a).data());
        if (tp.needs_grad(b)) gemm_tn(m, n, k, g.data(), tp.value_at(a.id).data(), tp.grad_buffer(b).data());
    });
}

template <typename T>
Var transpose(Tape<T>& t, Var a) {
    const auto& A = t.value(a);
    require_matrix(A, "transpose");
    const std::size_t m = A.dim(0), n = A.dim(1);
    Tensor<T> out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
    return t.push(std::move(out), {a}, [a, m, n](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        auto& ga = tp.grad_buffer(a);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
}

template <typename T>
Var reshape(Tape<T>& t, Var a, Shape shape) {
    Tensor<T> out = t.value(a).reshaped(std::move(shape));
    return t.push(std::move(out), {a}, [a](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        auto& ga = tp.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
    const auto& A = t.value(a);
    const auto& B = t.value(b);
    require_same(A, B, "add");
    Tensor<T> out = A;
    add_into(out, B);
    return t.push(std::move(out), {a, b}, [a, b](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        if (tp.needs_grad(a)) add_into(tp.grad_buffer(a), g);
        if (tp.needs_grad(b)) add_into(tp.grad_buffer(b), g);
    });
}

template <typename T>
Var sub(Tape<T>& t, Var a, Var b) {
    const auto& A = t.value(a);
    const auto& B = t.value(b);
    require_same(A, B, "sub");
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
    return t.push(std::move(out), {a, b}, [a, b](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        if (tp.needs_grad(a)) add_into(tp.grad_buffer(a), g);
        if (tp.needs_grad(b)) {
            auto& gb = tp.grad_buffer(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

template <typename T>
Var mul(Tape<T>& t, Var a, Var b) {
    const auto& A = t.value(a);
    const auto& B = t.value(b);
    require_same(A, B, "mul");
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
    return t.push(std::move(out), {a, b}, [a, b](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        const auto& av = tp.value_at(a.id);
        const auto& bv = tp.value_at(b.id);
        if (tp.needs_grad(a)) {
            auto& ga = tp.grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (tp.needs_grad(b)) {
            auto& gb = tp.grad_buffer(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

template <typename T>
Var scale(Tape<T>& t, Var a, T s) {
    Tensor<T> out = t.value(a);
    for (auto& v : out.span()) v *= s;
    return t.push(std::move(out), {a}, [a, s](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        auto& ga = tp.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
    });
}

template <typename T>
Var mul_const(Tape<T>& t, Var a, const Tensor<T>& m) {
    const auto& A = t.value(a);
    if (A.size() != m.size())
        throw DimensionError("mul_const: shape mismatch " + shape_str(A.shape()) + " vs " + shape_str(m.shape()));
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= m[i];
    return t.push(std::move(out), {a}, [a, m](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        auto& ga = tp.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * m[i];
    });
}

template <typename T>
Var add_const(Tape<T>& t, Var a, const Tensor<T>& c) {
    const auto& A = t.value(a);
    if (A.size() != c.size())
        throw DimensionError("add_const: shape mismatch " + shape_str(A.shape()) + " vs " + shape_str(c.shape()));
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
    return t.push(std::move(out), {a}, [a](Tape<T>& tp, std::size_t self) {
        add_into(tp.grad_buffer(a), tp.grad_at(self));
    });
}

template <typename T>
Var softmax_rows(Tape<T>& t, Var m) {
    const auto& M = t.value(m);
    require_matrix(M, "softmax_rows");
    const std::size_t r = M.dim(0), c = M.dim(1);
    Tensor<T> out({r, c});
    for (std::size_t i = 0; i < r; ++i) {
        const T* x = M.data() + i * c;
        T* y = out.data() + i * c;
        const T mx = *std::max_element(x, x + c);
        T s = 0;
        for (std::size_t j = 0; j < c; ++j) {
            y[j] = std::exp(x[j] - mx);
            s += y[j];
        }
        for (std::size_t j = 0; j < c; ++j) y[j] /= s;
    }
    return t.push(std::move(out), {m}, [m, r, c](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        const auto& y = tp.value_at(self);
        auto& gm = tp.grad_buffer(m);
        for (std::size_t i = 0; i < r; ++i) {
            T dot = 0;
            for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
            for (std::size_t j = 0; j < c; ++j) gm[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
        }
    });
}

template <typename T>
Var layer_norm(Tape<T>& t, Var v, T eps) {
    const auto& X = t.value(v);
    const std::size_t n = X.size();
    if (n < 2) throw DegenerateInputError("layer_norm needs at least 2 elements, got " + std::to_string(n));
    T mean = 0;
    for (T x : X.span()) mean += x;
    mean /= T(n);
    T var = 0;
    for (T x : X.span()) var += (x - mean) * (x - mean);
    var /= T(n);
    const T inv = T(1) / std::sqrt(var + eps);
    Tensor<T> out(X.shape());
    for (std::size_t i = 0; i < n; ++i) out[i] = (X[i] - mean) * inv;
    return t.push(std::move(out), {v}, [v, n, inv](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        const auto& y = tp.value_at(self);
        T gm = 0, gy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            gm += g[i];
            gy += g[i] * y[i];
        }
        gm /= T(n);
        gy /= T(n);
        auto& gv = tp.grad_buffer(v);
        for (std::size_t i = 0; i < n; ++i) gv[i] += inv * (g[i] - gm - y[i] * gy);
    });
}

template <typename T>
Var cosine_rows(Tape<T>& t, Var a, Var b, T eps) {
    const auto& A = t.value(a);
    const auto& B = t.value(b);
    require_same(A, B, "cosine_rows");
    require_matrix(A, "cosine_rows");
    const std::size_t n = A.dim(0), d = A.dim(1);
    Tensor<T> out({n});
    std::vector<T> na(n), nb(n);
    std::vector<char> a_floor(n), b_floor(n);
    for (std::size_t i = 0; i < n; ++i) {
        T dot = 0, aa = 0, bb = 0;
        for (std::size_t j = 0; j < d; ++j) {
            dot += A[i * d + j] * B[i * d + j];
            aa += A[i * d + j] * A[i * d + j];
            bb += B[i * d + j] * B[i * d + j];
        }
        const T la = std::sqrt(aa), lb = std::sqrt(bb);
        a_floor[i] = la <= eps;
        b_floor[i] = lb <= eps;
        t.note_branch(a_floor[i]);
        t.note_branch(b_floor[i]);
        na[i] = std::max(la, eps);
        nb[i] = std::max(lb, eps);
        out[i] = dot / (na[i] * nb[i]);
    }
    return t.push(std::move(out), {a, b},
                  [a, b, n, d, na = std::move(na), nb = std::move(nb), a_floor = std::move(a_floor),
                   b_floor = std::move(b_floor)](Tape<T>& tp, std::size_t self) {
                      const auto& g = tp.grad_at(self);
                      const auto& c = tp.value_at(self);
                      const auto& A = tp.value_at(a.id);
                      const auto& B = tp.value_at(b.id);
                      const bool ga_on = tp.needs_grad(a), gb_on = tp.needs_grad(b);
                      for (std::size_t i = 0; i < n; ++i) {
                          const T denom = na[i] * nb[i];
                          if (ga_on) {
                              auto& ga = tp.grad_buffer(a);
                              const T k = a_floor[i] ? T(0) : c[i] / (na[i] * na[i]);
                              for (std::size_t j = 0; j < d; ++j)
                                  ga[i * d + j] += g[i] * (B[i * d + j] / denom - k * A[i * d + j]);
                          }
                          if (gb_on) {
                              auto& gb = tp.grad_buffer(b);
                              const T k = b_floor[i] ? T(0) : c[i] / (nb[i] * nb[i]);
                              for (std::size_t j = 0; j < d; ++j)
                                  gb[i * d + j] += g[i] * (A[i * d + j] / denom - k * B[i * d + j]);
                          }
                      }
                  });
}

template <typename T>
Var sigmoid(Tape<T>& t, Var x) {
    Tensor<T> out = t.value(x);
    for (auto& v : out.span()) {
        if (v >= 0) {
            v = T(1) / (T(1) + std::exp(-v));
        } else {
            const T e = std::exp(v);
            v = e / (T(1) + e);
        }
    }
    return t.push(std::move(out), {x}, [x](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        const auto& y = tp.value_at(self);
        auto& gx = tp.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (T(1) - y[i]);
    });
}

template <typename T>
Var relu(Tape<T>& t, Var x) {
    Tensor<T> out = t.value(x);
    for (auto& v : out.span()) {
        t.note_branch(v > 0);
        if (!(v > 0)) v = 0;
    }
    return t.push(std::move(out), {x}, [x](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        const auto& y = tp.value_at(self);
        auto& gx = tp.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (y[i] > 0) gx[i] += g[i];
    });
}

template <typename T>
Var linear(Tape<T>& t, const LinearParams<T>& p, Var x) {
    const auto& X = t.value(x);
    require_matrix(X, "linear");
    const std::size_t n = X.dim(0), in = p.in_features(), out_f = p.out_features();
    if (X.dim(1) != in)
        throw DimensionError("linear: input " + shape_str(X.shape()) + " does not match weight " +
                             shape_str(p.weight.shape()));
    if (p.bias && p.bias->size() != out_f)
        throw DimensionError("linear: bias " + shape_str(p.bias->shape()) + " does not match weight " +
                             shape_str(p.weight.shape()));
    Tensor<T> Y({n, out_f});
    if (p.bias)
        for (std::size_t i = 0; i < n; ++i)
            std::copy(p.bias->data(), p.bias->data() + out_f, Y.data() + i * out_f);
    gemm_nt(n, in, out_f, X.data(), p.weight.data(), Y.data());
    const Var w = t.param(p.weight);
    std::vector<Var> inputs{x, w};
    Var b;
    if (p.bias) {
        b = t.param(*p.bias);
        inputs.push_back(b);
    }
    return t.push(std::move(Y), inputs, [x, w, b, n, in, out_f](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        if (tp.needs_grad(x)) gemm_nn(n, out_f, in, g.data(), tp.value_at(w.id).data(), tp.grad_buffer(x).data());
        if (tp.needs_grad(w)) gemm_tn(n, out_f, in, g.data(), tp.value_at(x.id).data(), tp.grad_buffer(w).data());
        if (b.valid() && tp.needs_grad(b)) {
            auto& gb = tp.grad_buffer(b);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < out_f; ++j) gb[j] += g[i * out_f + j];
        }
    });
}

template <typename T>
Var conv2d(Tape<T>& t, const ConvParams<T>& p, Var x) {
    const auto& X = t.value(x);
    if (X.rank() != 3) throw DimensionError("conv2d: expected C x H x W input, got " + shape_str(X.shape()));
    if (p.weight.rank() != 4 || p.weight.dim(2) != 3 || p.weight.dim(3) != 3)
        throw DimensionError("conv2d: expected out x in x 3 x 3 kernel, got " + shape_str(p.weight.shape()));
    if (p.stride != 1 && p.stride != 2) throw DimensionError("conv2d: stride must be 1 or 2");
    const std::size_t C = X.dim(0), H = X.dim(1), W = X.dim(2), Co = p.weight.dim(0), s = p.stride;
    if (p.weight.dim(1) != C)
        throw DimensionError("conv2d: input " + shape_str(X.shape()) + " does not match kernel " +
                             shape_str(p.weight.shape()));
    if (p.bias.size() != Co) throw DimensionError("conv2d: bias does not match kernel");
    const std::size_t Ho = (H - 1) / s + 1, Wo = (W - 1) / s + 1, P = Ho * Wo, Q = C * 9;

    // im2col: P x Q
    std::vector<T> cols(P * Q, T(0));
    for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
            T* row = cols.data() + (oy * Wo + ox) * Q;
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * s + ky) - 1;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * s + kx) - 1;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                        row[c * 9 + ky * 3 + kx] = X[(c * H + iy) * W + ix];
                    }
                }
        }
    Tensor<T> Y({Co, Ho, Wo});
    for (std::size_t o = 0; o < Co; ++o) std::fill(Y.data() + o * P, Y.data() + (o + 1) * P, p.bias[o]);
    gemm_nt(Co, Q, P, p.weight.data(), cols.data(), Y.data());

    const Var w = t.param(p.weight);
    const Var b = t.param(p.bias);
    return t.push(std::move(Y), {x, w, b},
                  [x, w, b, C, H, W, Co, s, Ho, Wo, P, Q, cols = std::move(cols)](Tape<T>& tp, std::size_t self) {
                      const auto& g = tp.grad_at(self);  // Co x P
                      if (tp.needs_grad(w)) gemm_nn(Co, P, Q, g.data(), cols.data(), tp.grad_buffer(w).data());
                      if (tp.needs_grad(b)) {
                          auto& gb = tp.grad_buffer(b);
                          for (std::size_t o = 0; o < Co; ++o)
                              for (std::size_t i = 0; i < P; ++i) gb[o] += g[o * P + i];
                      }
                      if (tp.needs_grad(x)) {
                          std::vector<T> dcols(P * Q, T(0));
                          gemm_tn(Co, P, Q, g.data(), tp.value_at(w.id).data(), dcols.data());
                          auto& gx = tp.grad_buffer(x);
                          for (std::size_t oy = 0; oy < Ho; ++oy)
                              for (std::size_t ox = 0; ox < Wo; ++ox) {
                                  const T* row = dcols.data() + (oy * Wo + ox) * Q;
                                  for (std::size_t c = 0; c < C; ++c)
                                      for (std::size_t ky = 0; ky < 3; ++ky) {
                                          const auto iy = static_cast<std::ptrdiff_t>(oy * s + ky) - 1;
                                          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                                          for (std::size_t kx = 0; kx < 3; ++kx) {
                                              const auto ix = static_cast<std::ptrdiff_t>(ox * s + kx) - 1;
                                              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                                              gx[(c * H + iy) * W + ix] += row[c * 9 + ky * 3 + kx];
                                          }
                                      }
                              }
                      }
                  });
}

template <typename T>
Var bce_loss(Tape<T>& t, Var p, const Tensor<T>& y) {
    const auto& P = t.value(p);
    if (P.size() != y.size())
        throw DimensionError("bce_loss: shape mismatch " + shape_str(P.shape()) + " vs " + shape_str(y.shape()));
    const std::size_t n = P.size();
    const T lo = T(kBceClamp), hi = T(1) - T(kBceClamp);
    T total = 0;
    std::vector<char> clamped(n);
    for (std::size_t i = 0; i < n; ++i) {
        clamped[i] = !(P[i] > lo && P[i] < hi);
        t.note_branch(clamped[i]);
        const T pc = std::clamp(P[i], lo, hi);
        total -= y[i] * std::log(pc) + (T(1) - y[i]) * std::log(T(1) - pc);
    }
    Tensor<T> out = Tensor<T>::scalar(total / T(n));
    return t.push(std::move(out), {p}, [p, y, n, clamped = std::move(clamped)](Tape<T>& tp, std::size_t self) {
        const T g = tp.grad_at(self)[0] / T(n);
        const auto& P = tp.value_at(p.id);
        auto& gp = tp.grad_buffer(p);
        for (std::size_t i = 0; i < n; ++i) {
            if (clamped[i]) continue;
            gp[i] += g * (-y[i] / P[i] + (T(1) - y[i]) / (T(1) - P[i]));
        }
    });
}

template <typename T>
Var scale_rows(Tape<T>& t, Var x, Var s) {
    const auto& X = t.value(x);
    const auto& S = t.value(s);
    require_matrix(X, "scale_rows");
    const std::size_t n = X.dim(0), c = X.dim(1);
    if (S.size() != n)
        throw DimensionError("scale_rows: " + shape_str(S.shape()) + " scores for " + shape_str(X.shape()) +
                             " rows");
    Tensor<T> out = X;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = S[i] * X[i * c + j];
    return t.push(std::move(out), {x, s}, [x, s, n, c](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        const auto& X = tp.value_at(x.id);
        const auto& S = tp.value_at(s.id);
        if (tp.needs_grad(x)) {
            auto& gx = tp.grad_buffer(x);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += S[i] * g[i * c + j];
        }
        if (tp.needs_grad(s)) {
            auto& gs = tp.grad_buffer(s);
            for (std::size_t i = 0; i < n; ++i) {
                T acc = 0;
                for (std::size_t j = 0; j < c; ++j) acc += g[i * c + j] * X[i * c + j];
                gs[i] += acc;
            }
        }
    });
}

template <typename T>
Var concat_cols(Tape<T>& t, Var a, Var b) {
    const auto& A = t.value(a);
    const auto& B = t.value(b);
    require_matrix(A, "concat_cols");
    require_matrix(B, "concat_cols");
    const std::size_t n = A.dim(0), pa = A.dim(1), pb = B.dim(1);
    if (B.dim(0) != n)
        throw DimensionError("concat_cols: row mismatch " + shape_str(A.shape()) + " vs " + shape_str(B.shape()));
    Tensor<T> out({n, pa + pb});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(A.data() + i * pa, pa, out.data() + i * (pa + pb));
        std::copy_n(B.data() + i * pb, pb, out.data() + i * (pa + pb) + pa);
    }
    return t.push(std::move(out), {a, b}, [a, b, n, pa, pb](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        if (tp.needs_grad(a)) {
            auto& ga = tp.grad_buffer(a);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < pa; ++j) ga[i * pa + j] += g[i * (pa + pb) + j];
        }
        if (tp.needs_grad(b)) {
            auto& gb = tp.grad_buffer(b);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < pb; ++j) gb[i * pb + j] += g[i * (pa + pb) + pa + j];
        }
    });
}

template <typename T>
Var concat_rows(Tape<T>& t, const std::vector<Var>& parts) {
    if (parts.empty()) throw EmptyAxisError("concat_rows: no inputs");
    const std::size_t c = t.value(parts[0]).cols();
    std::size_t total = 0;
    std::vector<std::size_t> offsets;
    for (Var v : parts) {
        const auto& P = t.value(v);
        require_matrix(P, "concat_rows");
        if (P.dim(1) != c)
            throw DimensionError("concat_rows: column mismatch " + shape_str(t.value(parts[0]).shape()) + " vs " +
                                 shape_str(P.shape()));
        offsets.push_back(total);
        total += P.dim(0);
    }
    Tensor<T> out({total, c});
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& P = t.value(parts[k]);
        std::copy(P.data(), P.data() + P.size(), out.data() + offsets[k] * c);
    }
    return t.push(std::move(out), parts, [parts, offsets, c](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        for (std::size_t k = 0; k < parts.size(); ++k) {
            if (!tp.needs_grad(parts[k])) continue;
            auto& gp = tp.grad_buffer(parts[k]);
            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[k] * c + i];
        }
    });
}

template <typename T>
Var gather_rows(Tape<T>& t, Var x, const std::vector<std::size_t>& indices) {
    const auto& X = t.value(x);
    require_matrix(X, "gather_rows");
    if (indices.empty()) throw EmptyAxisError("gather_rows: empty index list");
    const std::size_t n = X.dim(0), c = X.dim(1);
    Tensor<T> out({indices.size(), c});
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= n)
            throw DimensionError("gather_rows: index " + std::to_string(indices[k]) + " out of range for " +
                                 shape_str(X.shape()));
        std::copy_n(X.data() + indices[k] * c, c, out.data() + k * c);
    }
    return t.push(std::move(out), {x}, [x, indices, c](Tape<T>& tp, std::size_t self) {
        const auto& g = tp.grad_at(self);
        auto& gx = tp.grad_buffer(x);
        for (std::size_t k = 0; k < indices.size(); ++k)
            for (std::size_t j = 0; j < c; ++j) gx[indices[k] * c + j] += g[k * c + j];
    });
}

template <typename T>
Var sum(Tape<T>& t, Var x) {
    T s = 0;
    for (T v : t.value(x).span()) s += v;
    return t.push(Tensor<T>::scalar(s), {x}, [x](Tape<T>& tp, std::size_t self) {
        const T g = tp.grad_at(self)[0];
        for (auto& v : tp.grad_buffer(x).span()) v += g;
    });
}

template <typename T>
Var weighted_sum(Tape<T>& t, Var x, const Tensor<T>& w) {
    const auto& X = t.value(x);
    if (X.size() != w.size())
        throw DimensionError("weighted_sum: shape mismatch " + shape_str(X.shape()) + " vs " + shape_str(w.shape()));
    T s = 0;
    for (std::size_t i = 0; i < X.size(); ++i) s += X[i] * w[i];
    return t.push(Tensor<T>::scalar(s), {x}, [x, w](Tape<T>& tp, std::size_t self) {
        const T g = tp.grad_at(self)[0];
        auto& gx = tp.grad_buffer(x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * w[i];
    });
}

#define TBS_INSTANTIATE_OPS(T)                                                     \
    template Var matmul(Tape<T>&, Var, Var);                                       \
    template Var matmul_nt(Tape<T>&, Var, Var);                                    \
    template Var transpose(Tape<T>&, Var);                                         \
    template Var reshape(Tape<T>&, Var, Shape);                                    \
    template Var add(Tape<T>&, Var, Var);                                          \
    template Var sub(Tape<T>&, Var, Var);                                          \
    template Var mul(Tape<T>&, Var, Var);                                          \
    template Var scale(Tape<T>&, Var, T);                                          \
    template Var mul_const(Tape<T>&, Var, const Tensor<T>&);                       \
    template Var add_const(Tape<T>&, Var, const Tensor<T>&);                       \
    template Var softmax_rows(Tape<T>&, Var);                                      \
    template Var layer_norm(Tape<T>&, Var, T);                                     \
    template Var cosine_rows(Tape<T>&, Var, Var, T);                               \
    template Var sigmoid(Tape<T>&, Var);                                           \
    template Var relu(Tape<T>&, Var);                                              \
    template Var linear(Tape<T>&, const LinearParams<T>&, Var);                    \
    template Var conv2d(Tape<T>&, const ConvParams<T>&, Var);                      \
    template Var bce_loss(Tape<T>&, Var, const Tensor<T>&);                        \
    template Var scale_rows(Tape<T>&, Var, Var);                                   \
    template Var concat_cols(Tape<T>&, Var, Var);                                  \
    template Var concat_rows(Tape<T>&, const std::vector<Var>&);                   \
    template Var gather_rows(Tape<T>&, Var, const std::vector<std::size_t>&);      \
    template Var sum(Tape<T>&, Var);                                               \
    template Var weighted_sum(Tape<T>&, Var, const Tensor<T>&);

TBS_INSTANTIATE_OPS(float)
TBS_INSTANTIATE_OPS(double)

}  // namespace tbs::ops
