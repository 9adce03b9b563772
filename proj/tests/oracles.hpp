#pragma once

// Scalar-loop reference implementations. They share no code with the library
// kernels: every logit, exponential and weighted sum is spelled out.

#include <cmath>
#include <vector>

#include "tbs/layers.hpp"
#include "tbs/mask.hpp"
#include "tbs/random.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const tbs::Tensor<double>& t) {
    Mat m(t.dim(0), std::vector<double>(t.dim(1)));
    for (std::size_t i = 0; i < t.dim(0); ++i)
        for (std::size_t j = 0; j < t.dim(1); ++j) m[i][j] = t.at(i, j);
    return m;
}

// y = x W^T + b, one row at a time.
inline Mat project(const tbs::LinearParams<double>& p, const Mat& x) {
    const std::size_t out = p.weight.dim(0), in = p.weight.dim(1);
    Mat y(x.size(), std::vector<double>(out));
    for (std::size_t r = 0; r < x.size(); ++r)
        for (std::size_t o = 0; o < out; ++o) {
            double acc = p.bias ? (*p.bias)[o] : 0.0;
            for (std::size_t i = 0; i < in; ++i) acc += x[r][i] * p.weight.at(o, i);
            y[r][o] = acc;
        }
    return y;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
    double mx = z[0];
    for (double v : z) mx = v > mx ? v : mx;
    std::vector<double> e(z.size());
    double s = 0;
    for (std::size_t i = 0; i < z.size(); ++i) s += e[i] = std::exp(z[i] - mx);
    for (auto& v : e) v /= s;
    return e;
}

struct Recon {
    Mat recon;
    Mat attn;
};

inline Recon cross_reconstruct(const tbs::LinearParams<double>& q, const tbs::LinearParams<double>& k,
                               const tbs::LinearParams<double>& v, const Mat& src, const Mat& ctx) {
    const Mat Q = project(q, src), K = project(k, ctx), V = project(v, ctx);
    const std::size_t d = Q[0].size();
    Recon out;
    for (std::size_t i = 0; i < src.size(); ++i) {
        std::vector<double> logits(ctx.size());
        for (std::size_t j = 0; j < ctx.size(); ++j) {
            double dot = 0;
            for (std::size_t c = 0; c < d; ++c) dot += Q[i][c] * K[j][c];
            logits[j] = dot / std::sqrt(double(d));
        }
        const auto a = softmax(logits);
        std::vector<double> row(V[0].size(), 0.0);
        for (std::size_t j = 0; j < ctx.size(); ++j)
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += a[j] * V[j][c];
        out.attn.push_back(a);
        out.recon.push_back(row);
    }
    return out;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b, double eps = 1e-8) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return ab / (std::max(std::sqrt(aa), eps) * std::max(std::sqrt(bb), eps));
}

// cos(L(recon), L(V(support))) per support pixel.
inline std::vector<double> relevance(const tbs::LinearParams<double>& v, const tbs::LinearParams<double>& l,
                                     const Mat& recon, const Mat& support) {
    const Mat a = project(l, recon), b = project(l, project(v, support));
    std::vector<double> out;
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(cosine(a[i], b[i]));
    return out;
}

inline std::vector<double> refine(const tbs::LinearParams<double>& c1, const tbs::LinearParams<double>& c2,
                                  const std::vector<double>& rb, double eps = 1e-5) {
    const double n = double(rb.size());
    double mean = 0;
    for (double v : rb) mean += v;
    mean /= n;
    double var = 0;
    for (double v : rb) var += (v - mean) * (v - mean);
    var /= n;
    std::vector<double> out;
    for (double v : rb) {
        const double x[2] = {v, (v - mean) / std::sqrt(var + eps)};
        double logit = c2.bias ? (*c2.bias)[0] : 0.0;
        for (std::size_t h = 0; h < c1.weight.dim(0); ++h) {
            double hid = c1.bias ? (*c1.bias)[h] : 0.0;
            hid += c1.weight.at(h, 0) * x[0] + c1.weight.at(h, 1) * x[1];
            logit += c2.weight.at(0, h) * hid;
        }
        out.push_back(1.0 / (1.0 + std::exp(-logit)));
    }
    return out;
}

struct Head {
    std::vector<double> probs;
    Mat attn;
};

inline Head predict_mask(const tbs::LinearParams<double>& qh, const tbs::LinearParams<double>& kh, const Mat& query,
                         const std::vector<Mat>& shots, const std::vector<tbs::Mask>& masks) {
    const Mat Q = project(qh, query);
    Mat K;
    std::vector<double> ind;
    for (std::size_t j = 0; j < shots.size(); ++j) {
        const Mat Kj = project(kh, shots[j]);
        K.insert(K.end(), Kj.begin(), Kj.end());
        for (std::size_t s = 0; s < masks[j].size(); ++s) ind.push_back(masks[j][s] ? 1.0 : 0.0);
    }
    const double c = double(query[0].size());
    Head out;
    for (std::size_t q = 0; q < Q.size(); ++q) {
        std::vector<double> logits(K.size());
        for (std::size_t s = 0; s < K.size(); ++s) {
            double dot = 0;
            for (std::size_t i = 0; i < Q[q].size(); ++i) dot += Q[q][i] * K[s][i];
            logits[s] = dot / std::sqrt(c);
        }
        const auto a = softmax(logits);
        double p = 0;
        for (std::size_t s = 0; s < K.size(); ++s) p += a[s] * ind[s];
        out.probs.push_back(p);
        out.attn.push_back(a);
    }
    return out;
}

inline tbs::Tensor<double> random_tensor(tbs::Shape shape, tbs::Rng& rng, double lo = -1, double hi = 1) {
    tbs::Tensor<double> t(std::move(shape));
    for (auto& v : t.span()) v = rng.uniform(lo, hi);
    return t;
}

inline tbs::LinearParams<double> random_linear(std::size_t in, std::size_t out, bool bias, tbs::Rng& rng) {
    tbs::LinearParams<double> p{random_tensor({out, in}, rng), std::nullopt};
    if (bias) p.bias = random_tensor({out}, rng, -0.5, 0.5);
    return p;
}

}  // namespace oracle
