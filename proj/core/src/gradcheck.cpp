#include "tbs/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>

#include "tbs/attention.hpp"
#include "tbs/encoder.hpp"
#include "tbs/head.hpp"
#include "tbs/model.hpp"
#include "tbs/ops.hpp"
#include "tbs/random.hpp"
#include "tbs/tbs_module.hpp"

namespace tbs {

namespace {

using D = double;
using T = Tensor<D>;

T uniform(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
    T out(std::move(shape));
    for (auto& v : out.span()) v = rng.uniform(lo, hi);
    return out;
}

// Values with |x| in [lo, hi] and random sign; keeps inputs off a kink at 0.
T away_from_zero(Shape shape, Rng& rng, double lo, double hi) {
    T out(std::move(shape));
    for (auto& v : out.span()) v = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(lo, hi);
    return out;
}

LinearParams<D> random_linear(std::size_t in, std::size_t out, bool bias, Rng& rng) {
    LinearParams<D> p{uniform({out, in}, rng), std::nullopt};
    if (bias) p.bias = uniform({out}, rng, -0.5, 0.5);
    return p;
}

std::vector<T*> linear_inputs(LinearParams<D>& p) {
    std::vector<T*> out{&p.weight};
    if (p.bias) out.push_back(&*p.bias);
    return out;
}

// Loss for a tensor-valued output: a fixed random projection to a scalar.
struct Projection {
    T weights;
    Var operator()(Tape<D>& t, Var out) {
        const auto& v = t.value(out);
        if (weights.empty() || weights.size() != v.size()) throw TapeError("gradcheck projection shape drifted");
        return ops::weighted_sum(t, out, weights);
    }
};

template <typename State>
GradcheckCase make_case(std::string name, bool primitive, std::shared_ptr<State> s,
                        std::function<std::vector<T*>(State&)> inputs, std::function<Var(Tape<D>&, State&)> loss) {
    return {std::move(name), primitive, [s, inputs] { return inputs(*s); },
            [s, loss](Tape<D>& t) { return loss(t, *s); }};
}

// Unary primitive: loss = <w, op(x)>.
GradcheckCase unary(const std::string& name, T x, std::function<Var(Tape<D>&, Var)> op, Rng& rng) {
    struct S {
        T x;
        Projection proj;
    };
    auto s = std::make_shared<S>(S{std::move(x), {}});
    {
        Tape<D> probe;
        probe.set_grad_enabled(false);
        s->proj.weights = uniform(probe.value(op(probe, probe.param(s->x))).shape(), rng);
    }
    return make_case<S>(
        name, true, s, [](S& st) { return std::vector<T*>{&st.x}; },
        [op](Tape<D>& t, S& st) { return st.proj(t, op(t, t.param(st.x))); });
}

GradcheckCase binary(const std::string& name, T a, T b, std::function<Var(Tape<D>&, Var, Var)> op, Rng& rng) {
    struct S {
        T a, b;
        Projection proj;
    };
    auto s = std::make_shared<S>(S{std::move(a), std::move(b), {}});
    {
        Tape<D> probe;
        probe.set_grad_enabled(false);
        s->proj.weights = uniform(probe.value(op(probe, probe.param(s->a), probe.param(s->b))).shape(), rng);
    }
    return make_case<S>(
        name, true, s, [](S& st) { return std::vector<T*>{&st.a, &st.b}; },
        [op](Tape<D>& t, S& st) { return st.proj(t, op(t, t.param(st.a), t.param(st.b))); });
}

Mask pattern_mask(std::size_t h, std::size_t w, Rng& rng) {
    Mask m(h, w);
    for (std::size_t i = 0; i < m.size(); ++i) m.set(i, rng.uniform() < 0.4);
    m.set(0, true);
    m.set(m.size() - 1, false);
    return m;
}

std::vector<GradcheckCase> primitive_cases(Rng& rng) {
    std::vector<GradcheckCase> cs;
    cs.push_back(binary("matmul", uniform({3, 4}, rng), uniform({4, 5}, rng),
                        [](Tape<D>& t, Var a, Var b) { return ops::matmul(t, a, b); }, rng));
    cs.push_back(binary("matmul_nt", uniform({3, 4}, rng), uniform({5, 4}, rng),
                        [](Tape<D>& t, Var a, Var b) { return ops::matmul_nt(t, a, b); }, rng));
    cs.push_back(unary("transpose", uniform({3, 4}, rng), [](Tape<D>& t, Var a) { return ops::transpose(t, a); }, rng));
    cs.push_back(unary("reshape", uniform({3, 4}, rng), [](Tape<D>& t, Var a) { return ops::reshape(t, a, {2, 6}); },
                       rng));
    cs.push_back(binary("add", uniform({3, 4}, rng), uniform({3, 4}, rng),
                        [](Tape<D>& t, Var a, Var b) { return ops::add(t, a, b); }, rng));
    cs.push_back(binary("sub", uniform({3, 4}, rng), uniform({3, 4}, rng),
                        [](Tape<D>& t, Var a, Var b) { return ops::sub(t, a, b); }, rng));
    cs.push_back(binary("mul", uniform({3, 4}, rng), uniform({3, 4}, rng),
                        [](Tape<D>& t, Var a, Var b) { return ops::mul(t, a, b); }, rng));
    cs.push_back(unary("scale", uniform({3, 4}, rng), [](Tape<D>& t, Var a) { return ops::scale(t, a, 1.7); }, rng));
    {
        const T m = uniform({3, 4}, rng);
        cs.push_back(unary("mul_const", uniform({3, 4}, rng),
                           [m](Tape<D>& t, Var a) { return ops::mul_const(t, a, m); }, rng));
        const T c = uniform({3, 4}, rng);
        cs.push_back(unary("add_const", uniform({3, 4}, rng),
                           [c](Tape<D>& t, Var a) { return ops::add_const(t, a, c); }, rng));
    }
    cs.push_back(unary("softmax_rows", uniform({3, 5}, rng, -2, 2),
                       [](Tape<D>& t, Var a) { return ops::softmax_rows(t, a); }, rng));
    cs.push_back(unary("layer_norm", uniform({4, 3}, rng),
                       [](Tape<D>& t, Var a) { return ops::layer_norm(t, a); }, rng));
    cs.push_back(binary("cosine_rows", uniform({4, 3}, rng), uniform({4, 3}, rng),
                        [](Tape<D>& t, Var a, Var b) { return ops::cosine_rows(t, a, b); }, rng));
    cs.push_back(unary("sigmoid", uniform({3, 4}, rng, -3, 3),
                       [](Tape<D>& t, Var a) { return ops::sigmoid(t, a); }, rng));
    cs.push_back(unary("relu", away_from_zero({3, 4}, rng, 0.1, 1),
                       [](Tape<D>& t, Var a) { return ops::relu(t, a); }, rng));
    {
        struct S {
            LinearParams<D> p;
            T x;
            Projection proj;
        };
        auto s = std::make_shared<S>(S{random_linear(4, 3, true, rng), uniform({5, 4}, rng), {uniform({5, 3}, rng)}});
        cs.push_back(make_case<S>(
            "linear", true, s,
            [](S& st) {
                auto v = linear_inputs(st.p);
                v.push_back(&st.x);
                return v;
            },
            [](Tape<D>& t, S& st) { return st.proj(t, ops::linear(t, st.p, t.param(st.x))); }));
    }
    {
        // Both strides in one case: stride 2 then stride 1.
        struct S {
            ConvParams<D> down, same;
            T x;
            Projection proj;
        };
        auto s = std::make_shared<S>(S{{uniform({3, 2, 3, 3}, rng), uniform({3}, rng), 2},
                                       {uniform({2, 3, 3, 3}, rng), uniform({2}, rng), 1},
                                       uniform({2, 6, 5}, rng),
                                       {uniform({2, 3, 3}, rng)}});
        cs.push_back(make_case<S>(
            "conv2d", true, s,
            [](S& st) { return std::vector<T*>{&st.down.weight, &st.down.bias, &st.same.weight, &st.same.bias, &st.x}; },
            [](Tape<D>& t, S& st) {
                return st.proj(t, ops::conv2d(t, st.same, ops::conv2d(t, st.down, t.param(st.x))));
            }));
    }
    {
        struct S {
            T p, y;
        };
        T y({3, 4});
        for (auto& v : y.span()) v = rng.uniform() < 0.5 ? 0 : 1;
        auto s = std::make_shared<S>(S{uniform({3, 4}, rng, 0.05, 0.95), std::move(y)});
        cs.push_back(make_case<S>(
            "bce_loss", true, s, [](S& st) { return std::vector<T*>{&st.p}; },
            [](Tape<D>& t, S& st) { return ops::bce_loss(t, t.param(st.p), st.y); }));
    }
    cs.push_back(binary("scale_rows", uniform({6, 3}, rng), uniform({2, 3}, rng),
                        [](Tape<D>& t, Var x, Var s) { return ops::scale_rows(t, x, s); }, rng));
    cs.push_back(binary("concat_cols", uniform({4, 2}, rng), uniform({4, 3}, rng),
                        [](Tape<D>& t, Var a, Var b) { return ops::concat_cols(t, a, b); }, rng));
    cs.push_back(binary("concat_rows", uniform({2, 3}, rng), uniform({3, 3}, rng),
                        [](Tape<D>& t, Var a, Var b) { return ops::concat_rows(t, {a, b, a}); }, rng));
    cs.push_back(unary("gather_rows", uniform({5, 3}, rng),
                       [](Tape<D>& t, Var a) { return ops::gather_rows(t, a, {4, 0, 0, 2}); }, rng));
    {
        struct S {
            T x;
        };
        auto s = std::make_shared<S>(S{uniform({3, 4}, rng)});
        cs.push_back(make_case<S>(
            "sum", true, s, [](S& st) { return std::vector<T*>{&st.x}; },
            [](Tape<D>& t, S& st) { return ops::sum(t, t.param(st.x)); }));
        struct W {
            T x, w;
        };
        auto ws = std::make_shared<W>(W{uniform({3, 4}, rng), uniform({3, 4}, rng)});
        cs.push_back(make_case<W>(
            "weighted_sum", true, ws, [](W& st) { return std::vector<T*>{&st.x}; },
            [](Tape<D>& t, W& st) { return ops::weighted_sum(t, t.param(st.x), st.w); }));
    }
    return cs;
}

std::vector<GradcheckCase> composite_cases(Rng& rng, std::uint64_t seed) {
    std::vector<GradcheckCase> cs;
    constexpr std::size_t d = 4;
    {
        struct S {
            LinearParams<D> q, k, v;
            T src, ctx;
            Projection proj;
        };
        auto s = std::make_shared<S>(S{random_linear(d, d, true, rng), random_linear(d, d, true, rng),
                                       random_linear(d, d, true, rng), uniform({5, d}, rng), uniform({6, d}, rng),
                                       {uniform({5, d}, rng)}});
        cs.push_back(make_case<S>(
            "cross_reconstruct", false, s,
            [](S& st) {
                return std::vector<T*>{&st.q.weight, &*st.q.bias, &st.k.weight, &*st.k.bias,
                                       &st.v.weight, &*st.v.bias, &st.src,      &st.ctx};
            },
            [](Tape<D>& t, S& st) {
                const AttentionHeads<D> heads{st.q, st.k, st.v};
                return st.proj(t, cross_reconstruct(t, heads, t.param(st.src), t.param(st.ctx)).recon);
            }));
    }
    {
        // 3 x 3 plane with d-dim tokens, both scores on.
        struct S {
            TbsParams<D> p;
            T query, support;
            Mask mask;
            Projection proj;
        };
        auto s = std::make_shared<S>(S{TbsParams<float>::init(d, rng).cast<D>(), uniform({9, d}, rng),
                                       uniform({9, d}, rng), pattern_mask(3, 3, rng), {uniform({9, d}, rng)}});
        cs.push_back(make_case<S>(
            "tbs_forward", false, s,
            [](S& st) {
                std::vector<T*> v;
                st.p.for_each([&v](const std::string&, T& x) { v.push_back(&x); });
                v.push_back(&st.query);
                v.push_back(&st.support);
                return v;
            },
            [](Tape<D>& t, S& st) {
                const TbsTrace tr =
                    tbs_forward(t, st.p, t.param(st.query), t.param(st.support), st.mask, Ablation{true, true});
                return st.proj(t, tr.adapted);
            }));
    }
    {
        struct S {
            HeadParams<D> p;
            T query, s0, s1;
            Mask m0, m1;
            Projection proj;
        };
        auto s = std::make_shared<S>(S{HeadParams<float>::init(d, rng).cast<D>(), uniform({4, d}, rng),
                                       uniform({6, d}, rng), uniform({6, d}, rng), pattern_mask(2, 3, rng),
                                       pattern_mask(2, 3, rng), {uniform({2, 2}, rng)}});
        cs.push_back(make_case<S>(
            "predict_mask", false, s,
            [](S& st) { return std::vector<T*>{&st.p.q_head.weight, &st.p.k_head.weight, &st.query, &st.s0, &st.s1}; },
            [](Tape<D>& t, S& st) {
                const std::vector<ShotFeatures> shots{{t.param(st.s0), &st.m0}, {t.param(st.s1), &st.m1}};
                return st.proj(t, predict_mask(t, st.p, t.param(st.query), shots, 2, 2).probs);
            }));
    }
    {
        struct S {
            EncoderParams<D> p;
            T image;
            Projection proj;
        };
        auto s = std::make_shared<S>(S{EncoderParams<float>::init(rng).cast<D>(), uniform({1, 64, 64}, rng, 0, 1),
                                       {uniform({kFeatureChannels, 8, 8}, rng)}});
        cs.push_back(make_case<S>(
            "encoder", false, s,
            [](S& st) {
                std::vector<T*> v;
                st.p.for_each([&v](const std::string&, T& x) { v.push_back(&x); });
                return v;
            },
            [](Tape<D>& t, S& st) { return st.proj(t, extract_features(t, st.p, st.image)); }));
    }
    {
        struct S {
            ModelParams<D> p;
            Episode ep;
        };
        GenConfig g;
        g.shots = 2;
        auto s = std::make_shared<S>(
            S{ModelParams<float>::init(seed).cast<D>(), generate_episode(g, derive_seed(seed, 0xc0de))});
        cs.push_back(make_case<S>(
            "full_composite", false, s,
            [](S& st) {
                std::vector<T*> v;
                st.p.for_each([&v](const std::string&, T& x) { v.push_back(&x); });
                return v;
            },
            [](Tape<D>& t, S& st) { return forward_episode(t, st.p, st.ep, Ablation{true, true}).loss; }));
    }
    return cs;
}

struct Eval {
    double loss;
    std::uint64_t signature;
};

Eval evaluate(const GradcheckCase& c) {
    Tape<D> t;
    t.set_grad_enabled(false);
    const Var l = c.loss(t);
    return {t.value(l)[0], t.branch_signature()};
}

}  // namespace

const std::vector<std::string>& primitive_op_names() {
    static const std::vector<std::string> names{
        "matmul",    "matmul_nt",  "transpose",    "reshape", "add",         "sub",         "mul",
        "scale",     "mul_const",  "add_const",    "softmax_rows", "layer_norm", "cosine_rows", "sigmoid",
        "relu",      "linear",     "conv2d",       "bce_loss", "scale_rows", "concat_cols", "concat_rows",
        "gather_rows", "sum",      "weighted_sum"};
    return names;
}

std::vector<GradcheckCase> default_gradcheck_cases(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x6c));
    auto cs = primitive_cases(rng);
    auto comp = composite_cases(rng, seed);
    cs.insert(cs.end(), std::make_move_iterator(comp.begin()), std::make_move_iterator(comp.end()));
    return cs;
}

GradcheckResult run_gradcheck(const GradcheckCase& c, const GradcheckOptions& opts) {
    GradcheckResult r;
    r.name = c.name;
    r.primitive = c.primitive;
    const std::vector<T*> inputs = c.inputs();
    if (inputs.empty()) throw TapeError("gradcheck case " + c.name + " has no inputs");

    std::vector<T> analytic;
    std::uint64_t base_sig = 0;
    {
        Tape<D> t;
        const Var l = c.loss(t);
        base_sig = t.branch_signature();
        t.backward(l);
        for (T* x : inputs) analytic.push_back(t.grad_of(*x));
    }

    Rng rng(derive_seed(opts.seed, std::hash<std::string>{}(c.name)));
    const std::size_t max_attempts = opts.probes * opts.max_attempts_per_probe;
    std::size_t attempts = 0;
    while (r.probes < opts.probes && attempts < max_attempts) {
        ++attempts;
        const std::size_t k = rng.below(inputs.size());
        const std::size_t i = rng.below(inputs[k]->size());
        D& x = (*inputs[k])[i];
        const D saved = x;
        // Five-point central stencil, truncation error O(h^4).
        Eval at[4];
        const double offsets[4] = {2, 1, -1, -2};
        bool crossed = false;
        for (int j = 0; j < 4; ++j) {
            x = saved + offsets[j] * opts.h;
            at[j] = evaluate(c);
            crossed = crossed || at[j].signature != base_sig;
        }
        x = saved;
        if (crossed) {
            ++r.skipped;
            continue;
        }
        const double numeric = (-at[0].loss + 8 * at[1].loss - 8 * at[2].loss + at[3].loss) / (12 * opts.h);
        const double a = analytic[k][i];
        const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opts.floor});
        if (r.probes == 0 || err > r.max_rel_error) {
            r.max_rel_error = err;
            r.worst_input = k;
            r.worst_index = i;
            r.worst_analytic = a;
            r.worst_numeric = numeric;
        }
        ++r.probes;
    }
    r.passed = r.probes == opts.probes && r.max_rel_error < opts.tolerance;
    return r;
}

bool run_gradcheck_suite(const std::vector<GradcheckCase>& cases, const GradcheckOptions& opts, std::ostream& report,
                         std::vector<GradcheckResult>* results) {
    bool ok = true;
    char line[256];
    for (const auto& c : cases) {
        const GradcheckResult r = run_gradcheck(c, opts);
        std::snprintf(line, sizeof line, "%-18s %-9s max_rel_err %.3e  probes %zu  skipped %zu  %s\n", r.name.c_str(),
                      r.primitive ? "primitive" : "composite", r.max_rel_error, r.probes, r.skipped,
                      r.passed ? "PASS" : "FAIL");
        report << line;
        if (!r.passed) {
            ok = false;
            if (r.probes < opts.probes)
                report << "  " << r.name << ": only " << r.probes << " probes avoided a kink\n";
            else
                report << "  " << r.name << ": worst at input " << r.worst_input << " index " << r.worst_index
                       << " analytic " << r.worst_analytic << " numeric " << r.worst_numeric << '\n';
        }
        if (results) results->push_back(r);
    }
    return ok;
}

}  // namespace tbs
