#include <doctest.h>

#include <cmath>

#include "tbs/ops.hpp"
#include "tbs/random.hpp"

using tbs::Shape;
using tbs::Tape;
using tbs::Tensor;
using tbs::Var;
using T2 = Tensor<double>;
using namespace tbs::ops;

namespace {

T2 rnd(Shape s, std::uint64_t seed, double lo = -1, double hi = 1) {
    tbs::Rng rng(seed);
    T2 t(std::move(s));
    for (auto& v : t.span()) v = rng.uniform(lo, hi);
    return t;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
    T2 a({2, 3, 4});
    CHECK(a.size() == 24);
    CHECK(a.rows() == 6);
    CHECK(a.cols() == 4);
    CHECK_THROWS_AS(T2(Shape{2, 2}, std::vector<double>{1, 2, 3}), tbs::DimensionError);
    CHECK_THROWS_AS(a.reshaped({5, 5}), tbs::DimensionError);
    CHECK(a.reshaped({4, 6}).shape() == Shape{4, 6});
}

TEST_CASE("matmul examples") {
    Tape<double> t;
    const T2 b = T2::from({2, 2}, {1, 2, 3, 4});
    auto id = t.constant(T2::from({2, 2}, {1, 0, 0, 1}));
    CHECK(t.value(matmul(t, id, t.constant(b))) == b);
    auto z = t.constant(T2::zeros({2, 2}));
    CHECK(t.value(matmul(t, z, t.constant(b))) == T2::zeros({2, 2}));
    auto c = matmul(t, t.constant(T2::from({2, 2}, {1, 2, 3, 4})), t.constant(T2::from({2, 2}, {5, 6, 7, 8})));
    CHECK(t.value(c) == T2::from({2, 2}, {19, 22, 43, 50}));
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tape<double> t;
    auto a = t.constant(T2({2, 3}));
    auto b = t.constant(T2({2, 3}));
    try {
        matmul(t, a, b);
        FAIL("expected DimensionError");
    } catch (const tbs::DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3] vs [2x3]") != std::string::npos);
    }
}

TEST_CASE("matmul backward is dC B^T and A^T dC") {
    Tape<double> t;
    const T2 A = rnd({3, 4}, 1), B = rnd({4, 2}, 2);
    auto a = t.param(A), b = t.param(B);
    auto s = sum(t, matmul(t, a, b));
    t.backward(s);
    const T2 ga = t.grad_of(A), gb = t.grad_of(B);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 4; ++k) {
            double want = 0;
            for (std::size_t j = 0; j < 2; ++j) want += B.at(k, j);
            CHECK(near(ga.at(i, k), want, 1e-12));
        }
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t j = 0; j < 2; ++j) {
            double want = 0;
            for (std::size_t i = 0; i < 3; ++i) want += A.at(i, k);
            CHECK(near(gb.at(k, j), want, 1e-12));
        }
}

TEST_CASE("softmax_rows examples") {
    Tape<double> t;
    auto u = softmax_rows(t, t.constant(T2::from({1, 3}, {0, 0, 0})));
    for (double v : t.value(u).span()) CHECK(near(v, 1.0 / 3.0, 1e-15));

    auto s = softmax_rows(t, t.constant(T2::from({1, 3}, {100, 0, 0})));
    CHECK(t.value(s)[0] >= 1 - 1e-40);
    CHECK(t.value(s)[1] <= 1e-40);
    CHECK(t.value(s)[2] <= 1e-40);

    auto d = softmax_rows(t, t.constant(T2::from({1, 3}, {1, 2, 3})));
    CHECK(near(t.value(d)[0], 0.09003, 1e-5));
    CHECK(near(t.value(d)[1], 0.24473, 1e-5));
    CHECK(near(t.value(d)[2], 0.66524, 1e-5));

    CHECK_THROWS_AS(softmax_rows(t, t.constant(T2({2, 0}))), tbs::EmptyAxisError);
    CHECK_THROWS_AS(T2({3, 0}), tbs::DimensionError);
}

TEST_CASE("softmax rows sum to one and ignore per-row shifts") {
    Tape<float> t;
    tbs::Rng rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        Tensor<float> m({5, 9}), shifted({5, 9});
        for (std::size_t r = 0; r < 5; ++r) {
            const double c = rng.uniform(-50, 50);
            for (std::size_t j = 0; j < 9; ++j) {
                m.at(r, j) = float(rng.uniform(-20, 20));
                shifted.at(r, j) = float(double(m.at(r, j)) + c);
            }
        }
        const auto& a = t.value(softmax_rows(t, t.constant(m)));
        const auto& b = t.value(softmax_rows(t, t.constant(shifted)));
        for (std::size_t r = 0; r < 5; ++r) {
            double s = 0;
            for (std::size_t j = 0; j < 9; ++j) {
                s += a.at(r, j);
                CHECK(a.at(r, j) >= 0);
                CHECK(near(a.at(r, j), b.at(r, j), 1e-6));
            }
            CHECK(near(s, 1.0, 1e-6));
        }
    }
}

TEST_CASE("layer_norm examples") {
    Tape<double> t;
    auto c = layer_norm(t, t.constant(T2::from({4}, {5, 5, 5, 5})), 1e-5);
    for (double v : t.value(c).span()) CHECK(v == 0.0);

    auto s = layer_norm(t, t.constant(T2::from({2}, {-1, 1})), 1e-5);
    CHECK(near(t.value(s)[0], -1, 1e-3));
    CHECK(near(t.value(s)[1], 1, 1e-3));

    auto d = layer_norm(t, t.constant(T2::from({4}, {0, 2, 4, 6})), 1e-5);
    const double want[4] = {-1.3416, -0.4472, 0.4472, 1.3416};
    for (int i = 0; i < 4; ++i) CHECK(near(t.value(d)[i], want[i], 1e-3));

    CHECK_THROWS_AS(layer_norm(t, t.constant(T2::from({1}, {3})), 1e-5), tbs::DegenerateInputError);
}

TEST_CASE("layer_norm moments and affine invariance") {
    Tape<double> t;
    tbs::Rng rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        // Wide inputs so the eps floor stays negligible even at |alpha| = 0.02.
        const T2 v = rnd({16}, 100 + rep, -300, 300);
        const auto& y = t.value(layer_norm(t, t.constant(v), 1e-5));
        double mean = 0, var = 0;
        for (double x : y.span()) mean += x;
        mean /= 16;
        for (double x : y.span()) var += (x - mean) * (x - mean);
        var /= 16;
        CHECK(near(mean, 0, 1e-5));
        CHECK(near(var, 1, 1e-5));

        double alpha = rng.uniform(0.02, 5) * (rng.uniform() < 0.5 ? -1 : 1);
        const double beta = rng.uniform(-10, 10);
        T2 w(v.shape());
        for (std::size_t i = 0; i < 16; ++i) w[i] = alpha * v[i] + beta;
        const auto& z = t.value(layer_norm(t, t.constant(w), 1e-5));
        for (std::size_t i = 0; i < 16; ++i) CHECK(near(z[i], (alpha > 0 ? 1 : -1) * y[i], 1e-4));
    }
}

TEST_CASE("cosine_rows examples and range") {
    Tape<double> t;
    auto a = t.constant(T2::from({3, 2}, {3, 4, 1, 0, 1, 2}));
    auto b = t.constant(T2::from({3, 2}, {3, 4, 0, 1, -1, -2}));
    const auto& c = t.value(cosine_rows(t, a, b));
    CHECK(near(c[0], 1, 1e-15));
    CHECK(c[1] == 0.0);
    CHECK(near(c[2], -1, 1e-15));
    CHECK_THROWS_AS(cosine_rows(t, a, t.constant(T2({3, 3}))), tbs::DimensionError);

    tbs::Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const T2 x = rnd({6, 5}, 300 + rep), y = rnd({6, 5}, 400 + rep);
        const double al = rng.uniform(0.01, 100), be = rng.uniform(0.01, 100);
        T2 xs = x, ys = y;
        for (auto& v : xs.span()) v *= al;
        for (auto& v : ys.span()) v *= be;
        const auto& c0 = t.value(cosine_rows(t, t.constant(x), t.constant(y)));
        const auto& c1 = t.value(cosine_rows(t, t.constant(xs), t.constant(ys)));
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(c0[i] >= -1 - 1e-6);
            CHECK(c0[i] <= 1 + 1e-6);
            CHECK(near(c0[i], c1[i], 1e-6));
        }
    }
}

TEST_CASE("sigmoid examples") {
    Tape<double> t;
    CHECK(t.value(sigmoid(t, t.constant(T2::scalar(0))))[0] == 0.5);
    const double hi = t.value(sigmoid(t, t.constant(T2::scalar(40))))[0];
    CHECK(1.0 - hi < 1e-17);
    const T2 x = rnd({20}, 9, -30, 30);
    T2 nx = x;
    for (auto& v : nx.span()) v = -v;
    const auto& p = t.value(sigmoid(t, t.constant(x)));
    const auto& q = t.value(sigmoid(t, t.constant(nx)));
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(near(p[i] + q[i], 1, 1e-15));
        CHECK(p[i] > 0);
        CHECK(p[i] < 1);
    }
}

TEST_CASE("linear examples") {
    Tape<double> t;
    const T2 x = rnd({4, 3}, 3);
    tbs::LinearParams<double> id{T2::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}), T2::zeros({3})};
    CHECK(t.value(linear(t, id, t.constant(x))) == x);

    tbs::LinearParams<double> p{rnd({2, 3}, 4), T2::from({2}, {0.5, -1.5})};
    const auto& y = t.value(linear(t, p, t.constant(T2::zeros({3, 3}))));
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(y.at(r, 0) == 0.5);
        CHECK(y.at(r, 1) == -1.5);
    }

    tbs::LinearParams<double> d{T2::from({1, 2}, {1, 1}), T2::from({1}, {1})};
    CHECK(t.value(linear(t, d, t.constant(T2::from({1, 2}, {2, 3}))))[0] == 6.0);
    CHECK_THROWS_AS(linear(t, d, t.constant(T2({1, 3}))), tbs::DimensionError);
}

TEST_CASE("conv2d examples") {
    Tape<double> t;
    tbs::ConvParams<double> box{T2::full({1, 1, 3, 3}, 1.0), T2::zeros({1}), 1};
    const auto& y = t.value(conv2d(t, box, t.constant(T2::full({1, 5, 5}, 1.0))));
    CHECK(y.shape() == Shape{1, 5, 5});
    CHECK(y[2 * 5 + 2] == 9.0);
    CHECK(y[0] == 4.0);

    tbs::ConvParams<double> zero{T2::zeros({2, 1, 3, 3}), T2::zeros({2}), 2};
    const auto& z = t.value(conv2d(t, zero, t.constant(rnd({1, 6, 6}, 8))));
    CHECK(z.shape() == Shape{2, 3, 3});
    for (double v : z.span()) CHECK(v == 0.0);

    T2 ramp({1, 4, 4});
    for (std::size_t i = 0; i < 16; ++i) ramp[i] = double(i + 1);
    tbs::ConvParams<double> delta{T2::zeros({1, 1, 3, 3}), T2::zeros({1}), 1};
    delta.weight[4] = 1.0;
    CHECK(t.value(conv2d(t, delta, t.constant(ramp))) == ramp);

    tbs::ConvParams<double> odd{T2::zeros({1, 1, 3, 3}), T2::zeros({1}), 2};
    CHECK(t.value(conv2d(t, odd, t.constant(T2({1, 5, 5})))).shape() == Shape{1, 3, 3});
    CHECK_THROWS_AS(conv2d(t, box, t.constant(T2({2, 5, 5}))), tbs::DimensionError);
}

TEST_CASE("bce_loss examples") {
    Tape<double> t;
    const T2 y = T2::from({4}, {1, 0, 1, 0});
    CHECK(t.value(bce_loss(t, t.constant(y), y))[0] <= 1e-6);
    CHECK(near(t.value(bce_loss(t, t.constant(T2::full({4}, 0.5)), y))[0], std::log(2.0), 1e-15));
    CHECK(near(t.value(bce_loss(t, t.constant(T2::from({1}, {0.9})), T2::from({1}, {1})))[0], 0.10536, 1e-5));
    CHECK_THROWS_AS(bce_loss(t, t.constant(T2({3})), y), tbs::DimensionError);
}

TEST_CASE("relu clips negatives") {
    Tape<double> t;
    CHECK(t.value(relu(t, t.constant(T2::from({3}, {-1, 0, 2})))) == T2::from({3}, {0, 0, 2}));
}

TEST_CASE("backward examples") {
    SUBCASE("sum of squares gives 2 theta") {
        Tape<double> t;
        const T2 th = rnd({7}, 21);
        auto p = t.param(th);
        t.backward(sum(t, mul(t, p, p)));
        const T2 g = t.grad_of(th);
        for (std::size_t i = 0; i < 7; ++i) CHECK(near(g[i], 2 * th[i], 1e-15));
    }
    SUBCASE("unrelated parameter gets zero") {
        Tape<double> t;
        const T2 th = rnd({3}, 22), other = rnd({3}, 23);
        t.param(th);
        auto q = t.param(other);
        t.backward(sum(t, q));
        const T2 g = t.grad_of(th);
        for (double v : g.span()) CHECK(v == 0.0);
    }
    SUBCASE("non-scalar loss is rejected") {
        Tape<double> t;
        auto q = t.constant(T2({3}));
        CHECK_THROWS_AS(t.backward(q), tbs::TapeError);
    }
    SUBCASE("value from another tape is rejected") {
        Tape<double> a, b;
        auto q = a.constant(T2::scalar(1));
        CHECK_THROWS_AS(b.backward(q), tbs::TapeError);
    }
}

TEST_CASE("three-layer composite matches central differences") {
    tbs::Rng rng(31);
    const auto init = [&](std::size_t in, std::size_t out) {
        return tbs::LinearParams<double>{rnd({out, in}, rng.next_u64()), rnd({out}, rng.next_u64())};
    };
    tbs::LinearParams<double> l1 = init(5, 6), l2 = init(6, 4), l3 = init(4, 1);
    const T2 x = rnd({3, 5}, 41);
    const auto loss = [&](Tape<double>& t) {
        auto h = sigmoid(t, linear(t, l1, t.constant(x)));
        h = softmax_rows(t, linear(t, l2, h));
        return sum(t, linear(t, l3, h));
    };
    Tape<double> t;
    t.backward(loss(t));
    const double h = 1e-4;
    for (T2* w : {&l1.weight, &l2.weight, &l3.weight, &*l1.bias, &*l2.bias}) {
        const T2 g = t.grad_of(*w);
        for (std::size_t i = 0; i < w->size(); ++i) {
            const double keep = (*w)[i];
            (*w)[i] = keep + h;
            Tape<double> tp;
            const double up = tp.value(loss(tp))[0];
            (*w)[i] = keep - h;
            Tape<double> tm;
            const double dn = tm.value(loss(tm))[0];
            (*w)[i] = keep;
            const double num = (up - dn) / (2 * h);
            const double rel = std::abs(g[i] - num) / std::max({std::abs(g[i]), std::abs(num), 1e-8});
            CHECK(rel < 1e-4);
        }
    }
}

TEST_CASE("gradients accumulate over multiple consumers") {
    Tape<double> t;
    const T2 th = T2::from({2}, {1.5, -2});
    auto p = t.param(th);
    auto twice = add(t, p, p);
    t.backward(sum(t, add(t, twice, p)));
    const T2 g = t.grad_of(th);
    for (double v : g.span()) CHECK(v == 3.0);
}

TEST_CASE("backward visits nodes in reverse execution order") {
    Tape<double> t;
    const T2 th = rnd({3}, 51);
    auto p = t.param(th);
    auto a = sigmoid(t, p);
    auto b = mul(t, a, p);
    auto c = sum(t, b);
    t.backward(c);
    const auto& order = t.last_backward_order();
    REQUIRE(order.size() == 3);
    CHECK(order[0] == c.id);
    CHECK(order[1] == b.id);
    CHECK(order[2] == a.id);
}

TEST_CASE("forward ops are pure") {
    tbs::Rng rng(61);
    const Tensor<float> x = rnd({4, 8}, 62).cast<float>();
    const Tensor<float> y = rnd({4, 8}, 63).cast<float>();
    const auto run = [&] {
        Tape<float> t;
        auto a = t.constant(x), b = t.constant(y);
        auto s = softmax_rows(t, matmul_nt(t, a, b));
        auto c = cosine_rows(t, s, s);
        return t.value(layer_norm(t, c));
    };
    CHECK(tbs::bit_equal(run(), run()));
}
