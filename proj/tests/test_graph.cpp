#include "doctest.h"
#include "streamchar/graph.hpp"

using namespace streamchar;

namespace {

// Central-difference check of d(sum of outputs)/d(input) for a unary op.
template <class Op>
double max_rel_err(const Tensor& x0, Op&& op) {
    Tensor xv = x0, grad(x0.rows, x0.cols);
    {
        Graph g;
        Graph::Id x = g.leaf(xv, &grad);
        g.backward(g.sum(op(g, x)));
    }
    double worst = 0.0;
    const double h = 1e-6;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        auto eval = [&](double d) {
            Tensor xp = x0;
            xp.v[i] += d;
            Graph g;
            Tensor dummy(x0.rows, x0.cols);
            Graph::Id x = g.leaf(xp, &dummy);
            Graph::Id s = g.sum(op(g, x));
            return g.val(s).v[0];
        };
        double fd = (eval(h) - eval(-h)) / (2 * h);
        double denom = std::max({std::abs(fd), std::abs(grad.v[i]), 1e-8});
        worst = std::max(worst, std::abs(fd - grad.v[i]) / denom);
    }
    return worst;
}

}  // namespace

TEST_SUITE_BEGIN("graph");

TEST_CASE("elementwise and matmul gradients match finite differences") {
    Rng r(31);
    Tensor a = Tensor::randn(3, 4, r), b = Tensor::randn(4, 3, r);
    CHECK(max_rel_err(a, [&](Graph& g, Graph::Id x) {
              return g.matmul(x, g.constant(b));
          }) < 1e-6);
    CHECK(max_rel_err(a, [](Graph& g, Graph::Id x) { return g.silu(x); }) < 1e-5);
    CHECK(max_rel_err(a, [](Graph& g, Graph::Id x) { return g.tanh_(x); }) < 1e-5);
    CHECK(max_rel_err(a, [](Graph& g, Graph::Id x) { return g.mul(x, g.scale(x, 2.0)); }) < 1e-6);
}

TEST_CASE("softmax, rmsnorm, rope gradients match finite differences") {
    Rng r(32);
    Tensor a = Tensor::randn(3, 5, r);
    Tensor mask = Tensor::full(3, 5, 1.0);
    mask.at(0, 3) = 0.0;
    mask.at(2, 0) = 0.0;
    Tensor w1 = Tensor::randn(3, 5, r);
    CHECK(max_rel_err(a, [&](Graph& g, Graph::Id x) {
              return g.mul(g.softmax_rows(x, mask), g.constant(w1));
          }) < 1e-5);

    Tensor gain = Tensor::randn(1, 5, r);
    Tensor w2 = Tensor::randn(3, 5, r);
    CHECK(max_rel_err(a, [&](Graph& g, Graph::Id x) {
              return g.mul(g.rmsnorm(x, g.constant(gain)), g.constant(w2));
          }) < 1e-5);

    Tensor b = Tensor::randn(4, 6, r);
    Tensor angles = Tensor::randn(4, 3, r);
    Tensor w3 = Tensor::randn(4, 6, r);
    CHECK(max_rel_err(b, [&](Graph& g, Graph::Id x) {
              return g.mul(g.rope(x, angles), g.constant(w3));
          }) < 1e-5);
}

TEST_CASE("structural ops route gradients to the right slots") {
    Rng r(33);
    Tensor a = Tensor::randn(4, 3, r);
    CHECK(max_rel_err(a, [](Graph& g, Graph::Id x) {
              Graph::Id top = g.slice_rows(x, 0, 2);
              Graph::Id rest = g.slice_rows(x, 2, 4);
              return g.concat_rows({g.scale(rest, 3.0), top});
          }) < 1e-6);
    CHECK(max_rel_err(a, [](Graph& g, Graph::Id x) {
              Graph::Id gathered = g.gather_rows(x, {3, 1});
              return g.scatter_rows(g.scale(gathered, 2.0), {0, 2}, 4);
          }) < 1e-6);
    CHECK(max_rel_err(a, [](Graph& g, Graph::Id x) {
              return g.concat_cols({g.slice_cols(x, 2, 3), g.slice_cols(x, 0, 2)});
          }) < 1e-6);
}

TEST_CASE("loss heads: mean_sq_diff, smooth_l1, dot_const, clamp") {
    Rng r(34);
    Tensor a = Tensor::randn(3, 3, r);
    Tensor t = Tensor::randn(3, 3, r);
    CHECK(max_rel_err(a, [&](Graph& g, Graph::Id x) { return g.mean_sq_diff(x, t); }) < 1e-6);
    CHECK(max_rel_err(a, [&](Graph& g, Graph::Id x) { return g.dot_const(x, t); }) < 1e-6);

    Tensor s(1, 1);
    s.v[0] = 0.37;
    CHECK(max_rel_err(s, [](Graph& g, Graph::Id x) { return g.smooth_l1(x, 2.0); }) < 1e-6);
    s.v[0] = 4.2;  // in the linear branch
    CHECK(max_rel_err(s, [](Graph& g, Graph::Id x) { return g.smooth_l1(x, 2.0); }) < 1e-6);

    Tensor c = Tensor::randn(2, 4, r);
    Tensor w4 = Tensor::randn(2, 4, r);
    CHECK(max_rel_err(c, [&](Graph& g, Graph::Id x) {
              // keep clear of the clamp kinks where FD is undefined
              return g.mul(g.clamp(x, -0.5, 0.5), g.constant(w4));
          }) < 1e-4);
}

TEST_CASE("leaf gradients accumulate across uses") {
    Tensor v(1, 2), grad(1, 2);
    v.v = {2.0, 3.0};
    Graph g;
    Graph::Id x = g.leaf(v, &grad);
    Graph::Id y = g.add(g.mul(x, x), x);  // x^2 + x -> d = 2x + 1
    g.backward(g.sum(y));
    CHECK(grad.v[0] == doctest::Approx(5.0));
    CHECK(grad.v[1] == doctest::Approx(7.0));
}

TEST_SUITE_END();
