#include "doctest.h"
#include "streamchar/pap.hpp"
#include "testutil.hpp"

using namespace streamchar;

namespace {

PapConfig tiny_cfg() {
    PapConfig c;
    c.state_dim = 8;
    c.cond_dim = 8;
    c.attn_dim = 4;
    c.head_hidden = 4;
    return c;
}

}  // namespace

TEST_SUITE_BEGIN("pap");

TEST_CASE("soft positions are convex combinations of token indices") {
    Pap pap(tiny_cfg());
    Rng r(61);
    pap.randomize(r, 0.4);
    const std::size_t N = 6, J = 5;
    Tensor states = Tensor::randn(N, 8, r), c_a = Tensor::randn(J, 8, r);
    Graph g;
    const Tensor& p = g.val(pap.soft_positions(g, g.constant(states), g.constant(c_a)));
    REQUIRE(p.rows == J);
    for (std::size_t j = 0; j < J; ++j) {
        CHECK(p.at(j, 0) >= 0.0);
        CHECK(p.at(j, 0) <= static_cast<double>(N - 1));
    }
}

TEST_CASE("confidence weights form a distribution and s_hat stays in [0, N]") {
    Pap pap(tiny_cfg());
    Rng r(62);
    pap.randomize(r, 0.4);
    const std::size_t N = 4, J = 7;
    Tensor states = Tensor::randn(N, 8, r), c_a = Tensor::randn(J, 8, r);
    Graph g;
    Pap::Out o = pap.forward(g, g.constant(states), g.constant(c_a));
    const Tensor& w = g.val(o.w);
    double sum = 0;
    for (std::size_t j = 0; j < J; ++j) {
        CHECK(w.v[j] >= 0.0);
        sum += w.v[j];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    double s = g.val(o.s_hat).v[0];
    CHECK(s >= 0.0);
    CHECK(s <= static_cast<double>(N));
    CHECK(pap.predict(states, c_a) == doctest::Approx(s));
}

TEST_CASE("endpoint loss is smooth l1 with unit transition") {
    CHECK(pap_loss(2.3, 2.0) == doctest::Approx(0.5 * 0.3 * 0.3));
    CHECK(pap_loss(5.0, 2.0) == doctest::Approx(3.0 - 0.5));
    CHECK(pap_loss(2.0, 2.0) == 0.0);
    CHECK(pap_loss(1.0, 2.0) == doctest::Approx(0.5));
}

TEST_CASE("transcript truncation keeps the partially spoken token") {
    std::vector<std::uint32_t> t{5, 6, 7, 8};
    CHECK(truncate_transcript(t, 0.0).empty());
    CHECK(truncate_transcript(t, 2.0) == std::vector<std::uint32_t>{5, 6});
    CHECK(truncate_transcript(t, 2.01) == std::vector<std::uint32_t>{5, 6, 7});
    CHECK(truncate_transcript(t, 4.0).size() == 4);
    CHECK_THROWS_AS(truncate_transcript(t, 4.5), std::invalid_argument);
    CHECK_THROWS_AS(truncate_transcript(t, -0.1), std::invalid_argument);
}

TEST_CASE("gradients match finite differences") {
    Pap pap(tiny_cfg());
    Rng r(63);
    pap.randomize(r, 0.3);
    Tensor states = Tensor::randn(5, 8, r), c_a = Tensor::randn(4, 8, r);
    auto loss = [&]() {
        Graph g;
        Pap::Out o = pap.forward(g, g.constant(states), g.constant(c_a));
        return g.val(g.smooth_l1(o.s_hat, 2.2)).v[0];
    };
    auto grads = [&]() {
        Graph g;
        Pap::Out o = pap.forward(g, g.constant(states), g.constant(c_a));
        g.backward(g.smooth_l1(o.s_hat, 2.2));
    };
    auto rep = testutil::fd_check({&pap.params()}, loss, grads);
    INFO("worst: ", rep.worst, " rel ", rep.max_rel);
    CHECK(rep.max_rel < 1e-4);
}

TEST_SUITE_END();
