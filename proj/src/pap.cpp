#include "streamchar/pap.hpp"

namespace streamchar {

Pap::Pap(PapConfig cfg) : cfg_(cfg) {
    Rng rng(hash_combine(cfg_.seed, 0x9A9u));
    double s = 1.0 / std::sqrt(static_cast<double>(cfg_.attn_dim));
    params_.add("pap.wq", Tensor::randn(cfg_.cond_dim, cfg_.attn_dim, rng, s));
    params_.add("pap.wk", Tensor::randn(cfg_.state_dim, cfg_.attn_dim, rng, s));
    params_.add("pap.off_w1", Tensor::randn(cfg_.cond_dim, cfg_.head_hidden, rng, s));
    params_.add("pap.off_w2", Tensor::zeros(cfg_.head_hidden, 1));
    params_.add("pap.sc_w1", Tensor::randn(cfg_.cond_dim, cfg_.head_hidden, rng, s));
    params_.add("pap.sc_w2", Tensor::zeros(cfg_.head_hidden, 1));
}

void Pap::randomize(Rng& rng, double stddev) {
    params_.for_each([&](const std::string&, Tensor& v, Tensor&) {
        for (double& x : v.v) x = stddev * rng.gaussian();
    });
}

Graph::Id Pap::soft_positions(Graph& g, Graph::Id transcript_states, Graph::Id c_a) {
    std::size_t n = g.val(transcript_states).rows;
    require(n >= 1, "soft_positions: empty transcript");
    Graph::Id q = g.matmul(c_a, leafp(g, "pap.wq"));
    Graph::Id k = g.matmul(transcript_states, leafp(g, "pap.wk"));
    double scl = 1.0 / std::sqrt(static_cast<double>(cfg_.attn_dim));
    Graph::Id logits = g.scale(g.matmul_nt(q, k), scl);
    Tensor ones = Tensor::full(g.val(c_a).rows, n, 1.0);
    Graph::Id alpha = g.softmax_rows(logits, ones);
    Tensor idx(n, 1);
    for (std::size_t i = 0; i < n; ++i) idx.at(i, 0) = static_cast<double>(i);
    return g.matmul(alpha, g.constant(idx));
}

Pap::Out Pap::forward(Graph& g, Graph::Id transcript_states, Graph::Id c_a) {
    std::size_t n = g.val(transcript_states).rows;
    std::size_t j = g.val(c_a).rows;
    Out out;
    out.p = soft_positions(g, transcript_states, c_a);
    out.delta = g.matmul(g.silu(g.matmul(c_a, leafp(g, "pap.off_w1"))), leafp(g, "pap.off_w2"));
    Graph::Id scores = g.matmul(g.silu(g.matmul(c_a, leafp(g, "pap.sc_w1"))),
                                leafp(g, "pap.sc_w2"));  // (J,1)
    // softmax over frames: fold the column into a single row first
    Graph::Id scores_row = g.concat_cols([&] {
        std::vector<Graph::Id> parts;
        for (std::size_t i = 0; i < j; ++i) parts.push_back(g.slice_rows(scores, i, i + 1));
        return parts;
    }());
    out.w = g.softmax_rows(scores_row, Tensor::full(1, j, 1.0));
    Graph::Id contrib = g.add(out.p, out.delta);  // (J,1)
    out.s_hat = g.clamp(g.matmul(out.w, contrib), 0.0, static_cast<double>(n));
    return out;
}

double Pap::predict(const Tensor& transcript_states, const Tensor& c_a) {
    Graph g;
    Out o = forward(g, g.constant(transcript_states), g.constant(c_a));
    return g.val(o.s_hat).v[0];
}

}  // namespace streamchar
