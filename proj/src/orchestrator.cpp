#include "streamchar/orchestrator.hpp"

namespace streamchar {

namespace {

Tensor causal_mask(std::size_t n) {
    Tensor m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) m.at(i, j) = 1.0;
    return m;
}

Tensor sequence_angles(std::size_t n, std::size_t n_heads, std::size_t head_dim) {
    Tensor a(n, n_heads * head_dim / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t h = 0; h < n_heads; ++h)
            for (std::size_t p = 0; p < head_dim / 2; ++p)
                a.at(i, h * head_dim / 2 + p) =
                    rope::angle(static_cast<int>(i), p, Modality::video, head_dim);
    return a;
}

Tensor audio_rows(const LatentBlock& b) {
    Tensor rows(b.frames, b.channels);
    rows.v.assign(b.v.begin(), b.v.end());
    return rows;
}

}  // namespace

Orchestrator::Orchestrator(OrchestratorConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(hash_combine(cfg_.seed, 0x0BCAu));
    const std::size_t D = cfg_.model_dim;
    double in_std = 1.0 / std::sqrt(static_cast<double>(D));
    auto randn = [&](std::size_t r, std::size_t c, double s) { return Tensor::randn(r, c, rng, s); };

    params_.add("orch.aud_in", randn(cfg_.audio_channels, D, 0.5));
    params_.add("orch.aud_in_b", Tensor::zeros(1, D));
    params_.add("orch.txt_emb", randn(cfg_.vocab + cfg_.prompt_vocab, D, 0.3));
    params_.add("orch.role_emb", randn(4, D, 0.2));  // ref / text / history / cond-tail
    params_.add("orch.temb_w1", randn(D, D, in_std));
    params_.add("orch.temb_w2", randn(D, D, in_std));
    for (std::size_t b = 0; b < cfg_.n_blocks; ++b) {
        std::string p = "orch.blk" + std::to_string(b);
        params_.add(p + ".att_g", Tensor::full(1, D, 1.0));
        params_.add(p + ".wq", randn(D, D, in_std));
        params_.add(p + ".wk", randn(D, D, in_std));
        params_.add(p + ".wv", randn(D, D, in_std));
        params_.add(p + ".wo", Tensor::zeros(D, D));
        params_.add(p + ".ffn_g", Tensor::full(1, D, 1.0));
        params_.add(p + ".w1", randn(D, cfg_.ffn_hidden, in_std));
        params_.add(p + ".w2", Tensor::zeros(cfg_.ffn_hidden, D));
    }
    params_.add("orch.final_g", Tensor::full(1, D, 1.0));
    params_.add("orch.ca_out", randn(D, cfg_.cond_dim, in_std));
    // Audio readout head for the orchestrator-only warm-up phase: forces the
    // condition frames to carry the clean audio content before joint training.
    params_.add("orch.readout", randn(cfg_.cond_dim, cfg_.audio_channels, in_std));
}

void Orchestrator::randomize(Rng& rng, double stddev) {
    params_.for_each([&](const std::string&, Tensor& v, Tensor&) {
        for (double& x : v.v) x = stddev * rng.gaussian();
    });
}

Graph::Id Orchestrator::timestep_embedding(Graph& g, double t) {
    const std::size_t D = cfg_.model_dim;
    Tensor phi(1, D);
    for (std::size_t k = 0; k < D / 2; ++k) {
        double w = std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(D));
        phi.at(0, 2 * k) = std::sin(w * t);
        phi.at(0, 2 * k + 1) = std::cos(w * t);
    }
    Graph::Id x = g.matmul(g.constant(phi), leafp(g, "orch.temb_w1"));
    return g.matmul(g.silu(x), leafp(g, "orch.temb_w2"));
}

std::vector<TokenInfo> Orchestrator::pack_sequence(const OrchestratorInput& in) const {
    require(in.history_audio.frames <= cfg_.history_cap_frames(),
            "pack_sequence: history over budget; truncate first");
    std::vector<TokenInfo> out;
    int idx = 0;
    for (std::size_t f = 0; f < in.ref_audio.frames; ++f)
        out.push_back({Role::reference, Modality::audio, idx++, true});
    for (std::size_t i = 0; i < in.prompt_ids.size() + in.transcript.size(); ++i)
        out.push_back({Role::text, Modality::audio, idx++, true});
    for (std::size_t f = 0; f < in.history_audio.frames; ++f)
        out.push_back({Role::history, Modality::audio, idx++, true});
    for (std::size_t f = 0; f < in.x_t_a.frames; ++f)
        out.push_back({Role::cond_tail, Modality::audio, idx++, false});
    return out;
}

Orchestrator::Out Orchestrator::condition(Graph& g, const OrchestratorInput& in) {
    require(in.history_audio.frames <= cfg_.history_cap_frames(),
            "condition: history over budget; truncate first");
    const std::size_t D = cfg_.model_dim;
    Graph::Id temb_t = timestep_embedding(g, in.t);
    Graph::Id temb0 = timestep_embedding(g, 0.0);

    auto role_row = [&](std::size_t r) {
        return g.slice_rows(leafp(g, "orch.role_emb"), r, r + 1);
    };
    auto audio_proj = [&](const LatentBlock& b) {
        return g.add_rowvec(g.matmul(g.constant(audio_rows(b)), leafp(g, "orch.aud_in")),
                            leafp(g, "orch.aud_in_b"));
    };

    std::vector<Graph::Id> segs;
    segs.push_back(g.add_rowvec(g.add_rowvec(audio_proj(in.ref_audio), role_row(0)), temb0));

    std::vector<std::size_t> text_ids;
    for (int p : in.prompt_ids) text_ids.push_back(cfg_.vocab + static_cast<std::size_t>(p));
    for (std::uint32_t t : in.transcript) text_ids.push_back(t);
    require(!text_ids.empty(), "condition: empty text block");
    Graph::Id txt = g.gather_rows(leafp(g, "orch.txt_emb"), text_ids);
    segs.push_back(g.add_rowvec(g.add_rowvec(txt, role_row(1)), temb0));

    if (in.history_audio.frames > 0)
        segs.push_back(
            g.add_rowvec(g.add_rowvec(audio_proj(in.history_audio), role_row(2)), temb0));

    require(in.x_t_a.frames > 0, "condition: empty conditioning tail");
    segs.push_back(g.add_rowvec(g.add_rowvec(audio_proj(in.x_t_a), role_row(3)), temb_t));

    Graph::Id x = g.concat_rows(segs);
    std::size_t n = g.val(x).rows;
    Tensor mask = causal_mask(n);
    Tensor angles = sequence_angles(n, cfg_.n_heads, cfg_.head_dim);

    const std::size_t hd = cfg_.head_dim;
    double scl = 1.0 / std::sqrt(static_cast<double>(hd));
    for (std::size_t b = 0; b < cfg_.n_blocks; ++b) {
        std::string p = "orch.blk" + std::to_string(b);
        Graph::Id xn = g.rmsnorm(x, leafp(g, p + ".att_g"));
        Graph::Id q = g.rope(g.matmul(xn, leafp(g, p + ".wq")), angles);
        Graph::Id k = g.rope(g.matmul(xn, leafp(g, p + ".wk")), angles);
        Graph::Id v = g.matmul(xn, leafp(g, p + ".wv"));
        std::vector<Graph::Id> heads;
        for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
            Graph::Id qh = g.slice_cols(q, h * hd, (h + 1) * hd);
            Graph::Id kh = g.slice_cols(k, h * hd, (h + 1) * hd);
            Graph::Id vh = g.slice_cols(v, h * hd, (h + 1) * hd);
            Graph::Id logits = g.scale(g.matmul_nt(qh, kh), scl);
            heads.push_back(g.matmul(g.softmax_rows(logits, mask), vh));
        }
        x = g.add(x, g.matmul(g.concat_cols(heads), leafp(g, p + ".wo")));
        Graph::Id fn = g.rmsnorm(x, leafp(g, p + ".ffn_g"));
        x = g.add(x, g.matmul(g.silu(g.matmul(fn, leafp(g, p + ".w1"))), leafp(g, p + ".w2")));
    }
    x = g.rmsnorm(x, leafp(g, "orch.final_g"));

    std::size_t txt_begin = in.ref_audio.frames + in.prompt_ids.size();
    std::size_t txt_end = txt_begin + in.transcript.size();
    std::size_t cond_begin = n - in.x_t_a.frames;

    Out out;
    out.transcript_states = g.slice_rows(x, txt_begin, txt_end);
    out.c_a = g.matmul(g.slice_rows(x, cond_begin, n), leafp(g, "orch.ca_out"));
    (void)D;
    return out;
}

Tensor Orchestrator::condition_values(const OrchestratorInput& in) {
    Graph g;
    Out o = condition(g, in);
    return g.val(o.c_a);
}

}  // namespace streamchar
