#include "streamchar/jointnet.hpp"

namespace streamchar {

namespace {

std::size_t role_index(Role r) { return static_cast<std::size_t>(r); }
constexpr std::size_t n_roles = 9;

// Full-width angle table: the per-head table tiled across heads so rope can
// be applied once to the (T, model_dim) q/k matrices.
Tensor tile_angles(const std::vector<PositionAssignment>& pos, std::size_t n_heads,
                   std::size_t head_dim, double base) {
    Tensor per_head = rope::angle_table(pos, head_dim, base);
    Tensor full(pos.size(), n_heads * head_dim / 2);
    for (std::size_t i = 0; i < pos.size(); ++i)
        for (std::size_t h = 0; h < n_heads; ++h)
            for (std::size_t p = 0; p < head_dim / 2; ++p)
                full.at(i, h * head_dim / 2 + p) = per_head.at(i, p);
    return full;
}

std::vector<TokenInfo> block_tokens(const LatentBlock& b, Role role, bool clean) {
    std::vector<TokenInfo> out;
    if (b.empty()) return out;
    if (b.modality == Modality::video) {
        for (std::size_t f = 0; f < b.frames; ++f)
            for (std::size_t hw = 0; hw < b.height * b.width; ++hw)
                out.push_back({role, Modality::video, static_cast<int>(f), clean});
    } else {
        for (std::size_t f = 0; f < b.frames; ++f)
            out.push_back({role, Modality::audio, static_cast<int>(f), clean});
    }
    return out;
}

}  // namespace

JointDenoiser::JointDenoiser(DenoiserConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(hash_combine(cfg_.seed, 0xD17u));
    const std::size_t D = cfg_.model_dim;
    auto randn = [&](std::size_t r, std::size_t c, double stddev) {
        return Tensor::randn(r, c, rng, stddev);
    };
    double in_std = 1.0 / std::sqrt(static_cast<double>(D));

    params_.add("dit.vid_in", randn(cfg_.video_channels, D, 0.5));
    params_.add("dit.vid_in_b", Tensor::zeros(1, D));
    params_.add("dit.aud_in", randn(cfg_.audio_channels, D, 0.5));
    params_.add("dit.aud_in_b", Tensor::zeros(1, D));
    params_.add("dit.ca_in", randn(cfg_.cond_dim, D, 0.3));
    params_.add("dit.role_emb", randn(n_roles, D, 0.2));
    params_.add("dit.spatial_emb", randn(cfg_.video_height * cfg_.video_width, D, 0.2));
    params_.add("dit.prompt_emb", randn(cfg_.prompt_vocab, D, 0.2));
    params_.add("dit.temb_w1", randn(D, D, in_std));
    params_.add("dit.temb_w2", randn(D, D, in_std));

    auto add_attn = [&](const std::string& p) {
        params_.add(p + ".att_g", Tensor::full(1, D, 1.0));
        params_.add(p + ".wq", randn(D, D, in_std));
        params_.add(p + ".wk", randn(D, D, in_std));
        params_.add(p + ".wv", randn(D, D, in_std));
        params_.add(p + ".wo", Tensor::zeros(D, D));
    };
    for (std::size_t b = 0; b < cfg_.n_blocks; ++b) {
        std::string p = "dit.blk" + std::to_string(b);
        add_attn(p);
        params_.add(p + ".moe_g", Tensor::full(1, D, 1.0));
        for (int e = 0; e < 2; ++e) {
            std::string ep = p + ".e" + std::to_string(e);
            params_.add(ep + ".w1", randn(D, cfg_.expert_hidden, in_std));
            params_.add(ep + ".w2", Tensor::zeros(cfg_.expert_hidden, D));
        }
    }
    auto add_plain_block = [&](const std::string& p) {
        add_attn(p);
        params_.add(p + ".ffn_g", Tensor::full(1, D, 1.0));
        params_.add(p + ".w1", randn(D, cfg_.expert_hidden, in_std));
        params_.add(p + ".w2", Tensor::zeros(cfg_.expert_hidden, D));
    };
    for (std::size_t b = 0; b < cfg_.audio_encoder_blocks; ++b)
        add_plain_block("dit.fuse" + std::to_string(b));
    add_plain_block("dit.adec0");

    params_.add("dit.head_v", Tensor::zeros(D, cfg_.video_channels));
    params_.add("dit.head_v_b", Tensor::zeros(1, cfg_.video_channels));
    params_.add("dit.head_a", Tensor::zeros(D, cfg_.audio_channels));
    params_.add("dit.head_a_b", Tensor::zeros(1, cfg_.audio_channels));
}

void JointDenoiser::randomize(Rng& rng, double stddev) {
    params_.for_each([&](const std::string&, Tensor& v, Tensor&) {
        for (double& x : v.v) x = stddev * rng.gaussian();
    });
}

Tensor JointDenoiser::video_rows(const LatentBlock& b) {
    Tensor rows(b.frames * b.height * b.width, b.channels);
    std::size_t r = 0;
    for (std::size_t f = 0; f < b.frames; ++f)
        for (std::size_t h = 0; h < b.height; ++h)
            for (std::size_t w = 0; w < b.width; ++w, ++r)
                for (std::size_t c = 0; c < b.channels; ++c) rows.at(r, c) = b.vid(c, f, h, w);
    return rows;
}

LatentBlock JointDenoiser::video_from_rows(const Tensor& rows, std::size_t c, std::size_t f,
                                           std::size_t h, std::size_t w) {
    require(rows.rows == f * h * w && rows.cols == c, "video_from_rows: bad shape");
    LatentBlock b = LatentBlock::video(c, f, h, w);
    std::size_t r = 0;
    for (std::size_t ff = 0; ff < f; ++ff)
        for (std::size_t hh = 0; hh < h; ++hh)
            for (std::size_t ww = 0; ww < w; ++ww, ++r)
                for (std::size_t cc = 0; cc < c; ++cc) b.vid(cc, ff, hh, ww) = rows.at(r, cc);
    return b;
}

Tensor JointDenoiser::audio_rows(const LatentBlock& b) {
    Tensor rows(b.frames, b.channels);
    rows.v.assign(b.v.begin(), b.v.end());
    return rows;
}

LatentBlock JointDenoiser::audio_from_rows(const Tensor& rows) {
    LatentBlock b = LatentBlock::audio(rows.rows, rows.cols);
    b.v.assign(rows.v.begin(), rows.v.end());
    return b;
}

Tensor JointDenoiser::build_mask(const std::vector<TokenInfo>& tokens) {
    std::size_t n = tokens.size();
    Tensor m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        bool cond_q = role_is_condition(tokens[i].role);
        for (std::size_t j = 0; j < n; ++j) {
            bool cond_k = role_is_condition(tokens[j].role);
            // noisy tokens see everything; condition tokens see only
            // condition tokens.
            m.at(i, j) = (!cond_q || cond_k) ? 1.0 : 0.0;
        }
    }
    return m;
}

PackedSequence JointDenoiser::pack(const LatentBlock& ref, const Cond& motion, const Cond& sink,
                                   const LatentBlock& x_v, const LatentBlock& x_a,
                                   const Tensor& c_a, double t) const {
    require(ref.modality == Modality::video && ref.frames == 1, "pack: ref must be 1 video frame");
    require(x_v.modality == Modality::video && x_a.modality == Modality::audio,
            "pack: modality mismatch");
    require(x_a.frames == 4 * x_v.frames, "pack: audio/video frame ratio must be 4:1");
    require(c_a.rows == x_a.frames && c_a.cols == cfg_.cond_dim, "pack: bad c_a shape");
    if (!motion.empty())
        require(motion.audio.frames == 4 * motion.video.frames, "pack: motion pair off-ratio");
    if (!sink.empty())
        require(sink.audio.frames == 4 * sink.video.frames, "pack: sink pair off-ratio");

    PackedSequence s;
    s.ref = ref;
    s.sink_v = sink.video;
    s.sink_a = sink.audio;
    s.motion_v = motion.video;
    s.motion_a = motion.audio;
    s.x_v = x_v;
    s.x_a = x_a;
    s.c_a = c_a;
    s.t = t;
    s.motion_frames_k = static_cast<int>(motion.empty() ? 0 : motion.video.frames);
    s.sink_offset = sink.empty() ? 0
                                 : -(s.motion_frames_k + static_cast<int>(sink.video.frames));

    auto append = [&](std::vector<TokenInfo> v) {
        s.tokens.insert(s.tokens.end(), v.begin(), v.end());
    };
    append(block_tokens(ref, Role::reference, true));
    append(block_tokens(s.sink_v, Role::sink, true));
    append(block_tokens(s.sink_a, Role::sink, true));
    append(block_tokens(s.motion_v, Role::motion, true));
    append(block_tokens(s.motion_a, Role::motion, true));
    s.n_condition = s.tokens.size();
    s.video_noisy_begin = s.tokens.size();
    append(block_tokens(x_v, Role::noisy_video, false));
    s.audio_noisy_begin = s.tokens.size();
    append(block_tokens(x_a, Role::noisy_audio, false));

    s.mask = build_mask(s.tokens);
    s.positions = rope::assign_positions(s.tokens, s.motion_frames_k, s.sink_offset);
    return s;
}

Graph::Id JointDenoiser::timestep_embedding(Graph& g, double t) {
    const std::size_t D = cfg_.model_dim;
    Tensor phi(1, D);
    for (std::size_t k = 0; k < D / 2; ++k) {
        double w = std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(D));
        phi.at(0, 2 * k) = std::sin(w * t);
        phi.at(0, 2 * k + 1) = std::cos(w * t);
    }
    Graph::Id x = g.matmul(g.constant(phi), leafp(g, "dit.temb_w1"));
    return g.matmul(g.silu(x), leafp(g, "dit.temb_w2"));
}

Graph::Id JointDenoiser::embed_video_rows(Graph& g, Graph::Id rows, std::size_t frames,
                                          Role role, Graph::Id t_emb) {
    Graph::Id x = g.add_rowvec(g.matmul(rows, leafp(g, "dit.vid_in")), leafp(g, "dit.vid_in_b"));
    Graph::Id role_row =
        g.slice_rows(leafp(g, "dit.role_emb"), role_index(role), role_index(role) + 1);
    x = g.add_rowvec(x, role_row);
    std::vector<std::size_t> cells;
    for (std::size_t f = 0; f < frames; ++f)
        for (std::size_t hw = 0; hw < cfg_.video_height * cfg_.video_width; ++hw)
            cells.push_back(hw);
    x = g.add(x, g.gather_rows(leafp(g, "dit.spatial_emb"), cells));
    return g.add_rowvec(x, t_emb);
}

Graph::Id JointDenoiser::embed_video_segment(Graph& g, const LatentBlock& block, Role role,
                                             Graph::Id t_emb) {
    return embed_video_rows(g, g.constant(video_rows(block)), block.frames, role, t_emb);
}

Graph::Id JointDenoiser::embed_audio_rows(Graph& g, Graph::Id rows, Role role, Graph::Id t_emb) {
    Graph::Id x = g.add_rowvec(g.matmul(rows, leafp(g, "dit.aud_in")), leafp(g, "dit.aud_in_b"));
    Graph::Id role_row =
        g.slice_rows(leafp(g, "dit.role_emb"), role_index(role), role_index(role) + 1);
    x = g.add_rowvec(x, role_row);
    return g.add_rowvec(x, t_emb);
}

Graph::Id JointDenoiser::embed_audio_segment(Graph& g, const LatentBlock& block, Role role,
                                             Graph::Id t_emb) {
    return embed_audio_rows(g, g.constant(audio_rows(block)), role, t_emb);
}

Graph::Id JointDenoiser::attend(Graph& g, Graph::Id x, const Tensor& mask, const Tensor& angles,
                                const std::string& prefix, Tensor* out_k, Tensor* out_v,
                                const Tensor* cached_k, const Tensor* cached_v) {
    const std::size_t hd = cfg_.head_dim;
    Graph::Id xn = g.rmsnorm(x, leafp(g, prefix + ".att_g"));
    Graph::Id q = g.rope(g.matmul(xn, leafp(g, prefix + ".wq")), angles);
    Graph::Id k = g.rope(g.matmul(xn, leafp(g, prefix + ".wk")), angles);
    Graph::Id v = g.matmul(xn, leafp(g, prefix + ".wv"));
    if (out_k) *out_k = g.val(k);
    if (out_v) *out_v = g.val(v);
    Graph::Id k_all = k, v_all = v;
    if (cached_k) {
        k_all = g.concat_rows({g.constant(*cached_k), k});
        v_all = g.concat_rows({g.constant(*cached_v), v});
    }
    double scl = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<Graph::Id> heads;
    for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
        Graph::Id qh = g.slice_cols(q, h * hd, (h + 1) * hd);
        Graph::Id kh = g.slice_cols(k_all, h * hd, (h + 1) * hd);
        Graph::Id vh = g.slice_cols(v_all, h * hd, (h + 1) * hd);
        Graph::Id logits = g.scale(g.matmul_nt(qh, kh), scl);
        Graph::Id p = g.softmax_rows(logits, mask);
        heads.push_back(g.matmul(p, vh));
    }
    Graph::Id o = g.matmul(g.concat_cols(heads), leafp(g, prefix + ".wo"));
    return g.add(x, o);
}

Graph::Id JointDenoiser::moe_ffn(Graph& g, Graph::Id x, const std::vector<Modality>& mods,
                                 std::size_t block) {
    std::string p = "dit.blk" + std::to_string(block);
    Graph::Id xn = g.rmsnorm(x, leafp(g, p + ".moe_g"));
    std::size_t total = g.val(x).rows;
    require(mods.size() == total, "moe_ffn: modality count mismatch");
    Graph::Id out = x;
    for (int e = 0; e < 2; ++e) {
        Modality want = (e == 0) ? Modality::video : Modality::audio;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < mods.size(); ++i)
            if (mods[i] == want) idx.push_back(i);
        if (idx.empty()) continue;
        std::string ep = p + ".e" + std::to_string(e);
        Graph::Id xe = g.gather_rows(xn, idx);
        Graph::Id ye = g.matmul(g.silu(g.matmul(xe, leafp(g, ep + ".w1"))), leafp(g, ep + ".w2"));
        out = g.add(out, g.scatter_rows(ye, idx, total));
    }
    return out;
}

Graph::Id JointDenoiser::mini_block(Graph& g, Graph::Id x, const std::string& prefix,
                                    const Tensor& mask) {
    Tensor zero_angles(g.val(x).rows, cfg_.model_dim / 2);
    x = attend(g, x, mask, zero_angles, prefix);
    Graph::Id xn = g.rmsnorm(x, leafp(g, prefix + ".ffn_g"));
    Graph::Id y = g.matmul(g.silu(g.matmul(xn, leafp(g, prefix + ".w1"))), leafp(g, prefix + ".w2"));
    return g.add(x, y);
}

Graph::Id JointDenoiser::audio_fuse(Graph& g, Graph::Id x_a_base, Graph::Id c_a) {
    std::size_t frames = g.val(x_a_base).rows;
    require(g.val(c_a).rows == frames, "audio_fuse: frame count mismatch");
    Graph::Id x = g.add(x_a_base, g.matmul(c_a, leafp(g, "dit.ca_in")));
    Tensor ones = Tensor::full(frames, frames, 1.0);
    for (std::size_t b = 0; b < cfg_.audio_encoder_blocks; ++b)
        x = mini_block(g, x, "dit.fuse" + std::to_string(b), ones);
    return x;
}

std::uint64_t JointDenoiser::cond_fingerprint(const PackedSequence& seq,
                                              const std::vector<int>& prompt_ids) const {
    std::uint64_t h = 0xCAFEu;
    h = hash_combine(h, seq.ref.fingerprint());
    if (!seq.sink_v.empty()) h = hash_combine(h, seq.sink_v.fingerprint());
    if (!seq.sink_a.empty()) h = hash_combine(h, seq.sink_a.fingerprint());
    if (!seq.motion_v.empty()) h = hash_combine(h, seq.motion_v.fingerprint());
    if (!seq.motion_a.empty()) h = hash_combine(h, seq.motion_a.fingerprint());
    for (int id : prompt_ids) h = hash_combine(h, static_cast<std::uint64_t>(id));
    h = hash_combine(h, params_.revision());
    return h;
}

KVCache JointDenoiser::build_cache(const PackedSequence& seq, const std::vector<int>& prompt_ids) {
    Graph g;
    Graph::Id temb0 = timestep_embedding(g, 0.0);

    std::vector<TokenInfo> tokens;
    for (std::size_t i = 0; i < prompt_ids.size(); ++i)
        tokens.push_back({Role::prompt, Modality::video, 0, true});
    tokens.insert(tokens.end(), seq.tokens.begin(), seq.tokens.begin() +
                                                       static_cast<std::ptrdiff_t>(seq.n_condition));

    std::vector<Graph::Id> segs;
    if (!prompt_ids.empty()) {
        std::vector<std::size_t> ids(prompt_ids.begin(), prompt_ids.end());
        Graph::Id p = g.gather_rows(leafp(g, "dit.prompt_emb"), ids);
        Graph::Id role_row = g.slice_rows(leafp(g, "dit.role_emb"), role_index(Role::prompt),
                                          role_index(Role::prompt) + 1);
        segs.push_back(g.add_rowvec(g.add_rowvec(p, role_row), temb0));
    }
    segs.push_back(embed_video_segment(g, seq.ref, Role::reference, temb0));
    if (!seq.sink_v.empty()) {
        segs.push_back(embed_video_segment(g, seq.sink_v, Role::sink, temb0));
        segs.push_back(embed_audio_segment(g, seq.sink_a, Role::sink, temb0));
    }
    if (!seq.motion_v.empty()) {
        segs.push_back(embed_video_segment(g, seq.motion_v, Role::motion, temb0));
        segs.push_back(embed_audio_segment(g, seq.motion_a, Role::motion, temb0));
    }
    Graph::Id x = g.concat_rows(segs);

    auto pos = rope::assign_positions(tokens, seq.motion_frames_k, seq.sink_offset);
    Tensor angles = tile_angles(pos, cfg_.n_heads, cfg_.head_dim, cfg_.rope_base);
    Tensor ones = Tensor::full(tokens.size(), tokens.size(), 1.0);

    KVCache cache;
    cache.n_cond = tokens.size();
    cache.k.resize(cfg_.n_blocks);
    cache.v.resize(cfg_.n_blocks);
    std::vector<Modality> mods;
    for (const TokenInfo& t : tokens) mods.push_back(t.modality);
    for (std::size_t b = 0; b < cfg_.n_blocks; ++b) {
        std::string p = "dit.blk" + std::to_string(b);
        x = attend(g, x, ones, angles, p, &cache.k[b], &cache.v[b]);
        x = moe_ffn(g, x, mods, b);
    }
    cache.valid = true;
    cache.fingerprint = cond_fingerprint(seq, prompt_ids);
    return cache;
}

JointDenoiser::Out JointDenoiser::forward(Graph& g, const PackedSequence& seq,
                                          const std::vector<int>& prompt_ids,
                                          const KVCache* cache, Graph::Id c_a_node,
                                          Graph::Id x_v_rows, Graph::Id x_a_rows) {
    Graph::Id temb_t = timestep_embedding(g, seq.t);
    Graph::Id temb0 = timestep_embedding(g, 0.0);

    if (x_v_rows < 0) x_v_rows = g.constant(video_rows(seq.x_v));
    if (x_a_rows < 0) x_a_rows = g.constant(audio_rows(seq.x_a));
    if (c_a_node < 0) c_a_node = g.constant(seq.c_a);

    // Noisy segments are always recomputed.
    Graph::Id xv_emb = embed_video_rows(g, x_v_rows, seq.x_v.frames, Role::noisy_video, temb_t);
    Graph::Id xa_base = embed_audio_rows(g, x_a_rows, Role::noisy_audio, temb_t);
    Graph::Id xa_emb = audio_fuse(g, xa_base, c_a_node);

    std::size_t nv = g.val(xv_emb).rows, na = g.val(xa_emb).rows;

    std::vector<TokenInfo> noisy_tokens(seq.tokens.begin() +
                                            static_cast<std::ptrdiff_t>(seq.n_condition),
                                        seq.tokens.end());
    auto noisy_pos = rope::assign_positions(noisy_tokens, seq.motion_frames_k, seq.sink_offset);

    Graph::Id x;
    std::vector<Modality> mods;
    std::size_t noisy_row0 = 0;

    if (cache) {
        require(cache->valid, "forward: invalid cache");
        if (cache->fingerprint != cond_fingerprint(seq, prompt_ids))
            throw std::runtime_error("forward: stale condition cache");
        x = g.concat_rows({xv_emb, xa_emb});
        Tensor angles = tile_angles(noisy_pos, cfg_.n_heads, cfg_.head_dim, cfg_.rope_base);
        Tensor ones = Tensor::full(nv + na, cache->n_cond + nv + na, 1.0);
        for (const TokenInfo& t : noisy_tokens) mods.push_back(t.modality);
        for (std::size_t b = 0; b < cfg_.n_blocks; ++b) {
            x = attend(g, x, ones, angles, "dit.blk" + std::to_string(b), nullptr, nullptr,
                       &cache->k[b], &cache->v[b]);
            x = moe_ffn(g, x, mods, b);
        }
        noisy_row0 = 0;
    } else {
        std::vector<TokenInfo> tokens;
        for (std::size_t i = 0; i < prompt_ids.size(); ++i)
            tokens.push_back({Role::prompt, Modality::video, 0, true});
        tokens.insert(tokens.end(), seq.tokens.begin(), seq.tokens.end());

        std::vector<Graph::Id> segs;
        if (!prompt_ids.empty()) {
            std::vector<std::size_t> ids(prompt_ids.begin(), prompt_ids.end());
            Graph::Id p = g.gather_rows(leafp(g, "dit.prompt_emb"), ids);
            Graph::Id role_row = g.slice_rows(leafp(g, "dit.role_emb"), role_index(Role::prompt),
                                              role_index(Role::prompt) + 1);
            segs.push_back(g.add_rowvec(g.add_rowvec(p, role_row), temb0));
        }
        segs.push_back(embed_video_segment(g, seq.ref, Role::reference, temb0));
        if (!seq.sink_v.empty()) {
            segs.push_back(embed_video_segment(g, seq.sink_v, Role::sink, temb0));
            segs.push_back(embed_audio_segment(g, seq.sink_a, Role::sink, temb0));
        }
        if (!seq.motion_v.empty()) {
            segs.push_back(embed_video_segment(g, seq.motion_v, Role::motion, temb0));
            segs.push_back(embed_audio_segment(g, seq.motion_a, Role::motion, temb0));
        }
        segs.push_back(xv_emb);
        segs.push_back(xa_emb);
        x = g.concat_rows(segs);

        auto pos = rope::assign_positions(tokens, seq.motion_frames_k, seq.sink_offset);
        Tensor angles = tile_angles(pos, cfg_.n_heads, cfg_.head_dim, cfg_.rope_base);
        Tensor mask = build_mask(tokens);
        for (const TokenInfo& t : tokens) mods.push_back(t.modality);
        for (std::size_t b = 0; b < cfg_.n_blocks; ++b) {
            x = attend(g, x, mask, angles, "dit.blk" + std::to_string(b));
            x = moe_ffn(g, x, mods, b);
        }
        noisy_row0 = tokens.size() - nv - na;
    }

    Graph::Id hv = g.slice_rows(x, noisy_row0, noisy_row0 + nv);
    Graph::Id ha = g.slice_rows(x, noisy_row0 + nv, noisy_row0 + nv + na);

    Out out;
    out.f_v = g.add_rowvec(g.matmul(hv, leafp(g, "dit.head_v")), leafp(g, "dit.head_v_b"));
    Tensor ones_a = Tensor::full(na, na, 1.0);
    ha = mini_block(g, ha, "dit.adec0", ones_a);
    out.f_a = g.add_rowvec(g.matmul(ha, leafp(g, "dit.head_a")), leafp(g, "dit.head_a_b"));
    return out;
}

std::pair<LatentBlock, LatentBlock> JointDenoiser::predict(const PackedSequence& seq,
                                                           const std::vector<int>& prompt_ids,
                                                           const KVCache* cache) {
    Graph g;
    Out o = forward(g, seq, prompt_ids, cache);
    LatentBlock fv = video_from_rows(g.val(o.f_v), seq.x_v.channels, seq.x_v.frames,
                                     seq.x_v.height, seq.x_v.width);
    LatentBlock fa = audio_from_rows(g.val(o.f_a));
    return {fv, fa};
}

}  // namespace streamchar
