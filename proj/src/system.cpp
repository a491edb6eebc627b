#include "streamchar/system.hpp"

#include <cmath>

namespace streamchar {

namespace {

// Fractional tokens spoken once `boundary` audio frames have played.
double progress_at(const SynthSample& s, std::size_t boundary) {
    std::size_t acc = 0;
    double p = 0.0;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
        if (acc + s.durations[i] <= boundary) {
            acc += s.durations[i];
            p = static_cast<double>(i + 1);
        } else {
            return static_cast<double>(i) +
                   static_cast<double>(boundary - acc) / static_cast<double>(s.durations[i]);
        }
    }
    return p;
}

}  // namespace

System::System(SystemConfig c) : cfg(std::move(c)), orch((cfg.finalize(), cfg.orch)),
                                 dit(cfg.dit), pap(cfg.pap) {}

SynthSample System::draw_sample(Rng& rng) const {
    std::size_t span = cfg.train_tokens_max - cfg.train_tokens_min + 1;
    std::size_t n = cfg.train_tokens_min + rng.below(span);
    return gen_sample(cfg.world, n, rng.next_u64());
}

std::size_t System::n_full_chunks(const SynthSample& s) const {
    return s.video.frames / cfg.chunk_video_frames;
}

ChunkData System::make_chunk(const SynthSample& s, std::size_t chunk_idx) const {
    const std::size_t F = cfg.chunk_video_frames, A = cfg.chunk_audio_frames();
    require((chunk_idx + 1) * F <= s.video.frames, "make_chunk: chunk beyond sample");

    ChunkData cd;
    cd.z_v = video_frame_slice(s.video, chunk_idx * F, (chunk_idx + 1) * F);
    cd.z_a = audio_frame_slice(s.audio, chunk_idx * A, (chunk_idx + 1) * A);
    cd.ref = video_frame_slice(s.video, 0, 1);
    cd.ref_audio = audio_frame_slice(s.audio, 0, std::min(cfg.ref_audio_frames, s.audio.frames));
    cd.prompt_ids = {static_cast<int>(s.tokens[0] % cfg.dit.prompt_vocab)};

    if (chunk_idx >= 1) {
        const std::size_t M = cfg.motion_video_frames;
        cd.motion.video = video_frame_slice(s.video, chunk_idx * F - M, chunk_idx * F);
        cd.motion.audio = audio_frame_slice(s.audio, chunk_idx * A - 4 * M, chunk_idx * A);
        const std::size_t S = cfg.sink_video_frames;
        cd.sink.video = video_frame_slice(s.video, 0, S);
        cd.sink.audio = audio_frame_slice(s.audio, 0, 4 * S);
    }

    // History: everything played before this chunk, truncated by whole
    // tokens to the cap (the token straddling the boundary gets clipped).
    std::size_t boundary = chunk_idx * A;
    std::vector<std::uint32_t> htok;
    std::vector<std::size_t> hdur;
    std::size_t acc = 0;
    for (std::size_t i = 0; i < s.tokens.size() && acc < boundary; ++i) {
        std::size_t d = std::min(s.durations[i], boundary - acc);
        htok.push_back(s.tokens[i]);
        hdur.push_back(d);
        acc += d;
    }
    LatentBlock haud = audio_frame_slice(s.audio, 0, boundary);
    cd.history_audio = truncate_history(haud, htok, hdur, cfg.orch.history_cap_frames()).audio;

    // Transcript window: starts at the token active when the chunk begins,
    // reaches past the chunk-end token with a short lookahead.
    double p_start = progress_at(s, boundary);
    double p_end = progress_at(s, std::min(boundary + A, s.audio.frames));
    std::size_t w0 = static_cast<std::size_t>(std::floor(p_start));
    std::size_t w1 = std::min(s.tokens.size(),
                              static_cast<std::size_t>(std::ceil(p_end)) + 2);
    cd.window_transcript.assign(s.tokens.begin() + static_cast<std::ptrdiff_t>(w0),
                                s.tokens.begin() + static_cast<std::ptrdiff_t>(w1));
    cd.endpoint = p_end - static_cast<double>(w0);
    return cd;
}

OrchestratorInput System::make_orch_input(const GenCond& cond, const LatentBlock& x_t_a,
                                          double t) const {
    OrchestratorInput in;
    in.ref_audio = cond.ref_audio;
    in.prompt_ids = cond.prompt_ids;
    in.transcript = cond.window_transcript;
    in.history_audio = cond.history_audio;
    in.x_t_a = x_t_a;
    in.t = t;
    return in;
}

System::LossOut System::loss_graph(Graph& g, const ChunkData& cd, double t, Rng& noise_rng) {
    LatentBlock eps_v = randn_like(cd.z_v, noise_rng);
    LatentBlock eps_a = randn_like(cd.z_a, noise_rng);
    flowcore::FlowState fs = flowcore::corrupt(cd.z_v, cd.z_a, eps_v, eps_a, t);

    OrchestratorInput oin;
    oin.ref_audio = cd.ref_audio;
    oin.prompt_ids = cd.prompt_ids;
    oin.transcript = cd.window_transcript;
    oin.history_audio = cd.history_audio;
    oin.x_t_a = fs.x_a;
    oin.t = t;
    Orchestrator::Out oc = orch.condition(g, oin);

    PackedSequence seq = dit.pack(cd.ref, cd.motion, cd.sink, fs.x_v, fs.x_a, g.val(oc.c_a), t);
    JointDenoiser::Out out = dit.forward(g, seq, cd.prompt_ids, nullptr, oc.c_a);

    Tensor tv = JointDenoiser::video_rows(flowcore::velocity_target(cd.z_v, fs.eps_v));
    Tensor ta = JointDenoiser::audio_rows(flowcore::velocity_target(cd.z_a, fs.eps_a));
    Graph::Id flow = flowcore::flow_loss_node(g, out.f_v, out.f_a, tv, ta);
    Graph::Id pl = g.smooth_l1(pap.forward(g, oc.transcript_states, oc.c_a).s_hat, cd.endpoint);

    LossOut lo;
    lo.total = g.add(flow, pl);
    lo.flow = g.val(flow).v[0];
    lo.pap = g.val(pl).v[0];
    return lo;
}

GenOut System::generate_chunk(JointDenoiser& net, const GenCond& cond,
                              const std::vector<double>& schedule, Rng& noise_rng,
                              bool use_cache) {
    const std::size_t F = cfg.chunk_video_frames, A = cfg.chunk_audio_frames();
    const WorldConfig& w = cfg.world;
    LatentBlock nv = randn_like(
        LatentBlock::video(w.video_channels, F, w.video_height, w.video_width), noise_rng);
    LatentBlock na = randn_like(LatentBlock::audio(A, w.audio_channels), noise_rng);

    GenOut out;
    KVCache cache;
    flowcore::Denoiser f = [&](const LatentBlock& x_v, const LatentBlock& x_a, double t) {
        Tensor c_a = orch.condition_values(make_orch_input(cond, x_a, t));
        PackedSequence seq = net.pack(cond.ref, cond.motion, cond.sink, x_v, x_a, c_a, t);
        ++out.denoiser_calls;
        if (!use_cache) return net.predict(seq, cond.prompt_ids);
        std::uint64_t fp = net.cond_fingerprint(seq, cond.prompt_ids);
        if (!cache.valid || cache.fingerprint != fp) cache = net.build_cache(seq, cond.prompt_ids);
        return net.predict(seq, cond.prompt_ids, &cache);
    };
    auto [z_v, z_a] = flowcore::sample(f, nv, na, schedule);
    out.z_v = z_v;
    out.z_a = z_a;

    // Endpoint read-out on the finished audio at t = 0.
    Graph g;
    Orchestrator::Out oc = orch.condition(g, make_orch_input(cond, z_a, 0.0));
    Pap::Out po = pap.forward(g, oc.transcript_states, oc.c_a);
    out.s_hat = g.val(po.s_hat).v[0];
    return out;
}

void System::train_teacher(std::size_t steps, double lr, Rng& rng,
                           const std::function<void(const TrainLog&)>& log, double orch_lr) {
    if (orch_lr <= 0.0) orch_lr = lr;
    for (std::size_t step = 0; step < steps; ++step) {
        SynthSample s = draw_sample(rng);
        std::size_t nc = n_full_chunks(s);
        require(nc >= 1, "train_teacher: sample shorter than one chunk");
        std::size_t ci = rng.below(nc);
        double t = rng.uniform(0.001, 1.0);

        ChunkData cd = make_chunk(s, ci);
        orch.params().zero_grad();
        dit.params().zero_grad();
        pap.params().zero_grad();
        Graph g;
        LossOut lo = loss_graph(g, cd, t, rng);
        g.backward(lo.total);
        require_finite(orch.params().grads_finite() && dit.params().grads_finite() &&
                    pap.params().grads_finite(),
                "train_teacher: non-finite gradients");
        orch.params().adam_step(orch_lr, 0.9, 0.999, 1e-8);
        dit.params().adam_step(lr, 0.9, 0.999, 1e-8);
        pap.params().adam_step(lr, 0.9, 0.999, 1e-8);
        if (log) log(TrainLog{step, lo.flow, lo.pap});
    }
}

double System::pretrain_orchestrator(std::size_t steps, double lr, Rng& rng) {
    double tail = 0.0;
    std::size_t tail_n = 0;
    for (std::size_t step = 0; step < steps; ++step) {
        SynthSample s = draw_sample(rng);
        std::size_t nc = n_full_chunks(s);
        require(nc >= 1, "pretrain_orchestrator: sample shorter than one chunk");
        ChunkData cd = make_chunk(s, rng.below(nc));
        double t = rng.uniform(0.001, 1.0);
        // Decoy noisy-audio input: x_t is built from a different sample's
        // audio. With the real x_t the readout can match its clean component
        // against the ground-truth history instead of learning the
        // transcript -> audio mapping, and that shortcut is worthless at
        // generation time. The decoy keeps the input statistics while
        // leaving the transcript as the only signal that explains the
        // target, at every noise level.
        SynthSample decoy = draw_sample(rng);
        ChunkData dc = make_chunk(decoy, rng.below(n_full_chunks(decoy)));
        LatentBlock eps_a = randn_like(cd.z_a, rng);
        LatentBlock x_a = dc.z_a;
        for (std::size_t i = 0; i < x_a.v.size(); ++i)
            x_a.v[i] = (1.0 - t) * x_a.v[i] + t * eps_a.v[i];

        OrchestratorInput oin;
        oin.ref_audio = cd.ref_audio;
        oin.prompt_ids = cd.prompt_ids;
        oin.transcript = cd.window_transcript;
        oin.history_audio = cd.history_audio;
        oin.x_t_a = x_a;
        oin.t = t;

        orch.params().zero_grad();
        pap.params().zero_grad();
        Graph g;
        Orchestrator::Out oc = orch.condition(g, oin);
        Graph::Id loss =
            g.mean_sq_diff(orch.audio_readout(g, oc.c_a), JointDenoiser::audio_rows(cd.z_a));
        g.backward(loss);

        require(orch.params().grads_finite(), "pretrain_orchestrator: non-finite gradients");
        orch.params().adam_step(lr, 0.9, 0.999, 1e-8);

        // Second pass on the real finished audio at t = 0: endpoint
        // supervision trains the pointer to localize progress. Only the
        // pointer updates here — mixing these gradients into the
        // orchestrator swamps the readout gradients in the shared Adam
        // second-moment estimate and stalls the content pathway.
        orch.params().zero_grad();
        Graph g2;
        OrchestratorInput oin2 = oin;
        oin2.x_t_a = cd.z_a;
        oin2.t = 0.0;
        Orchestrator::Out oc2 = orch.condition(g2, oin2);
        Graph::Id ploss =
            g2.smooth_l1(pap.forward(g2, oc2.transcript_states, oc2.c_a).s_hat, cd.endpoint);
        g2.backward(ploss);
        require(pap.params().grads_finite(), "pretrain_orchestrator: non-finite gradients");
        pap.params().adam_step(lr, 0.9, 0.999, 1e-8);
        if (step + 50 >= steps) {
            tail += g.val(loss).v[0];
            ++tail_n;
        }
    }
    return tail_n ? tail / static_cast<double>(tail_n) : 0.0;
}

double System::pap_mae(std::size_t n_chunks, Rng& rng) {
    double err = 0.0;
    std::size_t done = 0;
    while (done < n_chunks) {
        SynthSample s = draw_sample(rng);
        std::size_t nc = n_full_chunks(s);
        for (std::size_t ci = 0; ci < nc && done < n_chunks; ++ci, ++done) {
            ChunkData cd = make_chunk(s, ci);
            Graph g;
            OrchestratorInput oin;
            oin.ref_audio = cd.ref_audio;
            oin.prompt_ids = cd.prompt_ids;
            oin.transcript = cd.window_transcript;
            oin.history_audio = cd.history_audio;
            oin.x_t_a = cd.z_a;
            oin.t = 0.0;
            Orchestrator::Out oc = orch.condition(g, oin);
            Pap::Out po = pap.forward(g, oc.transcript_states, oc.c_a);
            err += std::abs(g.val(po.s_hat).v[0] - cd.endpoint);
        }
    }
    return err / static_cast<double>(n_chunks);
}

}  // namespace streamchar
