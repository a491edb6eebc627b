#include "streamchar/distill.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace streamchar {

Distiller::Distiller(System& t, DistillConfig c)
    : cfg(std::move(c)), teacher(t), student(t.dit.config()), fake(t.dit.config()) {
    student.params().copy_values_from(teacher.dit.params());
    fake.params().copy_values_from(teacher.dit.params());
    teacher_fp_ = teacher.dit.params().fingerprint();
}

bool Distiller::teacher_unchanged() const {
    return teacher.dit.params().fingerprint() == teacher_fp_;
}

Distiller::Unrolled Distiller::unroll_student(Graph& g, const GenCond& cond, Rng& rng) {
    const SystemConfig& sc = teacher.cfg;
    const WorldConfig& w = sc.world;
    const std::size_t F = sc.chunk_video_frames, A = sc.chunk_audio_frames();

    LatentBlock nv = randn_like(
        LatentBlock::video(w.video_channels, F, w.video_height, w.video_width), rng);
    LatentBlock na = randn_like(LatentBlock::audio(A, w.audio_channels), rng);
    Graph::Id xv = g.constant(JointDenoiser::video_rows(nv));
    Graph::Id xa = g.constant(JointDenoiser::audio_rows(na));

    const std::vector<double>& sched = sc.student_schedule;
    for (std::size_t i = 0; i < sched.size(); ++i) {
        double t = sched[i];
        double dt = t - ((i + 1 < sched.size()) ? sched[i + 1] : 0.0);
        LatentBlock x_v = JointDenoiser::video_from_rows(g.val(xv), w.video_channels, F,
                                                         w.video_height, w.video_width);
        LatentBlock x_a = JointDenoiser::audio_from_rows(g.val(xa));
        // The audio condition is read off the current iterate but treated
        // as data: gradients flow through the latents only.
        Tensor c_a = teacher.orch.condition_values(teacher.make_orch_input(cond, x_a, t));
        PackedSequence seq = student.pack(cond.ref, cond.motion, cond.sink, x_v, x_a, c_a, t);
        JointDenoiser::Out out = student.forward(g, seq, cond.prompt_ids, nullptr, -1, xv, xa);
        xv = g.sub(xv, g.scale(out.f_v, dt));
        xa = g.sub(xa, g.scale(out.f_a, dt));
    }

    Unrolled u;
    u.xv_rows = xv;
    u.xa_rows = xa;
    u.z_v = JointDenoiser::video_from_rows(g.val(xv), w.video_channels, F, w.video_height,
                                           w.video_width);
    u.z_a = JointDenoiser::audio_from_rows(g.val(xa));
    u.z_v.provenance = Provenance::generated;
    u.z_a.provenance = Provenance::generated;
    return u;
}

namespace {

// Raw (fake - real) velocity difference at the re-noised sample; the
// surrogate is its dot product with the sample, summed over all elements,
// so the pinned learning rates see full-scale gradients.
struct ScoreDiff {
    Tensor dv, da;
};

}  // namespace

void Distiller::fake_update(const GenCond& cond, const LatentBlock& z_v, const LatentBlock& z_a,
                            Rng& rng, StepLog& log) {
    double t = rng.uniform(0.02, 0.98);
    LatentBlock eps_v = randn_like(z_v, rng), eps_a = randn_like(z_a, rng);
    flowcore::FlowState fs = flowcore::corrupt(z_v, z_a, eps_v, eps_a, t);
    Tensor c_a = teacher.orch.condition_values(teacher.make_orch_input(cond, fs.x_a, t));

    Graph g;
    PackedSequence seq = fake.pack(cond.ref, cond.motion, cond.sink, fs.x_v, fs.x_a, c_a, t);
    JointDenoiser::Out out = fake.forward(g, seq, cond.prompt_ids);
    Tensor tv = JointDenoiser::video_rows(flowcore::velocity_target(z_v, fs.eps_v));
    Tensor ta = JointDenoiser::audio_rows(flowcore::velocity_target(z_a, fs.eps_a));
    // summed (not mean) squared error, matching the surrogate's scale
    Graph::Id loss = g.add(g.scale(g.mean_sq_diff(out.f_v, tv), static_cast<double>(tv.size())),
                           g.scale(g.mean_sq_diff(out.f_a, ta), static_cast<double>(ta.size())));
    log.fake_loss = g.val(loss).v[0];

    fake.params().zero_grad();
    g.backward(loss);
    require_finite(fake.params().grads_finite(), "fake_update: non-finite gradients");
    fake.params().sgd_step(cfg.lr_fake);
}

Distiller::StepLog Distiller::dmd_step(std::size_t step, Rng& rng) {
    SynthSample s = teacher.draw_sample(rng);
    std::size_t nc = teacher.n_full_chunks(s);
    GenCond cond = to_gen_cond(teacher.make_chunk(s, rng.below(nc)));

    Graph g;
    Unrolled u = unroll_student(g, cond, rng);

    double t = rng.uniform(0.02, 0.98);
    LatentBlock eps_v = randn_like(u.z_v, rng), eps_a = randn_like(u.z_a, rng);
    flowcore::FlowState fs = flowcore::corrupt(u.z_v, u.z_a, eps_v, eps_a, t);
    Tensor c_a = teacher.orch.condition_values(teacher.make_orch_input(cond, fs.x_a, t));

    PackedSequence seq =
        teacher.dit.pack(cond.ref, cond.motion, cond.sink, fs.x_v, fs.x_a, c_a, t);
    auto [real_v, real_a] = teacher.dit.predict(seq, cond.prompt_ids);
    auto [fake_v, fake_a] = fake.predict(seq, cond.prompt_ids);

    // With x0 = x_t - t*v, the clean-sample prediction gap between the fake
    // and real scores is t*(v_real - v_fake); applied as a constant gradient
    // on the generator output, it walks samples off the fake density toward
    // the real one.
    ScoreDiff d;
    d.dv = JointDenoiser::video_rows(real_v);
    d.da = JointDenoiser::audio_rows(real_a);
    Tensor fv = JointDenoiser::video_rows(fake_v), fa = JointDenoiser::audio_rows(fake_a);
    for (std::size_t i = 0; i < d.dv.size(); ++i) d.dv.v[i] = t * (d.dv.v[i] - fv.v[i]);
    for (std::size_t i = 0; i < d.da.size(); ++i) d.da.v[i] = t * (d.da.v[i] - fa.v[i]);

    Graph::Id loss = g.add(g.dot_const(u.xv_rows, d.dv), g.dot_const(u.xa_rows, d.da));
    StepLog log;
    log.step = step;
    log.grad_dot = g.val(loss).v[0];

    student.params().zero_grad();
    g.backward(loss);
    require_finite(student.params().grads_finite(), "dmd_step: non-finite gradients");
    student.params().sgd_step(cfg.lr_student);

    fake_update(cond, u.z_v, u.z_a, rng, log);
    return log;
}

namespace {
void emit(std::ostream* diag, int stage, const Distiller::StepLog& log) {
    if (!diag) return;
    nlohmann::json j{{"event", "distill_step"},
                     {"stage", stage},
                     {"step", log.step},
                     {"grad_dot", log.grad_dot},
                     {"fake_loss", log.fake_loss}};
    *diag << j.dump() << "\n";
}
}  // namespace

void Distiller::run_stage1(Rng& rng, std::ostream* diag) {
    for (std::size_t i = 0; i < cfg.stage1_steps; ++i) emit(diag, 1, dmd_step(i, rng));
    require(teacher_unchanged(), "run_stage1: teacher weights drifted");
}

GenCond Distiller::next_cond(const RolloutOut& so, const SynthSample& script, double cursor,
                             bool with_sink) const {
    const SystemConfig& sc = teacher.cfg;
    GenCond c;
    c.ref = video_frame_slice(script.video, 0, 1);
    c.ref_audio =
        audio_frame_slice(script.audio, 0, std::min(sc.ref_audio_frames, script.audio.frames));
    c.prompt_ids = {static_cast<int>(script.tokens[0] % sc.dit.prompt_vocab)};

    std::size_t w0 = static_cast<std::size_t>(std::floor(cursor));
    std::size_t w1 = std::min(script.tokens.size(), w0 + cfg.transcript_lookahead);
    require(w0 < script.tokens.size(), "next_cond: transcript exhausted");
    c.window_transcript.assign(script.tokens.begin() + static_cast<std::ptrdiff_t>(w0),
                               script.tokens.begin() + static_cast<std::ptrdiff_t>(w1));

    if (!so.chunks.empty()) {
        const std::size_t M = sc.motion_video_frames;
        const LatentBlock& pv = so.chunks.back().z_v;
        const LatentBlock& pa = so.chunks.back().z_a;
        c.motion.video = video_frame_slice(pv, pv.frames - M, pv.frames);
        c.motion.audio = audio_frame_slice(pa, pa.frames - 4 * M, pa.frames);
        require(c.motion.video.provenance == Provenance::generated,
                "next_cond: motion must come from generated frames");
        if (with_sink) {
            const std::size_t S = sc.sink_video_frames;
            c.sink.video = video_frame_slice(so.chunks.front().z_v, 0, S);
            c.sink.audio = audio_frame_slice(so.chunks.front().z_a, 0, 4 * S);
        }
        std::size_t cap = sc.orch.history_cap_frames();
        std::size_t h0 = so.audio.frames > cap ? so.audio.frames - cap : 0;
        c.history_audio = audio_frame_slice(so.audio, h0, so.audio.frames);
    }
    return c;
}

RolloutOut Distiller::rollout(JointDenoiser& net, const SynthSample& script,
                              std::size_t n_chunks, Rng& rng, bool with_sink,
                              std::ostream* diag) {
    RolloutOut so;
    double cursor = 0.0;
    std::uint64_t sink_fp = 0;
    for (std::size_t i = 0; i < n_chunks; ++i) {
        GenCond c = next_cond(so, script, cursor, with_sink);
        if (i >= 2 && with_sink) {
            // the sink is pinned to the first chunk and never re-derived
            std::uint64_t fp = hash_combine(c.sink.video.fingerprint(),
                                            c.sink.audio.fingerprint());
            require(fp == sink_fp, "rollout: sink content changed after chunk 0");
        }
        GenOut gout =
            teacher.generate_chunk(net, c, teacher.cfg.student_schedule, rng, true);
        double abs_s = std::floor(cursor) + gout.s_hat;
        double next = std::clamp(abs_s, cursor, static_cast<double>(script.tokens.size()));
        if (abs_s < cursor && diag)
            *diag << nlohmann::json{{"event", "pointer_clamp"},
                                    {"chunk", i},
                                    {"raw", abs_s},
                                    {"cursor", cursor}}
                         .dump()
                  << "\n";
        cursor = next;
        if (i == 0 && with_sink) {
            const std::size_t S = teacher.cfg.sink_video_frames;
            sink_fp = hash_combine(video_frame_slice(gout.z_v, 0, S).fingerprint(),
                                   audio_frame_slice(gout.z_a, 0, 4 * S).fingerprint());
        }
        so.video = concat_frames(so.video, gout.z_v);
        so.audio = concat_frames(so.audio, gout.z_a);
        so.chunks.push_back(std::move(gout));
        so.cursor.push_back(cursor);
        if (diag)
            *diag << nlohmann::json{{"event", "rollout_chunk"},
                                    {"chunk", i},
                                    {"cursor", cursor},
                                    {"denoiser_calls", so.chunks.back().denoiser_calls}}
                         .dump()
                  << "\n";
    }
    return so;
}

Distiller::StepLog Distiller::stage2_step(std::size_t step, Rng& rng) {
    const SystemConfig& sc = teacher.cfg;
    // Script long enough to carry the whole rollout.
    std::size_t need_frames = cfg.rollout_chunks * sc.chunk_audio_frames();
    std::size_t n_tokens = need_frames / sc.world.token_dur_min + 2;
    SynthSample script = gen_sample(sc.world, n_tokens, rng.next_u64());

    require(cfg.rollout_chunks >= cfg.loss_window, "stage2_step: window exceeds rollout");
    std::size_t prefix = cfg.rollout_chunks - cfg.loss_window;
    RolloutOut so = rollout(student, script, prefix, rng, cfg.use_sink);
    double cursor = so.cursor.empty() ? 0.0 : so.cursor.back();

    // Differentiable tail: each chunk unrolled on the same tape; the
    // conditioning carried between chunks is treated as data.
    Graph g;
    std::vector<Unrolled> window;
    std::vector<GenCond> conds;
    for (std::size_t i = 0; i < cfg.loss_window; ++i) {
        GenCond c = next_cond(so, script, cursor, cfg.use_sink);
        Unrolled u = unroll_student(g, c, rng);

        GenOut gout;
        gout.z_v = u.z_v;
        gout.z_a = u.z_a;
        {
            Graph gq;
            Orchestrator::Out oc =
                teacher.orch.condition(gq, teacher.make_orch_input(c, u.z_a, 0.0));
            Pap::Out po = teacher.pap.forward(gq, oc.transcript_states, oc.c_a);
            gout.s_hat = gq.val(po.s_hat).v[0];
        }
        double abs_s = std::floor(cursor) + gout.s_hat;
        cursor = std::clamp(abs_s, cursor, static_cast<double>(script.tokens.size()));
        so.video = concat_frames(so.video, gout.z_v);
        so.audio = concat_frames(so.audio, gout.z_a);
        so.chunks.push_back(std::move(gout));
        so.cursor.push_back(cursor);
        window.push_back(std::move(u));
        conds.push_back(std::move(c));
    }

    // Shared re-noise level across the window; the per-chunk surrogates sum
    // to the loss on the concatenated window.
    double t = rng.uniform(0.02, 0.98);
    StepLog log;
    log.step = step;
    Graph::Id total = -1;
    for (std::size_t i = 0; i < window.size(); ++i) {
        const Unrolled& u = window[i];
        LatentBlock eps_v = randn_like(u.z_v, rng), eps_a = randn_like(u.z_a, rng);
        flowcore::FlowState fs = flowcore::corrupt(u.z_v, u.z_a, eps_v, eps_a, t);
        Tensor c_a =
            teacher.orch.condition_values(teacher.make_orch_input(conds[i], fs.x_a, t));

        PackedSequence seq = teacher.dit.pack(conds[i].ref, conds[i].motion, conds[i].sink,
                                              fs.x_v, fs.x_a, c_a, t);
        auto [real_v, real_a] = teacher.dit.predict(seq, conds[i].prompt_ids);
        auto [fake_v, fake_a] = fake.predict(seq, conds[i].prompt_ids);

        Tensor dv = JointDenoiser::video_rows(real_v), da = JointDenoiser::audio_rows(real_a);
        Tensor fv = JointDenoiser::video_rows(fake_v), fa = JointDenoiser::audio_rows(fake_a);
        // clean-sample prediction gaps; summing the per-chunk surrogates
        // equals the surrogate on the concatenated window
        for (std::size_t k = 0; k < dv.size(); ++k) dv.v[k] = t * (dv.v[k] - fv.v[k]);
        for (std::size_t k = 0; k < da.size(); ++k) da.v[k] = t * (da.v[k] - fa.v[k]);

        Graph::Id part = g.add(g.dot_const(u.xv_rows, dv), g.dot_const(u.xa_rows, da));
        total = (total < 0) ? part : g.add(total, part);
    }
    log.grad_dot = g.val(total).v[0];

    student.params().zero_grad();
    g.backward(total);
    require_finite(student.params().grads_finite(), "stage2_step: non-finite gradients");
    student.params().sgd_step(cfg.lr_student);

    for (std::size_t i = 0; i < window.size(); ++i)
        fake_update(conds[i], window[i].z_v, window[i].z_a, rng, log);
    return log;
}

void Distiller::run_stage2(Rng& rng, std::ostream* diag) {
    for (std::size_t i = 0; i < cfg.stage2_steps; ++i) emit(diag, 2, stage2_step(i, rng));
    require(teacher_unchanged(), "run_stage2: teacher weights drifted");
}

}  // namespace streamchar
