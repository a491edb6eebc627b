#include "doctest.h"
#include "streamchar/system.hpp"

using namespace streamchar;

namespace {

SystemConfig small_cfg() {
    SystemConfig c;
    c.world.vocab_size = 10;
    c.world.video_channels = 2;
    c.world.video_height = 1;
    c.world.video_width = 1;
    c.world.audio_channels = 2;
    c.dit.model_dim = 8;
    c.dit.n_heads = 2;
    c.dit.head_dim = 4;
    c.dit.n_blocks = 1;
    c.dit.expert_hidden = 8;
    c.dit.prompt_vocab = 4;
    c.orch.model_dim = 8;
    c.orch.n_heads = 2;
    c.orch.head_dim = 4;
    c.orch.n_blocks = 1;
    c.orch.ffn_hidden = 8;
    c.orch.cond_dim = 8;
    c.pap.attn_dim = 4;
    c.pap.head_hidden = 4;
    c.chunk_video_frames = 3;
    c.motion_video_frames = 3;
    c.sink_video_frames = 3;
    c.ref_audio_frames = 4;
    c.train_tokens_min = 8;
    c.train_tokens_max = 12;
    return c;
}

}  // namespace

TEST_SUITE_BEGIN("system");

TEST_CASE("config finalize propagates shared dimensions") {
    SystemConfig c = small_cfg();
    c.finalize();
    CHECK(c.dit.cond_dim == c.orch.cond_dim);
    CHECK(c.orch.vocab == c.world.vocab_size);
    CHECK(c.dit.video_channels == c.world.video_channels);
    CHECK(c.pap.state_dim == c.orch.model_dim);
    CHECK(c.chunk_audio_frames() == 4 * c.chunk_video_frames);
}

TEST_CASE("chunks slice the sample and label the endpoint consistently") {
    System sys(small_cfg());
    Rng r(71);
    SynthSample s = sys.draw_sample(r);
    std::size_t nc = sys.n_full_chunks(s);
    REQUIRE(nc >= 2);
    const std::size_t F = sys.cfg.chunk_video_frames, A = sys.cfg.chunk_audio_frames();

    std::vector<double> eps = chunk_endpoints(s, A);
    for (std::size_t ci = 0; ci < nc; ++ci) {
        ChunkData cd = sys.make_chunk(s, ci);
        CHECK(cd.z_v.frames == F);
        CHECK(cd.z_a.frames == A);
        for (std::size_t i = 0; i < cd.z_a.size(); ++i)
            CHECK(cd.z_a.v[i] == s.audio.v[ci * A * s.audio.channels + i]);
        if (ci == 0) {
            CHECK(cd.motion.empty());
            CHECK(cd.sink.empty());
            CHECK(cd.history_audio.frames == 0);
        } else {
            CHECK(cd.motion.video.frames == sys.cfg.motion_video_frames);
            CHECK(cd.motion.audio.frames == 4 * sys.cfg.motion_video_frames);
            CHECK(cd.sink.video.frames == sys.cfg.sink_video_frames);
            CHECK(cd.history_audio.frames <= sys.cfg.orch.history_cap_frames());
        }
        // window-relative endpoint agrees with the absolute boundary scan
        double abs_end = eps[ci];
        CHECK(cd.endpoint <= static_cast<double>(cd.window_transcript.size()));
        CHECK(cd.endpoint >= 0.0);
        double window_start = abs_end - cd.endpoint;
        CHECK(window_start == doctest::Approx(std::floor(window_start)).epsilon(1e-9));
    }
}

TEST_CASE("joint loss graph is finite and reaches all parameter groups") {
    System sys(small_cfg());
    Rng r(72);
    SynthSample s = sys.draw_sample(r);
    ChunkData cd = sys.make_chunk(s, 1);
    sys.orch.params().zero_grad();
    sys.dit.params().zero_grad();
    sys.pap.params().zero_grad();
    Graph g;
    Rng nr(5);
    System::LossOut lo = sys.loss_graph(g, cd, 0.5, nr);
    CHECK(std::isfinite(lo.flow));
    CHECK(std::isfinite(lo.pap));
    g.backward(lo.total);
    auto some_nonzero = [](ParameterSet& ps) {
        bool nz = false;
        ps.for_each([&](const std::string&, Tensor&, Tensor& g) {
            for (double x : g.v)
                if (x != 0.0) nz = true;
        });
        return nz;
    };
    CHECK(some_nonzero(sys.dit.params()));
    CHECK(some_nonzero(sys.orch.params()));
    CHECK(some_nonzero(sys.pap.params()));
}

TEST_CASE("training replays identically under the same seed") {
    std::vector<double> curve1, curve2;
    for (auto* curve : {&curve1, &curve2}) {
        System sys(small_cfg());
        Rng r(73);
        sys.train_teacher(5, 1e-3, r,
                          [&](const System::TrainLog& l) { curve->push_back(l.flow_loss); });
    }
    CHECK(curve1 == curve2);
}

TEST_CASE("orchestrator warm-up leaves the denoiser untouched, deterministically") {
    std::vector<double> tails;
    std::vector<std::uint64_t> orch_fps;
    for (int rep = 0; rep < 2; ++rep) {
        System sys(small_cfg());
        std::uint64_t dit_before = sys.dit.params().fingerprint();
        std::uint64_t orch_before = sys.orch.params().fingerprint();
        std::uint64_t pap_before = sys.pap.params().fingerprint();
        Rng r(75);
        tails.push_back(sys.pretrain_orchestrator(20, 1e-3, r));
        CHECK(sys.dit.params().fingerprint() == dit_before);   // denoiser untouched
        CHECK(sys.orch.params().fingerprint() != orch_before); // orchestrator moved
        CHECK(sys.pap.params().fingerprint() != pap_before);   // pointer moved
        CHECK(std::isfinite(tails.back()));
        orch_fps.push_back(sys.orch.params().fingerprint());
    }
    CHECK(tails[0] == tails[1]);
    CHECK(orch_fps[0] == orch_fps[1]);  // replay identical
}

TEST_CASE("joint training honors a separate orchestrator learning rate") {
    auto max_orch_delta = [](System& sys) {
        System fresh(small_cfg());
        double worst = 0.0;
        std::as_const(sys.orch.params()).for_each([&](const std::string& n, const Tensor& v) {
            const Tensor& v0 = fresh.orch.params().value(n);
            for (std::size_t i = 0; i < v.size(); ++i)
                worst = std::max(worst, std::abs(v.v[i] - v0.v[i]));
        });
        return worst;
    };
    System frozen(small_cfg());
    Rng r1(76);
    frozen.train_teacher(3, 1e-3, r1, {}, 1e-12);
    CHECK(max_orch_delta(frozen) < 1e-9);
    System moved(small_cfg());
    Rng r2(76);
    moved.train_teacher(3, 1e-3, r2, {}, 1e-3);
    CHECK(max_orch_delta(moved) > 1e-6);
}

TEST_CASE("chunk generation: one denoiser call per schedule step, cache agrees") {
    System sys(small_cfg());
    Rng r(74);
    sys.dit.randomize(r, 0.2);
    sys.orch.randomize(r, 0.2);
    sys.pap.randomize(r, 0.2);
    SynthSample s = sys.draw_sample(r);
    GenCond cond;
    ChunkData cd = sys.make_chunk(s, 1);
    cond.ref = cd.ref;
    cond.ref_audio = cd.ref_audio;
    cond.history_audio = cd.history_audio;
    cond.window_transcript = cd.window_transcript;
    cond.prompt_ids = cd.prompt_ids;
    cond.motion = cd.motion;
    cond.sink = cd.sink;

    Rng na(99), nb(99);
    GenOut a = sys.generate_chunk(sys.dit, cond, sys.cfg.student_schedule, na, true);
    GenOut b = sys.generate_chunk(sys.dit, cond, sys.cfg.student_schedule, nb, false);
    CHECK(a.denoiser_calls == sys.cfg.student_schedule.size());
    for (std::size_t i = 0; i < a.z_v.size(); ++i) CHECK(std::abs(a.z_v.v[i] - b.z_v.v[i]) < 1e-5);
    for (std::size_t i = 0; i < a.z_a.size(); ++i) CHECK(std::abs(a.z_a.v[i] - b.z_a.v[i]) < 1e-5);
    CHECK(a.s_hat == doctest::Approx(b.s_hat).epsilon(1e-6));
    CHECK(a.z_v.provenance == Provenance::generated);
}

TEST_SUITE_END();
