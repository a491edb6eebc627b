#include <cstdio>
#include <numeric>

#include "doctest.h"
#include "streamchar/distill.hpp"
#include "streamchar/stream.hpp"

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

// independent brute-force oracle for the drift metric
double drift_oracle(const std::vector<double>& s, std::size_t window, std::size_t segment) {
    auto mean_of = [&](std::size_t b, std::size_t e) {
        double m = 0.0;
        for (std::size_t i = b; i < e; ++i) m += s[i];
        return m / static_cast<double>(e - b);
    };
    double base = mean_of(0, segment);
    double worst = 0.0;
    for (std::size_t e = window; e <= s.size(); e += window)
        worst = std::max(worst, std::abs(mean_of(e - segment, e) - base));
    return worst;
}

}  // namespace

TEST_SUITE_BEGIN("stream");

TEST_CASE("latency arithmetic on the reference stage timings") {
    StageTimes t{0.96, 0.30, 0.05, 0.025};
    CHECK(t.sequential() == doctest::Approx(1.335).epsilon(1e-12));
    CHECK(t.overlap() == doctest::Approx(1.285).epsilon(1e-12));
    CHECK(chunk_budget_seconds() == doctest::Approx(33.0 / 24.0).epsilon(1e-12));
    CHECK(t.sequential() < chunk_budget_seconds());
    CHECK(t.overlap() < t.sequential());
    LatencyRecord rec{t, chunk_budget_seconds()};
    CHECK(rec.within_budget());
}

TEST_CASE("overlapped time never exceeds sequential time") {
    Rng r(21);
    for (int i = 0; i < 1000; ++i) {
        StageTimes t{r.uniform(), r.uniform(), r.uniform(), r.uniform()};
        CHECK(t.overlap() <= t.sequential() + 1e-15);
        CHECK(t.overlap() >= t.generate + t.write);
    }
}

TEST_CASE("drift matches a brute-force oracle on random series") {
    Rng r(22);
    for (int rep = 0; rep < 100; ++rep) {
        std::size_t n = 30 + static_cast<std::size_t>(r.uniform() * 200.0);
        std::vector<double> s(n);
        for (double& x : s) x = r.gaussian();
        CHECK(drift(s) == doctest::Approx(drift_oracle(s, 30, 5)).epsilon(1e-12));
    }
}

TEST_CASE("drift is zero for a constant series and rejects short series") {
    std::vector<double> flat(120, 3.25);
    CHECK(drift(flat) == 0.0);
    std::vector<double> shorty(29, 0.0);
    CHECK_THROWS_AS(drift(shorty), std::invalid_argument);
    // a late level shift is picked up
    std::vector<double> shifted(60, 1.0);
    for (std::size_t i = 30; i < 60; ++i) shifted[i] = 2.0;
    CHECK(drift(shifted) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("transcription proxy is exact on ground-truth audio, positive on noise") {
    WorldConfig w;
    SynthSample s = gen_sample(w, 40, 99);
    CHECK(wer_proxy(w, s.tokens, s.durations, s.audio) == 0.0);

    LatentBlock noisy = s.audio;
    Rng r(5);
    for (double& x : noisy.v) x += 3.0 * r.gaussian();
    CHECK(wer_proxy(w, s.tokens, s.durations, noisy) > 0.0);

    // truncated audio: missing tokens count as errors
    LatentBlock half = s.audio;
    half.frames /= 2;
    half.v.resize(half.frames * w.audio_channels);
    CHECK(wer_proxy(w, s.tokens, s.durations, half) > 0.0);
}

TEST_CASE("quality proxy ranks ground truth above noise") {
    WorldConfig w;
    RefStats ref = compute_ref_stats(w, 8, 60, 7);
    SynthSample s = gen_sample(w, 60, 1234);
    double good = quality_proxy(s.video, s.audio, ref, w.latent_video_fps, w.latent_audio_rate);
    LatentBlock nv = s.video, na = s.audio;
    Rng r(6);
    for (double& x : nv.v) x = 5.0 * r.gaussian();
    for (double& x : na.v) x = 5.0 * r.gaussian();
    double bad = quality_proxy(nv, na, ref, w.latent_video_fps, w.latent_audio_rate);
    CHECK(good > bad);
}

TEST_CASE("stream container round-trips chunks bit-comparably") {
    SystemConfig sc = small_cfg();
    System sys(sc);
    Rng r(31);
    sys.dit.randomize(r, 0.2);
    sys.orch.randomize(r, 0.2);
    sys.pap.randomize(r, 0.2);
    SynthSample script = gen_sample(sc.world, 60, 777);
    StreamEngine eng(sys, sys.dit, script, true);
    std::vector<StreamChunk> chunks;
    Rng gr(32);
    for (int i = 0; i < 4 && !eng.done(); ++i) chunks.push_back(eng.step(gr));
    REQUIRE(!chunks.empty());

    std::string path = "test_stream_roundtrip.scs";
    save_stream(path, sc.world, chunks);
    WorldConfig cfg2;
    std::vector<StreamChunk> back = load_stream(path, cfg2);
    std::remove(path.c_str());

    REQUIRE(back.size() == chunks.size());
    CHECK(cfg2.vocab_size == sc.world.vocab_size);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        CHECK(back[i].index == chunks[i].index);
        REQUIRE(back[i].z_a.v.size() == chunks[i].z_a.v.size());
        // payloads are stored as 32-bit floats
        for (std::size_t j = 0; j < chunks[i].z_a.v.size(); ++j)
            CHECK(back[i].z_a.v[j] ==
                  doctest::Approx(chunks[i].z_a.v[j]).epsilon(1e-6));
        CHECK(back[i].s_hat == doctest::Approx(chunks[i].s_hat).epsilon(1e-6));
        CHECK(back[i].cursor == doctest::Approx(chunks[i].cursor).epsilon(1e-6));
        CHECK(back[i].lat.measured.generate ==
              doctest::Approx(chunks[i].lat.measured.generate).epsilon(1e-6));
    }
}

TEST_CASE("stream engine invariants over a short run") {
    SystemConfig sc = small_cfg();
    System sys(sc);
    Rng r(41);
    sys.dit.randomize(r, 0.2);
    sys.orch.randomize(r, 0.2);
    sys.pap.randomize(r, 0.2);
    SynthSample script = gen_sample(sc.world, 80, 888);
    StreamEngine eng(sys, sys.dit, script, true);
    Rng gr(42);
    double prev_cursor = 0.0;
    std::size_t cap = sys.orch.config().history_cap_frames();
    for (int i = 0; i < 6 && !eng.done(); ++i) {
        StreamChunk c = eng.step(gr);
        CHECK(c.cursor >= prev_cursor);
        prev_cursor = c.cursor;
        CHECK(c.z_v.frames == sc.chunk_video_frames);
        CHECK(c.z_a.frames == sc.chunk_audio_frames());
        CHECK(eng.history_frames() <= cap);
        CHECK(eng.codec_encode_calls() == 0);
    }
    CHECK(eng.chunks_emitted() >= 6);
}

TEST_CASE("stream engine replays identically under the same seed") {
    SystemConfig sc = small_cfg();
    std::vector<double> a1, a2;
    for (auto* out : {&a1, &a2}) {
        System sys(sc);
        Rng r(51);
        sys.dit.randomize(r, 0.2);
        sys.orch.randomize(r, 0.2);
        sys.pap.randomize(r, 0.2);
        SynthSample script = gen_sample(sc.world, 60, 999);
        StreamEngine eng(sys, sys.dit, script, true);
        Rng gr(52);
        for (int i = 0; i < 4 && !eng.done(); ++i) {
            StreamChunk c = eng.step(gr);
            out->insert(out->end(), c.z_a.v.begin(), c.z_a.v.end());
        }
    }
    CHECK(a1 == a2);
}

TEST_SUITE_END();
