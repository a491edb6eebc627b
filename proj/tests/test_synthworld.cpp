#include <cstdio>

#include "doctest.h"
#include "streamchar/synthworld.hpp"

using namespace streamchar;

TEST_SUITE_BEGIN("synthworld");

TEST_CASE("samples are deterministic in (config seed, draw seed)") {
    WorldConfig cfg;
    SynthSample a = gen_sample(cfg, 12, 55), b = gen_sample(cfg, 12, 55);
    CHECK(a.tokens == b.tokens);
    CHECK(a.audio.v == b.audio.v);
    CHECK(a.video.v == b.video.v);
    SynthSample c = gen_sample(cfg, 12, 56);
    CHECK(a.tokens != c.tokens);
}

TEST_CASE("token durations depend only on token id") {
    WorldConfig cfg;
    for (std::uint32_t t = 0; t < cfg.vocab_size; ++t) {
        std::size_t d = token_duration(cfg, t);
        CHECK(d >= cfg.token_dur_min);
        CHECK(d <= cfg.token_dur_max);
        CHECK(d == token_duration(cfg, t));
    }
}

TEST_CASE("audio is the concatenation of per-token signatures") {
    WorldConfig cfg;
    SynthSample s = gen_sample(cfg, 8, 3);
    std::size_t off = 0;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
        std::vector<double> sig = token_signature(cfg, s.tokens[i], s.durations[i]);
        for (std::size_t j = 0; j < sig.size(); ++j)
            CHECK(s.audio.v[off * cfg.audio_channels + j] == sig[j]);
        off += s.durations[i];
    }
    CHECK(s.audio.frames % 4 == 0);
    CHECK(s.video.frames == s.audio.frames / 4);
}

TEST_CASE("chunk endpoints match a manual duration scan") {
    WorldConfig cfg;
    SynthSample s = gen_sample(cfg, 10, 4);
    const std::size_t A = 36;
    std::vector<double> eps = chunk_endpoints(s, A);
    // oracle: simulate a cursor over (token, frames spoken) pairs
    std::size_t tok = 0, into = 0;
    for (std::size_t e = 0; e < eps.size(); ++e) {
        std::size_t frames = std::min(A, s.audio.frames - e * A);
        for (std::size_t f = 0; f < frames; ++f) {
            ++into;
            if (into == s.durations[tok] && tok + 1 < s.tokens.size()) {
                ++tok;
                into = 0;
            }
        }
        double expect = (into == s.durations[tok])
                            ? static_cast<double>(tok + 1)
                            : static_cast<double>(tok) +
                                  static_cast<double>(into) / static_cast<double>(s.durations[tok]);
        CHECK(eps[e] == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK(eps.back() == doctest::Approx(static_cast<double>(s.tokens.size())));
}

TEST_CASE("codec: 9 latent frames decode to 33 pixel frames") {
    CHECK(ToyCodec::decoded_frames(9) == 33);
    CHECK(ToyCodec::decoded_frames(1) == 1);
}

TEST_CASE("codec round-trip is the identity on latents") {
    WorldConfig cfg;
    ToyCodec codec(cfg);
    Rng r(6);
    LatentBlock v = randn_like(LatentBlock::video(cfg.video_channels, 9, 2, 2), r);
    LatentBlock a = randn_like(LatentBlock::audio(36, cfg.audio_channels), r);
    LatentBlock v2 = toy_codec_roundtrip(codec, v);
    LatentBlock a2 = toy_codec_roundtrip(codec, a);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v2.v[i] == doctest::Approx(v.v[i]).epsilon(1e-9));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a2.v[i] == doctest::Approx(a.v[i]).epsilon(1e-9));
}

TEST_CASE("codec counts encode calls only") {
    WorldConfig cfg;
    ToyCodec codec(cfg);
    Rng r(6);
    LatentBlock a = randn_like(LatentBlock::audio(8, cfg.audio_channels), r);
    codec.decode(a);
    CHECK(codec.encode_calls() == 0);
    codec.encode(a);
    codec.encode(a);
    CHECK(codec.encode_calls() == 2);
    codec.reset_encode_calls();
    CHECK(codec.encode_calls() == 0);
}

TEST_CASE("sample container round-trips bit-stably") {
    WorldConfig cfg;
    SynthSample s = gen_sample(cfg, 7, 11);
    std::string path = "test_sample.scw";
    save_sample(path, cfg, s);
    WorldConfig cfg2;
    SynthSample s2 = load_sample(path, cfg2);
    std::remove(path.c_str());
    CHECK(cfg2.vocab_size == cfg.vocab_size);
    CHECK(cfg2.seed == cfg.seed);
    CHECK(s2.tokens == s.tokens);
    CHECK(s2.durations == s.durations);
    REQUIRE(s2.audio.v.size() == s.audio.v.size());
    for (std::size_t i = 0; i < s.audio.v.size(); ++i)
        CHECK(s2.audio.v[i] == doctest::Approx(s.audio.v[i]).epsilon(1e-6));
}

TEST_CASE("invalid configs are rejected") {
    WorldConfig cfg;
    cfg.latent_audio_rate = 23;  // breaks the 4:1 coupling
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_SUITE_END();
