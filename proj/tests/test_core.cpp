#include "doctest.h"
#include "streamchar/core.hpp"

using namespace streamchar;

TEST_SUITE_BEGIN("core");

TEST_CASE("rng is deterministic and seed-sensitive") {
    Rng a(7), b(7), c(8);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    bool differs = false;
    Rng a2(7);
    for (int i = 0; i < 100; ++i) differs |= (a2.next_u64() != c.next_u64());
    CHECK(differs);
}

TEST_CASE("gaussian has roughly unit moments") {
    Rng r(123);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double x = r.gaussian();
        s += x;
        s2 += x * x;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("latent block layouts round-trip through accessors") {
    LatentBlock v = LatentBlock::video(3, 4, 2, 2);
    v.vid(2, 3, 1, 0) = 5.0;
    CHECK(v.v[((2 * 4 + 3) * 2 + 1) * 2 + 0] == 5.0);
    LatentBlock a = LatentBlock::audio(6, 3);
    a.aud(5, 2) = -1.0;
    CHECK(a.v[5 * 3 + 2] == -1.0);
}

TEST_CASE("frame slices and concat invert each other") {
    Rng r(5);
    LatentBlock v = randn_like(LatentBlock::video(2, 6, 2, 2), r);
    LatentBlock left = video_frame_slice(v, 0, 2), right = video_frame_slice(v, 2, 6);
    LatentBlock back = concat_frames(left, right);
    CHECK(back.same_shape(v));
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(back.v[i] == v.v[i]);

    LatentBlock a = randn_like(LatentBlock::audio(8, 3), r);
    LatentBlock ab = concat_frames(audio_frame_slice(a, 0, 3), audio_frame_slice(a, 3, 8));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(ab.v[i] == a.v[i]);
}

TEST_CASE("fingerprint detects any single-value change") {
    Rng r(9);
    LatentBlock v = randn_like(LatentBlock::video(2, 3, 2, 2), r);
    std::uint64_t fp = v.fingerprint();
    CHECK(fp == v.fingerprint());
    v.v[10] += 1e-9;
    CHECK(fp != v.fingerprint());
}

TEST_SUITE_END();
