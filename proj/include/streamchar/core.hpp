#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace streamchar {

// splitmix64: fully specified, platform-independent stream.
inline std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    return splitmix64(s);
}

// Deterministic RNG. std:: distributions are not pinned by the standard,
// so uniform/gaussian are generated here directly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Dense row-major matrix/vector of doubles. Rank 1 or 2 is all the model
// code needs; latent blocks carry their own shape metadata.
struct Tensor {
    std::size_t rows = 0, cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

    static Tensor zeros(std::size_t r, std::size_t c) { return Tensor(r, c); }

    static Tensor full(std::size_t r, std::size_t c, double x) {
        Tensor t(r, c);
        std::fill(t.v.begin(), t.v.end(), x);
        return t;
    }

    static Tensor randn(std::size_t r, std::size_t c, Rng& rng, double stddev = 1.0) {
        Tensor t(r, c);
        for (double& x : t.v) x = stddev * rng.gaussian();
        return t;
    }

    std::size_t size() const { return v.size(); }
    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
    double* row(std::size_t r) { return v.data() + r * cols; }
    const double* row(std::size_t r) const { return v.data() + r * cols; }

    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Raised when optimization blows up (NaN/Inf); distinct from validation
// failures so callers can exit with a different status.
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require_finite(bool cond, const std::string& msg) {
    if (!cond) throw numerical_error(msg);
}

enum class Modality { video, audio };
enum class Provenance { ground_truth, generated, noise };

// Modality-tagged latent array.
//   video layout: ((c*frames + f)*height + h)*width + w
//   audio layout: f*channels + c
struct LatentBlock {
    Modality modality = Modality::video;
    Provenance provenance = Provenance::ground_truth;
    std::size_t channels = 0, frames = 0, height = 1, width = 1;
    std::vector<double> v;

    static LatentBlock video(std::size_t c, std::size_t f, std::size_t h, std::size_t w) {
        LatentBlock b;
        b.modality = Modality::video;
        b.channels = c;
        b.frames = f;
        b.height = h;
        b.width = w;
        b.v.assign(c * f * h * w, 0.0);
        return b;
    }

    static LatentBlock audio(std::size_t f, std::size_t c) {
        LatentBlock b;
        b.modality = Modality::audio;
        b.channels = c;
        b.frames = f;
        b.v.assign(f * c, 0.0);
        return b;
    }

    bool empty() const { return v.empty(); }
    std::size_t size() const { return v.size(); }

    bool same_shape(const LatentBlock& o) const {
        return modality == o.modality && channels == o.channels && frames == o.frames &&
               height == o.height && width == o.width;
    }

    double& vid(std::size_t c, std::size_t f, std::size_t h, std::size_t w) {
        return v[((c * frames + f) * height + h) * width + w];
    }
    double vid(std::size_t c, std::size_t f, std::size_t h, std::size_t w) const {
        return v[((c * frames + f) * height + h) * width + w];
    }
    double& aud(std::size_t f, std::size_t c) { return v[f * channels + c]; }
    double aud(std::size_t f, std::size_t c) const { return v[f * channels + c]; }

    std::uint64_t fingerprint() const {
        std::uint64_t h = 0x5c77u ^ (static_cast<std::uint64_t>(modality) << 8);
        h = hash_combine(h, channels);
        h = hash_combine(h, frames);
        h = hash_combine(h, height * 1000 + width);
        for (double x : v) {
            std::uint64_t bits;
            std::memcpy(&bits, &x, sizeof(bits));
            h = hash_combine(h, bits);
        }
        return h;
    }
};

inline LatentBlock randn_like(const LatentBlock& b, Rng& rng) {
    LatentBlock n = b;
    n.provenance = Provenance::noise;
    for (double& x : n.v) x = rng.gaussian();
    return n;
}

// Extract video frames [f0, f1) keeping channel/spatial dims.
inline LatentBlock video_frame_slice(const LatentBlock& b, std::size_t f0, std::size_t f1) {
    require(b.modality == Modality::video, "video_frame_slice: not a video block");
    require(f0 <= f1 && f1 <= b.frames, "video_frame_slice: bad range");
    LatentBlock out = LatentBlock::video(b.channels, f1 - f0, b.height, b.width);
    out.provenance = b.provenance;
    for (std::size_t c = 0; c < b.channels; ++c)
        for (std::size_t f = f0; f < f1; ++f)
            for (std::size_t h = 0; h < b.height; ++h)
                for (std::size_t w = 0; w < b.width; ++w)
                    out.vid(c, f - f0, h, w) = b.vid(c, f, h, w);
    return out;
}

inline LatentBlock audio_frame_slice(const LatentBlock& b, std::size_t f0, std::size_t f1) {
    require(b.modality == Modality::audio, "audio_frame_slice: not an audio block");
    require(f0 <= f1 && f1 <= b.frames, "audio_frame_slice: bad range");
    LatentBlock out = LatentBlock::audio(f1 - f0, b.channels);
    out.provenance = b.provenance;
    std::copy(b.v.begin() + static_cast<std::ptrdiff_t>(f0 * b.channels),
              b.v.begin() + static_cast<std::ptrdiff_t>(f1 * b.channels), out.v.begin());
    return out;
}

inline LatentBlock concat_frames(const LatentBlock& a, const LatentBlock& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    require(a.modality == b.modality && a.channels == b.channels && a.height == b.height &&
                a.width == b.width,
            "concat_frames: incompatible blocks");
    if (a.modality == Modality::audio) {
        LatentBlock out = LatentBlock::audio(a.frames + b.frames, a.channels);
        out.provenance = (a.provenance == b.provenance) ? a.provenance : Provenance::generated;
        std::copy(a.v.begin(), a.v.end(), out.v.begin());
        std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
        return out;
    }
    LatentBlock out = LatentBlock::video(a.channels, a.frames + b.frames, a.height, a.width);
    out.provenance = (a.provenance == b.provenance) ? a.provenance : Provenance::generated;
    for (std::size_t c = 0; c < a.channels; ++c)
        for (std::size_t f = 0; f < out.frames; ++f)
            for (std::size_t h = 0; h < a.height; ++h)
                for (std::size_t w = 0; w < a.width; ++w)
                    out.vid(c, f, h, w) = (f < a.frames) ? a.vid(c, f, h, w)
                                                         : b.vid(c, f - a.frames, h, w);
    return out;
}

}  // namespace streamchar
