#pragma once

#include <cstdio>
#include <vector>

#include "streamchar/core.hpp"

namespace streamchar {

// Synthetic character world: transcripts, coupled audio/video latents, and
// exact transcript-audio alignment labels. Plays the role of datasets,
// VAEs, and ASR timestamps.
struct WorldConfig {
    std::size_t vocab_size = 24;
    std::size_t video_channels = 4;
    std::size_t video_height = 2, video_width = 2;
    std::size_t audio_channels = 8;
    std::size_t latent_video_fps = 6;   // latent frames per second
    std::size_t latent_audio_rate = 24; // latent frames per second
    std::size_t token_dur_min = 2, token_dur_max = 6;  // audio latent frames
    std::uint64_t seed = 1;

    // Physical rates the latent rates derive from (4x temporal VAE stride at
    // 24 fps; 2048x compression at 49152 Hz). Documentation constants only.
    static constexpr double physical_video_fps = 24.0;
    static constexpr double physical_audio_hz = 49152.0;

    void validate() const {
        require(vocab_size >= 2, "WorldConfig: vocab_size < 2");
        require(latent_audio_rate == 4 * latent_video_fps,
                "WorldConfig: latent_audio_rate must be 4x latent_video_fps");
        require(token_dur_min >= 1 && token_dur_max >= token_dur_min,
                "WorldConfig: bad token duration range");
        require(video_channels >= 1 && audio_channels >= 1, "WorldConfig: zero channels");
    }
};

struct SynthSample {
    std::vector<std::uint32_t> tokens;
    std::vector<std::size_t> durations;  // audio latent frames per token
    LatentBlock audio;                   // frames x channels
    LatentBlock video;                   // channels x frames x h x w
    std::vector<double> identity;        // length = video_channels
};

// Per-token duration is a pure function of (world seed, token id) so that
// transcript content alone determines timing.
inline std::size_t token_duration(const WorldConfig& cfg, std::uint32_t token) {
    std::uint64_t h = hash_combine(cfg.seed ^ 0xd0a1u, token);
    return cfg.token_dur_min + h % (cfg.token_dur_max - cfg.token_dur_min + 1);
}

// Fixed per-token audio signature: hash stream expanded to `frames` rows of
// audio channels. Injective in token id with overwhelming probability.
inline std::vector<double> token_signature(const WorldConfig& cfg, std::uint32_t token,
                                           std::size_t frames) {
    std::uint64_t s = hash_combine(cfg.seed ^ 0x516Eu, token);
    Rng rng(s);
    std::vector<double> sig(frames * cfg.audio_channels);
    for (double& x : sig) x = rng.uniform(-1.0, 1.0);
    return sig;
}

inline SynthSample gen_sample(const WorldConfig& cfg, std::size_t n_tokens,
                              std::uint64_t rng_seed) {
    cfg.validate();
    require(n_tokens >= 1, "gen_sample: n_tokens < 1");
    Rng rng(hash_combine(cfg.seed, rng_seed));

    SynthSample s;
    s.tokens.resize(n_tokens);
    s.durations.resize(n_tokens);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n_tokens; ++i) {
        s.tokens[i] = static_cast<std::uint32_t>(rng.below(cfg.vocab_size));
        s.durations[i] = token_duration(cfg, s.tokens[i]);
        total += s.durations[i];
    }
    // Pad the last token so the audio length maps onto whole video frames.
    while (total % 4 != 0) {
        ++s.durations.back();
        ++total;
    }

    s.audio = LatentBlock::audio(total, cfg.audio_channels);
    std::size_t f = 0;
    for (std::size_t i = 0; i < n_tokens; ++i) {
        std::vector<double> sig = token_signature(cfg, s.tokens[i], s.durations[i]);
        std::copy(sig.begin(), sig.end(),
                  s.audio.v.begin() + static_cast<std::ptrdiff_t>(f * cfg.audio_channels));
        f += s.durations[i];
    }

    s.identity.resize(cfg.video_channels);
    for (double& x : s.identity) x = rng.uniform(-1.0, 1.0);

    // Video: causal EMA of per-video-frame audio energy plus the identity
    // code, with a seeded per-cell spatial pattern.
    std::size_t vframes = total / 4;
    s.video = LatentBlock::video(cfg.video_channels, vframes, cfg.video_height, cfg.video_width);
    Rng cellrng(hash_combine(cfg.seed ^ 0xCE11u, 0));
    std::vector<double> cell_pattern(cfg.video_height * cfg.video_width);
    for (double& x : cell_pattern) x = 0.2 * cellrng.uniform(-1.0, 1.0);
    double ema = 0.0;
    for (std::size_t vf = 0; vf < vframes; ++vf) {
        double energy = 0.0;
        for (std::size_t af = 4 * vf; af < 4 * vf + 4; ++af)
            for (std::size_t c = 0; c < cfg.audio_channels; ++c)
                energy += std::abs(s.audio.aud(af, c));
        energy /= static_cast<double>(4 * cfg.audio_channels);
        ema = 0.5 * ema + 0.5 * energy;
        for (std::size_t c = 0; c < cfg.video_channels; ++c)
            for (std::size_t h = 0; h < cfg.video_height; ++h)
                for (std::size_t w = 0; w < cfg.video_width; ++w)
                    s.video.vid(c, vf, h, w) =
                        s.identity[c] + ema + cell_pattern[h * cfg.video_width + w];
    }
    return s;
}

// Real-valued endpoint per chunk boundary: tokens fully spoken plus the
// fractional progress into the active token.
inline std::vector<double> chunk_endpoints(const SynthSample& s, std::size_t chunk_audio_frames) {
    require(chunk_audio_frames >= 1, "chunk_endpoints: chunk_audio_frames < 1");
    std::size_t total = s.audio.frames;
    std::vector<double> out;
    for (std::size_t b = chunk_audio_frames;; b += chunk_audio_frames) {
        std::size_t boundary = std::min(b, total);
        std::size_t acc = 0;
        double sv = 0.0;
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            if (acc + s.durations[i] <= boundary) {
                acc += s.durations[i];
                sv = static_cast<double>(i + 1);
            } else {
                sv = static_cast<double>(i) +
                     static_cast<double>(boundary - acc) / static_cast<double>(s.durations[i]);
                break;
            }
        }
        out.push_back(sv);
        if (boundary == total) break;
    }
    return out;
}

// ---- toy codec -----------------------------------------------------------
// Fixed (non-trained) seeded orthogonal channel maps. Video decode also
// expands n latent frames to 1 + (n-1)*stride pixel frames by linear
// interpolation; stride 4 gives 9 -> 33.

class ToyCodec {
public:
    static constexpr std::size_t temporal_stride = 4;

    explicit ToyCodec(const WorldConfig& cfg) : cfg_(cfg) {
        video_dec_ = orthogonal(cfg.video_channels, hash_combine(cfg.seed, 0xC0DEC1u));
        audio_dec_ = orthogonal(cfg.audio_channels, hash_combine(cfg.seed, 0xC0DEC2u));
    }

    static std::size_t decoded_frames(std::size_t latent_frames) {
        require(latent_frames >= 1, "decoded_frames: empty");
        return 1 + (latent_frames - 1) * temporal_stride;
    }

    LatentBlock decode(const LatentBlock& latent) const {
        if (latent.modality == Modality::audio) {
            LatentBlock out = LatentBlock::audio(latent.frames, latent.channels);
            out.provenance = latent.provenance;
            for (std::size_t f = 0; f < latent.frames; ++f)
                apply(audio_dec_, latent.v.data() + f * latent.channels,
                      out.v.data() + f * latent.channels, latent.channels, false);
            return out;
        }
        std::size_t pf = decoded_frames(latent.frames);
        LatentBlock out =
            LatentBlock::video(latent.channels, pf, latent.height, latent.width);
        out.provenance = latent.provenance;
        std::vector<double> tmp(latent.channels);
        for (std::size_t f = 0; f < pf; ++f) {
            double lf = static_cast<double>(f) / static_cast<double>(temporal_stride);
            std::size_t f0 = static_cast<std::size_t>(lf);
            std::size_t f1 = std::min(f0 + 1, latent.frames - 1);
            double a = lf - static_cast<double>(f0);
            for (std::size_t h = 0; h < latent.height; ++h)
                for (std::size_t w = 0; w < latent.width; ++w) {
                    for (std::size_t c = 0; c < latent.channels; ++c)
                        tmp[c] = (1.0 - a) * latent.vid(c, f0, h, w) + a * latent.vid(c, f1, h, w);
                    for (std::size_t c = 0; c < latent.channels; ++c) {
                        double s = 0.0;
                        for (std::size_t k = 0; k < latent.channels; ++k)
                            s += video_dec_.at(c, k) * tmp[k];
                        out.vid(c, f, h, w) = s;
                    }
                }
        }
        return out;
    }

    LatentBlock encode(const LatentBlock& pixels) const {
        ++encode_calls_;
        if (pixels.modality == Modality::audio) {
            LatentBlock out = LatentBlock::audio(pixels.frames, pixels.channels);
            out.provenance = pixels.provenance;
            for (std::size_t f = 0; f < pixels.frames; ++f)
                apply(audio_dec_, pixels.v.data() + f * pixels.channels,
                      out.v.data() + f * pixels.channels, pixels.channels, true);
            return out;
        }
        require((pixels.frames - 1) % temporal_stride == 0, "encode: frame count off stride");
        std::size_t lf = (pixels.frames - 1) / temporal_stride + 1;
        LatentBlock out = LatentBlock::video(pixels.channels, lf, pixels.height, pixels.width);
        out.provenance = pixels.provenance;
        for (std::size_t f = 0; f < lf; ++f)
            for (std::size_t h = 0; h < pixels.height; ++h)
                for (std::size_t w = 0; w < pixels.width; ++w)
                    for (std::size_t c = 0; c < pixels.channels; ++c) {
                        double s = 0.0;
                        // decoder orthogonal: encoder = transpose
                        for (std::size_t k = 0; k < pixels.channels; ++k)
                            s += video_dec_.at(k, c) * pixels.vid(k, f * temporal_stride, h, w);
                        out.vid(c, f, h, w) = s;
                    }
        return out;
    }

    std::size_t encode_calls() const { return encode_calls_; }
    void reset_encode_calls() { encode_calls_ = 0; }

private:
    static void apply(const Tensor& m, const double* in, double* out, std::size_t n,
                      bool transpose) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                s += (transpose ? m.at(k, i) : m.at(i, k)) * in[k];
            out[i] = s;
        }
    }

    // Gram-Schmidt on a seeded random square matrix.
    static Tensor orthogonal(std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        Tensor m = Tensor::randn(n, n, rng);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                double d = 0.0;
                for (std::size_t k = 0; k < n; ++k) d += m.at(i, k) * m.at(j, k);
                for (std::size_t k = 0; k < n; ++k) m.at(i, k) -= d * m.at(j, k);
            }
            double norm = 0.0;
            for (std::size_t k = 0; k < n; ++k) norm += m.at(i, k) * m.at(i, k);
            norm = std::sqrt(norm);
            require(norm > 1e-9, "orthogonal: degenerate draw");
            for (std::size_t k = 0; k < n; ++k) m.at(i, k) /= norm;
        }
        return m;
    }

    WorldConfig cfg_;
    Tensor video_dec_, audio_dec_;
    mutable std::size_t encode_calls_ = 0;
};

inline LatentBlock toy_codec_roundtrip(const ToyCodec& codec, const LatentBlock& block) {
    return codec.encode(codec.decode(block));
}

// ---- SCW1 sample records -------------------------------------------------
// header: magic "SCW1", version u32, cfg fields, then little-endian float32
// arrays in declared order (tokens and durations as u32 arrays).

void save_sample(const std::string& path, const WorldConfig& cfg, const SynthSample& s);
SynthSample load_sample(const std::string& path, WorldConfig& cfg_out);

}  // namespace streamchar
