#pragma once

#include <ostream>

#include "streamchar/system.hpp"

namespace streamchar {

// ---- latency accounting --------------------------------------------------
// Each chunk carries 33 pixel frames at 24 fps of content; real-time
// streaming requires the per-chunk wall time to stay under that span.

inline double chunk_budget_seconds() { return 33.0 / 24.0; }

struct StageTimes {
    double generate = 0.0, decode = 0.0, preprocess = 0.0, write = 0.0;

    // all stages back to back
    double sequential() const { return generate + decode + preprocess + write; }
    // decoding the finished chunk overlaps preprocessing of the next one
    double overlap() const { return generate + std::max(decode, preprocess) + write; }
};

struct LatencyRecord {
    StageTimes measured;
    double content_seconds = 0.0;
    bool within_budget() const { return measured.overlap() <= content_seconds; }
};

// ---- drift ---------------------------------------------------------------
// The stream is cut into `window`-second segments; at each segment boundary
// the mean of the final `segment` seconds is compared against the mean of
// the stream's first `segment` seconds. Drift is the worst such gap.
inline double drift(const std::vector<double>& series, std::size_t window = 30,
                    std::size_t segment = 5) {
    require(segment >= 1 && window >= 2 * segment, "drift: bad window/segment");
    require(series.size() >= window, "drift: series shorter than window");
    double base = 0.0;
    for (std::size_t i = 0; i < segment; ++i) base += series[i];
    base /= static_cast<double>(segment);
    double worst = 0.0;
    for (std::size_t e = window; e <= series.size(); e += window) {
        double last = 0.0;
        for (std::size_t i = 0; i < segment; ++i) last += series[e - segment + i];
        worst = std::max(worst, std::abs(last / static_cast<double>(segment) - base));
    }
    return worst;
}

// ---- quality proxy -------------------------------------------------------
// Distance of per-second latent channel statistics from ground-truth world
// statistics. Falls as generation degrades; negated so higher is better.

struct ChannelStats {
    std::vector<double> mean, var;  // per channel
};

ChannelStats channel_stats(const LatentBlock& b, std::size_t f0, std::size_t f1);

struct RefStats {
    ChannelStats video, audio;
};

RefStats compute_ref_stats(const WorldConfig& cfg, std::size_t n_samples, std::size_t n_tokens,
                           std::uint64_t seed);

double stats_distance(const ChannelStats& a, const ChannelStats& b);

// One entry per whole second of content.
std::vector<double> quality_series(const LatentBlock& video, const LatentBlock& audio,
                                   const RefStats& ref, std::size_t video_fps,
                                   std::size_t audio_rate);

double quality_proxy(const LatentBlock& video, const LatentBlock& audio, const RefStats& ref,
                     std::size_t video_fps, std::size_t audio_rate);

// ---- transcription proxy -------------------------------------------------
// Segment the audio at the reference token durations and decode each
// segment to the nearest vocabulary signature; returns the token error
// rate. Missing audio counts as errors.
double wer_proxy(const WorldConfig& cfg, const std::vector<std::uint32_t>& tokens,
                 const std::vector<std::size_t>& durations, const LatentBlock& audio);

// ---- streaming engine ----------------------------------------------------

struct StreamChunk {
    std::size_t index = 0;
    LatentBlock z_v, z_a;          // latent outputs
    LatentBlock pixels_v, wave_a;  // decoded
    double s_hat = 0.0;            // window-relative endpoint
    double cursor = 0.0;           // absolute transcript progress
    LatencyRecord lat;
};

class StreamEngine {
public:
    StreamEngine(System& sys, JointDenoiser& net, SynthSample script, bool with_sink);

    bool done() const;
    StreamChunk step(Rng& rng);

    double cursor() const { return cursor_; }
    std::size_t chunks_emitted() const { return n_chunks_; }
    std::size_t history_frames() const { return history_.frames; }
    std::size_t codec_encode_calls() const { return codec_.encode_calls(); }
    const SynthSample& script() const { return script_; }

private:
    System& sys_;
    JointDenoiser& net_;
    ToyCodec codec_;
    SynthSample script_;
    bool with_sink_;

    std::size_t n_chunks_ = 0;
    double cursor_ = 0.0;
    JointDenoiser::Cond sink_, motion_;
    std::uint64_t sink_fp_ = 0;
    LatentBlock history_;
    std::size_t transcript_lookahead_ = 10;
};

// ---- stream container ----------------------------------------------------
// Per-chunk latent records with pointer and latency fields.

void save_stream(const std::string& path, const WorldConfig& cfg,
                 const std::vector<StreamChunk>& chunks);
std::vector<StreamChunk> load_stream(const std::string& path, WorldConfig& cfg_out);

}  // namespace streamchar
