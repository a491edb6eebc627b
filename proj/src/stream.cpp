#include "streamchar/stream.hpp"

#include <algorithm>
#include <chrono>
#include <limits>

#include "streamchar/params.hpp"  // binary io helpers

namespace streamchar {

using detail::get_f32;
using detail::get_u32;
using detail::put_f32;
using detail::put_u32;

ChannelStats channel_stats(const LatentBlock& b, std::size_t f0, std::size_t f1) {
    require(f0 < f1 && f1 <= b.frames, "channel_stats: bad frame range");
    ChannelStats st;
    st.mean.assign(b.channels, 0.0);
    st.var.assign(b.channels, 0.0);
    std::size_t per = (b.modality == Modality::video) ? (f1 - f0) * b.height * b.width : (f1 - f0);
    for (std::size_t c = 0; c < b.channels; ++c) {
        double s = 0.0, s2 = 0.0;
        if (b.modality == Modality::video) {
            for (std::size_t f = f0; f < f1; ++f)
                for (std::size_t h = 0; h < b.height; ++h)
                    for (std::size_t w = 0; w < b.width; ++w) {
                        double x = b.vid(c, f, h, w);
                        s += x;
                        s2 += x * x;
                    }
        } else {
            for (std::size_t f = f0; f < f1; ++f) {
                double x = b.aud(f, c);
                s += x;
                s2 += x * x;
            }
        }
        double n = static_cast<double>(per);
        st.mean[c] = s / n;
        st.var[c] = s2 / n - st.mean[c] * st.mean[c];
    }
    return st;
}

RefStats compute_ref_stats(const WorldConfig& cfg, std::size_t n_samples, std::size_t n_tokens,
                           std::uint64_t seed) {
    require(n_samples >= 1, "compute_ref_stats: no samples");
    RefStats ref;
    ref.video.mean.assign(cfg.video_channels, 0.0);
    ref.video.var.assign(cfg.video_channels, 0.0);
    ref.audio.mean.assign(cfg.audio_channels, 0.0);
    ref.audio.var.assign(cfg.audio_channels, 0.0);
    for (std::size_t i = 0; i < n_samples; ++i) {
        SynthSample s = gen_sample(cfg, n_tokens, hash_combine(seed, i));
        ChannelStats v = channel_stats(s.video, 0, s.video.frames);
        ChannelStats a = channel_stats(s.audio, 0, s.audio.frames);
        for (std::size_t c = 0; c < cfg.video_channels; ++c) {
            ref.video.mean[c] += v.mean[c] / static_cast<double>(n_samples);
            ref.video.var[c] += v.var[c] / static_cast<double>(n_samples);
        }
        for (std::size_t c = 0; c < cfg.audio_channels; ++c) {
            ref.audio.mean[c] += a.mean[c] / static_cast<double>(n_samples);
            ref.audio.var[c] += a.var[c] / static_cast<double>(n_samples);
        }
    }
    return ref;
}

double stats_distance(const ChannelStats& a, const ChannelStats& b) {
    require(a.mean.size() == b.mean.size(), "stats_distance: channel mismatch");
    double d = 0.0;
    for (std::size_t c = 0; c < a.mean.size(); ++c) {
        double dm = a.mean[c] - b.mean[c], dv = a.var[c] - b.var[c];
        d += dm * dm + dv * dv;
    }
    return d;
}

std::vector<double> quality_series(const LatentBlock& video, const LatentBlock& audio,
                                   const RefStats& ref, std::size_t video_fps,
                                   std::size_t audio_rate) {
    std::size_t secs = std::min(video.frames / video_fps, audio.frames / audio_rate);
    require(secs >= 1, "quality_series: less than one second of content");
    std::vector<double> out(secs);
    for (std::size_t s = 0; s < secs; ++s) {
        ChannelStats v = channel_stats(video, s * video_fps, (s + 1) * video_fps);
        ChannelStats a = channel_stats(audio, s * audio_rate, (s + 1) * audio_rate);
        out[s] = stats_distance(v, ref.video) + stats_distance(a, ref.audio);
    }
    return out;
}

double quality_proxy(const LatentBlock& video, const LatentBlock& audio, const RefStats& ref,
                     std::size_t video_fps, std::size_t audio_rate) {
    std::vector<double> qs = quality_series(video, audio, ref, video_fps, audio_rate);
    double m = 0.0;
    for (double x : qs) m += x;
    return -m / static_cast<double>(qs.size());
}

double wer_proxy(const WorldConfig& cfg, const std::vector<std::uint32_t>& tokens,
                 const std::vector<std::size_t>& durations, const LatentBlock& audio) {
    require(tokens.size() == durations.size() && !tokens.empty(), "wer_proxy: bad reference");
    require(audio.modality == Modality::audio, "wer_proxy: not audio");
    std::size_t errors = 0, offset = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::size_t d = durations[i];
        if (offset + d > audio.frames) {
            ++errors;  // segment missing or truncated
            offset += d;
            continue;
        }
        std::uint32_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::uint32_t tok = 0; tok < cfg.vocab_size; ++tok) {
            std::vector<double> sig = token_signature(cfg, tok, d);
            double dist = 0.0;
            for (std::size_t f = 0; f < d; ++f)
                for (std::size_t c = 0; c < cfg.audio_channels; ++c) {
                    double e = audio.aud(offset + f, c) - sig[f * cfg.audio_channels + c];
                    dist += e * e;
                }
            if (dist < best_d) {
                best_d = dist;
                best = tok;
            }
        }
        if (best != tokens[i]) ++errors;
        offset += d;
    }
    return static_cast<double>(errors) / static_cast<double>(tokens.size());
}

// ---- streaming engine ----------------------------------------------------

StreamEngine::StreamEngine(System& sys, JointDenoiser& net, SynthSample script, bool with_sink)
    : sys_(sys), net_(net), codec_(sys.cfg.world), script_(std::move(script)),
      with_sink_(with_sink), history_(LatentBlock::audio(0, sys.cfg.world.audio_channels)) {
    require(!script_.tokens.empty(), "StreamEngine: empty script");
    codec_.reset_encode_calls();
}

bool StreamEngine::done() const {
    return static_cast<std::size_t>(cursor_) >= script_.tokens.size();
}

StreamChunk StreamEngine::step(Rng& rng) {
    using clock = std::chrono::steady_clock;
    auto secs = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double>(b - a).count();
    };
    require(!done(), "StreamEngine::step: script exhausted");

    auto t0 = clock::now();
    GenCond cond;
    cond.ref = video_frame_slice(script_.video, 0, 1);
    cond.ref_audio = audio_frame_slice(
        script_.audio, 0, std::min(sys_.cfg.ref_audio_frames, script_.audio.frames));
    cond.prompt_ids = {static_cast<int>(script_.tokens[0] % sys_.cfg.dit.prompt_vocab)};
    std::size_t w0 = static_cast<std::size_t>(std::floor(cursor_));
    std::size_t w1 = std::min(script_.tokens.size(), w0 + transcript_lookahead_);
    cond.window_transcript.assign(script_.tokens.begin() + static_cast<std::ptrdiff_t>(w0),
                                  script_.tokens.begin() + static_cast<std::ptrdiff_t>(w1));
    cond.motion = motion_;
    cond.sink = with_sink_ ? sink_ : JointDenoiser::Cond{};
    cond.history_audio = history_;
    if (n_chunks_ >= 1)
        require(cond.motion.video.provenance == Provenance::generated,
                "StreamEngine: motion must reuse generated latents");
    if (n_chunks_ >= 2 && with_sink_)
        require(hash_combine(cond.sink.video.fingerprint(), cond.sink.audio.fingerprint()) ==
                    sink_fp_,
                "StreamEngine: sink changed after the first chunk");
    auto t1 = clock::now();

    GenOut gout = sys_.generate_chunk(net_, cond, sys_.cfg.student_schedule, rng, true);
    auto t2 = clock::now();

    StreamChunk out;
    out.index = n_chunks_;
    out.z_v = gout.z_v;
    out.z_a = gout.z_a;
    out.pixels_v = codec_.decode(gout.z_v);
    out.wave_a = codec_.decode(gout.z_a);
    auto t3 = clock::now();

    // conditioning state for the next chunk reuses latents directly
    const std::size_t M = sys_.cfg.motion_video_frames;
    motion_.video = video_frame_slice(gout.z_v, gout.z_v.frames - M, gout.z_v.frames);
    motion_.audio = audio_frame_slice(gout.z_a, gout.z_a.frames - 4 * M, gout.z_a.frames);
    if (n_chunks_ == 0 && with_sink_) {
        const std::size_t S = sys_.cfg.sink_video_frames;
        sink_.video = video_frame_slice(gout.z_v, 0, S);
        sink_.audio = audio_frame_slice(gout.z_a, 0, 4 * S);
        sink_fp_ = hash_combine(sink_.video.fingerprint(), sink_.audio.fingerprint());
    }
    history_ = concat_frames(history_, gout.z_a);
    std::size_t cap = sys_.cfg.orch.history_cap_frames();
    if (history_.frames > cap)
        history_ = audio_frame_slice(history_, history_.frames - cap, history_.frames);
    require(history_.frames <= cap, "StreamEngine: history over cap");
    require(codec_.encode_calls() == 0, "StreamEngine: conditioning must not re-encode");

    double abs_s = std::floor(cursor_) + gout.s_hat;
    double next = std::clamp(abs_s, cursor_, static_cast<double>(script_.tokens.size()));
    require(next >= cursor_, "StreamEngine: pointer moved backwards");
    cursor_ = next;
    out.s_hat = gout.s_hat;
    out.cursor = cursor_;
    auto t4 = clock::now();

    out.lat.measured.preprocess = secs(t0, t1);
    out.lat.measured.generate = secs(t1, t2);
    out.lat.measured.decode = secs(t2, t3);
    out.lat.measured.write = secs(t3, t4);
    out.lat.content_seconds = chunk_budget_seconds();
    ++n_chunks_;
    return out;
}

// ---- stream container ----------------------------------------------------

namespace {
void put_block(std::FILE* f, const LatentBlock& b) {
    put_u32(f, b.modality == Modality::video ? 0u : 1u);
    put_u32(f, static_cast<std::uint32_t>(b.channels));
    put_u32(f, static_cast<std::uint32_t>(b.frames));
    put_u32(f, static_cast<std::uint32_t>(b.height));
    put_u32(f, static_cast<std::uint32_t>(b.width));
    for (double x : b.v) put_f32(f, static_cast<float>(x));
}

LatentBlock get_block(std::FILE* f) {
    std::uint32_t mod = get_u32(f);
    std::uint32_t c = get_u32(f), fr = get_u32(f), h = get_u32(f), w = get_u32(f);
    LatentBlock b = (mod == 0u) ? LatentBlock::video(c, fr, h, w) : LatentBlock::audio(fr, c);
    b.provenance = Provenance::generated;
    for (double& x : b.v) x = get_f32(f);
    return b;
}
}  // namespace

void save_stream(const std::string& path, const WorldConfig& cfg,
                 const std::vector<StreamChunk>& chunks) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("save_stream: cannot open " + path);
    std::fwrite("SCS1", 1, 4, f);
    put_u32(f, 1u);
    put_u32(f, static_cast<std::uint32_t>(cfg.vocab_size));
    put_u32(f, static_cast<std::uint32_t>(cfg.video_channels));
    put_u32(f, static_cast<std::uint32_t>(cfg.video_height));
    put_u32(f, static_cast<std::uint32_t>(cfg.video_width));
    put_u32(f, static_cast<std::uint32_t>(cfg.audio_channels));
    put_u32(f, static_cast<std::uint32_t>(cfg.latent_video_fps));
    put_u32(f, static_cast<std::uint32_t>(cfg.latent_audio_rate));
    put_u32(f, static_cast<std::uint32_t>(chunks.size()));
    for (const StreamChunk& c : chunks) {
        put_u32(f, static_cast<std::uint32_t>(c.index));
        put_block(f, c.z_v);
        put_block(f, c.z_a);
        put_block(f, c.pixels_v);
        put_block(f, c.wave_a);
        put_f32(f, static_cast<float>(c.s_hat));
        put_f32(f, static_cast<float>(c.cursor));
        put_f32(f, static_cast<float>(c.lat.measured.generate));
        put_f32(f, static_cast<float>(c.lat.measured.decode));
        put_f32(f, static_cast<float>(c.lat.measured.preprocess));
        put_f32(f, static_cast<float>(c.lat.measured.write));
        put_f32(f, static_cast<float>(c.lat.content_seconds));
    }
    std::fclose(f);
}

std::vector<StreamChunk> load_stream(const std::string& path, WorldConfig& cfg_out) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("load_stream: cannot open " + path);
    try {
        char magic[4];
        if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "SCS1", 4) != 0)
            throw std::runtime_error("load_stream: bad magic");
        if (get_u32(f) != 1u) throw std::runtime_error("load_stream: unsupported version");
        WorldConfig cfg;
        cfg.vocab_size = get_u32(f);
        cfg.video_channels = get_u32(f);
        cfg.video_height = get_u32(f);
        cfg.video_width = get_u32(f);
        cfg.audio_channels = get_u32(f);
        cfg.latent_video_fps = get_u32(f);
        cfg.latent_audio_rate = get_u32(f);
        std::uint32_t n = get_u32(f);
        std::vector<StreamChunk> out(n);
        for (StreamChunk& c : out) {
            c.index = get_u32(f);
            c.z_v = get_block(f);
            c.z_a = get_block(f);
            c.pixels_v = get_block(f);
            c.wave_a = get_block(f);
            c.s_hat = get_f32(f);
            c.cursor = get_f32(f);
            c.lat.measured.generate = get_f32(f);
            c.lat.measured.decode = get_f32(f);
            c.lat.measured.preprocess = get_f32(f);
            c.lat.measured.write = get_f32(f);
            c.lat.content_seconds = get_f32(f);
        }
        std::fclose(f);
        cfg_out = cfg;
        return out;
    } catch (...) {
        std::fclose(f);
        throw;
    }
}

}  // namespace streamchar
