#include "streamchar/synthworld.hpp"

#include "streamchar/params.hpp"  // binary io helpers

namespace streamchar {

using detail::get_f32;
using detail::get_u32;
using detail::put_f32;
using detail::put_u32;

void save_sample(const std::string& path, const WorldConfig& cfg, const SynthSample& s) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("save_sample: cannot open " + path);
    std::fwrite("SCW1", 1, 4, f);
    put_u32(f, 1u);
    put_u32(f, static_cast<std::uint32_t>(cfg.vocab_size));
    put_u32(f, static_cast<std::uint32_t>(cfg.video_channels));
    put_u32(f, static_cast<std::uint32_t>(cfg.video_height));
    put_u32(f, static_cast<std::uint32_t>(cfg.video_width));
    put_u32(f, static_cast<std::uint32_t>(cfg.audio_channels));
    put_u32(f, static_cast<std::uint32_t>(cfg.latent_video_fps));
    put_u32(f, static_cast<std::uint32_t>(cfg.latent_audio_rate));
    put_u32(f, static_cast<std::uint32_t>(cfg.token_dur_min));
    put_u32(f, static_cast<std::uint32_t>(cfg.token_dur_max));
    put_u32(f, static_cast<std::uint32_t>(cfg.seed & 0xffffffffu));
    put_u32(f, static_cast<std::uint32_t>(cfg.seed >> 32));

    put_u32(f, static_cast<std::uint32_t>(s.tokens.size()));
    for (std::uint32_t t : s.tokens) put_u32(f, t);
    for (std::size_t d : s.durations) put_u32(f, static_cast<std::uint32_t>(d));
    put_u32(f, static_cast<std::uint32_t>(s.audio.frames));
    for (double x : s.audio.v) put_f32(f, static_cast<float>(x));
    put_u32(f, static_cast<std::uint32_t>(s.video.frames));
    for (double x : s.video.v) put_f32(f, static_cast<float>(x));
    for (double x : s.identity) put_f32(f, static_cast<float>(x));
    std::fclose(f);
}

SynthSample load_sample(const std::string& path, WorldConfig& cfg_out) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("load_sample: cannot open " + path);
    try {
        char magic[4];
        if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "SCW1", 4) != 0)
            throw std::runtime_error("load_sample: bad magic");
        if (get_u32(f) != 1u) throw std::runtime_error("load_sample: unsupported version");
        WorldConfig cfg;
        cfg.vocab_size = get_u32(f);
        cfg.video_channels = get_u32(f);
        cfg.video_height = get_u32(f);
        cfg.video_width = get_u32(f);
        cfg.audio_channels = get_u32(f);
        cfg.latent_video_fps = get_u32(f);
        cfg.latent_audio_rate = get_u32(f);
        cfg.token_dur_min = get_u32(f);
        cfg.token_dur_max = get_u32(f);
        std::uint64_t lo = get_u32(f), hi = get_u32(f);
        cfg.seed = lo | (hi << 32);
        cfg.validate();

        SynthSample s;
        std::uint32_t n = get_u32(f);
        s.tokens.resize(n);
        for (auto& t : s.tokens) t = get_u32(f);
        s.durations.resize(n);
        for (auto& d : s.durations) d = get_u32(f);
        std::uint32_t af = get_u32(f);
        s.audio = LatentBlock::audio(af, cfg.audio_channels);
        for (double& x : s.audio.v) x = get_f32(f);
        std::uint32_t vf = get_u32(f);
        s.video = LatentBlock::video(cfg.video_channels, vf, cfg.video_height, cfg.video_width);
        for (double& x : s.video.v) x = get_f32(f);
        s.identity.resize(cfg.video_channels);
        for (double& x : s.identity) x = get_f32(f);
        std::fclose(f);
        cfg_out = cfg;
        return s;
    } catch (...) {
        std::fclose(f);
        throw;
    }
}

}  // namespace streamchar
