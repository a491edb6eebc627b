#pragma once

#include <map>
#include <sstream>
#include <string>

#include "streamchar/distill.hpp"

namespace streamchar {

// Experiment configuration as versioned key=value text, one pair per line.
// parse(serialize(c)) == c so configs can be diffed and replayed.
struct RunConfig {
    SystemConfig sys;
    DistillConfig distill;
    std::size_t warmup_steps = 60000;  // orchestrator-only audio-readout phase
    double warmup_lr = 3e-3;
    std::size_t teacher_steps = 2000;
    double teacher_lr = 3e-3;
    double teacher_orch_lr = 3e-5;  // orchestrator rate during joint training
    std::uint64_t seed = 1;

    static constexpr std::uint32_t version = 1;
};

inline std::string serialize(const RunConfig& rc) {
    std::ostringstream os;
    os.precision(17);
    os << "version=" << RunConfig::version << "\n";
    os << "world.vocab_size=" << rc.sys.world.vocab_size << "\n";
    os << "world.video_channels=" << rc.sys.world.video_channels << "\n";
    os << "world.video_height=" << rc.sys.world.video_height << "\n";
    os << "world.video_width=" << rc.sys.world.video_width << "\n";
    os << "world.audio_channels=" << rc.sys.world.audio_channels << "\n";
    os << "world.latent_video_fps=" << rc.sys.world.latent_video_fps << "\n";
    os << "world.latent_audio_rate=" << rc.sys.world.latent_audio_rate << "\n";
    os << "world.token_dur_min=" << rc.sys.world.token_dur_min << "\n";
    os << "world.token_dur_max=" << rc.sys.world.token_dur_max << "\n";
    os << "world.seed=" << rc.sys.world.seed << "\n";
    os << "dit.model_dim=" << rc.sys.dit.model_dim << "\n";
    os << "dit.n_heads=" << rc.sys.dit.n_heads << "\n";
    os << "dit.head_dim=" << rc.sys.dit.head_dim << "\n";
    os << "dit.n_blocks=" << rc.sys.dit.n_blocks << "\n";
    os << "dit.expert_hidden=" << rc.sys.dit.expert_hidden << "\n";
    os << "dit.prompt_vocab=" << rc.sys.dit.prompt_vocab << "\n";
    os << "dit.seed=" << rc.sys.dit.seed << "\n";
    os << "orch.model_dim=" << rc.sys.orch.model_dim << "\n";
    os << "orch.n_heads=" << rc.sys.orch.n_heads << "\n";
    os << "orch.head_dim=" << rc.sys.orch.head_dim << "\n";
    os << "orch.n_blocks=" << rc.sys.orch.n_blocks << "\n";
    os << "orch.ffn_hidden=" << rc.sys.orch.ffn_hidden << "\n";
    os << "orch.cond_dim=" << rc.sys.orch.cond_dim << "\n";
    os << "orch.history_cap_seconds=" << rc.sys.orch.history_cap_seconds << "\n";
    os << "orch.seed=" << rc.sys.orch.seed << "\n";
    os << "pap.attn_dim=" << rc.sys.pap.attn_dim << "\n";
    os << "pap.head_hidden=" << rc.sys.pap.head_hidden << "\n";
    os << "pap.seed=" << rc.sys.pap.seed << "\n";
    os << "sys.chunk_video_frames=" << rc.sys.chunk_video_frames << "\n";
    os << "sys.ref_audio_frames=" << rc.sys.ref_audio_frames << "\n";
    os << "sys.motion_video_frames=" << rc.sys.motion_video_frames << "\n";
    os << "sys.sink_video_frames=" << rc.sys.sink_video_frames << "\n";
    os << "sys.train_tokens_min=" << rc.sys.train_tokens_min << "\n";
    os << "sys.train_tokens_max=" << rc.sys.train_tokens_max << "\n";
    os << "sys.teacher_sample_steps=" << rc.sys.teacher_sample_steps << "\n";
    os << "sys.student_schedule=";
    for (std::size_t i = 0; i < rc.sys.student_schedule.size(); ++i)
        os << (i ? "," : "") << rc.sys.student_schedule[i];
    os << "\n";
    os << "sys.seed=" << rc.sys.seed << "\n";
    os << "distill.stage1_steps=" << rc.distill.stage1_steps << "\n";
    os << "distill.stage2_steps=" << rc.distill.stage2_steps << "\n";
    os << "distill.lr_student=" << rc.distill.lr_student << "\n";
    os << "distill.lr_fake=" << rc.distill.lr_fake << "\n";
    os << "distill.rollout_chunks=" << rc.distill.rollout_chunks << "\n";
    os << "distill.loss_window=" << rc.distill.loss_window << "\n";
    os << "distill.use_sink=" << (rc.distill.use_sink ? 1 : 0) << "\n";
    os << "distill.transcript_lookahead=" << rc.distill.transcript_lookahead << "\n";
    os << "warmup_steps=" << rc.warmup_steps << "\n";
    os << "warmup_lr=" << rc.warmup_lr << "\n";
    os << "teacher_steps=" << rc.teacher_steps << "\n";
    os << "teacher_lr=" << rc.teacher_lr << "\n";
    os << "teacher_orch_lr=" << rc.teacher_orch_lr << "\n";
    os << "seed=" << rc.seed << "\n";
    return os.str();
}

inline RunConfig parse_run_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        require(eq != std::string::npos, "run config: malformed line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    require(kv.count("version") && kv["version"] == "1", "run config: missing/unknown version");

    RunConfig rc;
    auto u = [&](const std::string& k, std::size_t& dst) {
        if (kv.count(k)) dst = static_cast<std::size_t>(std::stoull(kv[k]));
    };
    auto u64 = [&](const std::string& k, std::uint64_t& dst) {
        if (kv.count(k)) dst = std::stoull(kv[k]);
    };
    auto d = [&](const std::string& k, double& dst) {
        if (kv.count(k)) dst = std::stod(kv[k]);
    };
    u("world.vocab_size", rc.sys.world.vocab_size);
    u("world.video_channels", rc.sys.world.video_channels);
    u("world.video_height", rc.sys.world.video_height);
    u("world.video_width", rc.sys.world.video_width);
    u("world.audio_channels", rc.sys.world.audio_channels);
    u("world.latent_video_fps", rc.sys.world.latent_video_fps);
    u("world.latent_audio_rate", rc.sys.world.latent_audio_rate);
    u("world.token_dur_min", rc.sys.world.token_dur_min);
    u("world.token_dur_max", rc.sys.world.token_dur_max);
    u64("world.seed", rc.sys.world.seed);
    u("dit.model_dim", rc.sys.dit.model_dim);
    u("dit.n_heads", rc.sys.dit.n_heads);
    u("dit.head_dim", rc.sys.dit.head_dim);
    u("dit.n_blocks", rc.sys.dit.n_blocks);
    u("dit.expert_hidden", rc.sys.dit.expert_hidden);
    u("dit.prompt_vocab", rc.sys.dit.prompt_vocab);
    u64("dit.seed", rc.sys.dit.seed);
    u("orch.model_dim", rc.sys.orch.model_dim);
    u("orch.n_heads", rc.sys.orch.n_heads);
    u("orch.head_dim", rc.sys.orch.head_dim);
    u("orch.n_blocks", rc.sys.orch.n_blocks);
    u("orch.ffn_hidden", rc.sys.orch.ffn_hidden);
    u("orch.cond_dim", rc.sys.orch.cond_dim);
    u("orch.history_cap_seconds", rc.sys.orch.history_cap_seconds);
    u64("orch.seed", rc.sys.orch.seed);
    u("pap.attn_dim", rc.sys.pap.attn_dim);
    u("pap.head_hidden", rc.sys.pap.head_hidden);
    u64("pap.seed", rc.sys.pap.seed);
    u("sys.chunk_video_frames", rc.sys.chunk_video_frames);
    u("sys.ref_audio_frames", rc.sys.ref_audio_frames);
    u("sys.motion_video_frames", rc.sys.motion_video_frames);
    u("sys.sink_video_frames", rc.sys.sink_video_frames);
    u("sys.train_tokens_min", rc.sys.train_tokens_min);
    u("sys.train_tokens_max", rc.sys.train_tokens_max);
    u("sys.teacher_sample_steps", rc.sys.teacher_sample_steps);
    if (kv.count("sys.student_schedule")) {
        rc.sys.student_schedule.clear();
        std::istringstream ss(kv["sys.student_schedule"]);
        std::string item;
        while (std::getline(ss, item, ',')) rc.sys.student_schedule.push_back(std::stod(item));
    }
    u64("sys.seed", rc.sys.seed);
    u("distill.stage1_steps", rc.distill.stage1_steps);
    u("distill.stage2_steps", rc.distill.stage2_steps);
    d("distill.lr_student", rc.distill.lr_student);
    d("distill.lr_fake", rc.distill.lr_fake);
    u("distill.rollout_chunks", rc.distill.rollout_chunks);
    u("distill.loss_window", rc.distill.loss_window);
    if (kv.count("distill.use_sink")) rc.distill.use_sink = kv["distill.use_sink"] == "1";
    u("distill.transcript_lookahead", rc.distill.transcript_lookahead);
    u("warmup_steps", rc.warmup_steps);
    d("warmup_lr", rc.warmup_lr);
    u("teacher_steps", rc.teacher_steps);
    d("teacher_lr", rc.teacher_lr);
    d("teacher_orch_lr", rc.teacher_orch_lr);
    u64("seed", rc.seed);
    return rc;
}

inline bool operator==(const RunConfig& a, const RunConfig& b) {
    return serialize(a) == serialize(b);
}

}  // namespace streamchar
