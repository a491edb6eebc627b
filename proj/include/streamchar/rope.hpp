#pragma once

#include <vector>

#include "streamchar/core.hpp"

namespace streamchar {

enum class Role {
    reference,
    sink,
    motion,
    noisy_video,
    noisy_audio,
    text,
    history,
    cond_tail,
    prompt,
};

inline bool role_is_condition(Role r) {
    return r == Role::reference || r == Role::sink || r == Role::motion || r == Role::prompt;
}

struct TokenInfo {
    Role role = Role::noisy_video;
    Modality modality = Modality::video;
    int temporal_index = 0;
    bool clean = false;
};

struct PositionAssignment {
    int temporal_index = 0;
    Modality modality = Modality::video;
    double base_frequency_scale = 1.0;  // 1.0 video, 0.25 audio
};

namespace rope {

constexpr double default_base = 10000.0;

inline double modality_scale(Modality m) { return m == Modality::audio ? 0.25 : 1.0; }

// angle = index * scale(modality) * base^(-2p/head_dim). Audio runs at 4x
// the token density of video, so the 1/4 scale makes tokens from the same
// physical timestamp share phases.
inline double angle(int index, std::size_t pair_index, Modality m, std::size_t head_dim,
                    double base = default_base) {
    double freq = std::pow(base, -2.0 * static_cast<double>(pair_index) /
                                     static_cast<double>(head_dim));
    return static_cast<double>(index) * modality_scale(m) * freq;
}

// Temporal indices per token. New frames anchor at 0; motion occupies
// -K..-1; sink occupies sink_offset..sink_offset+len-1 (video timeline,
// audio at 4x density). The reference token is atemporal (index 0, kept
// distinct from the chunk timeline by its role channel).
inline std::vector<PositionAssignment> assign_positions(const std::vector<TokenInfo>& tokens,
                                                        int motion_frames_k, int sink_offset) {
    // Count sink video frames (several spatial tokens share one frame) to
    // validate disjointness against motion.
    int sink_vid = 0;
    for (const TokenInfo& t : tokens)
        if (t.role == Role::sink && t.modality == Modality::video)
            sink_vid = std::max(sink_vid, t.temporal_index + 1);
    if (sink_vid > 0 && motion_frames_k > 0) {
        require(sink_offset + sink_vid <= -motion_frames_k,
                "assign_positions: sink and motion index ranges overlap");
    }

    std::vector<PositionAssignment> out(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const TokenInfo& t = tokens[i];
        PositionAssignment p;
        p.modality = t.modality;
        p.base_frequency_scale = modality_scale(t.modality);
        switch (t.role) {
            case Role::motion:
                p.temporal_index = (t.modality == Modality::video)
                                       ? t.temporal_index - motion_frames_k
                                       : t.temporal_index - 4 * motion_frames_k;
                break;
            case Role::sink:
                p.temporal_index = (t.modality == Modality::video)
                                       ? sink_offset + t.temporal_index
                                       : 4 * sink_offset + t.temporal_index;
                break;
            case Role::reference:
            case Role::prompt:
                p.temporal_index = 0;
                break;
            default:
                p.temporal_index = t.temporal_index;
        }
        out[i] = p;
    }
    return out;
}

// Per-token angle table for one head: (tokens, head_dim/2).
inline Tensor angle_table(const std::vector<PositionAssignment>& pos, std::size_t head_dim,
                          double base = default_base) {
    Tensor a(pos.size(), head_dim / 2);
    for (std::size_t i = 0; i < pos.size(); ++i)
        for (std::size_t p = 0; p < head_dim / 2; ++p)
            a.at(i, p) = angle(pos[i].temporal_index, p, pos[i].modality, head_dim, base);
    return a;
}

}  // namespace rope
}  // namespace streamchar
