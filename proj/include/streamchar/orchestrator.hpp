#pragma once

#include <vector>

#include "streamchar/graph.hpp"
#include "streamchar/params.hpp"
#include "streamchar/rope.hpp"

namespace streamchar {

struct OrchestratorConfig {
    std::size_t model_dim = 32;
    std::size_t n_heads = 4;
    std::size_t head_dim = 8;
    std::size_t n_blocks = 2;
    std::size_t ffn_hidden = 64;
    std::size_t vocab = 24;        // world transcript ids
    std::size_t prompt_vocab = 8;  // prompt ids share the text block
    std::size_t audio_channels = 8;
    std::size_t cond_dim = 32;  // width of emitted c_a frames
    std::size_t history_cap_seconds = 15;
    std::size_t latent_audio_rate = 24;
    std::uint64_t seed = 11;

    void validate() const {
        require(model_dim == n_heads * head_dim,
                "OrchestratorConfig: model_dim != n_heads*head_dim");
        require(head_dim % 2 == 0, "OrchestratorConfig: head_dim must be even");
    }

    std::size_t history_cap_frames() const { return history_cap_seconds * latent_audio_rate; }
};

// Blocks concatenated in fixed order: reference audio, text (prompt then
// transcript), history audio, conditioning tail built from the noisy audio
// latents of the active chunk plus the shared timestep.
struct OrchestratorInput {
    LatentBlock ref_audio;              // frames x C_a
    std::vector<int> prompt_ids;        // embedded through the text table
    std::vector<std::uint32_t> transcript;
    LatentBlock history_audio;          // may be empty; <= history cap
    LatentBlock x_t_a;                  // noisy audio for the current chunk
    double t = 0.0;
};

class Orchestrator {
public:
    struct Out {
        Graph::Id c_a = -1;               // (chunk audio frames, cond_dim)
        Graph::Id transcript_states = -1; // (N, model_dim)
    };

    explicit Orchestrator(OrchestratorConfig cfg);

    const OrchestratorConfig& config() const { return cfg_; }
    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }

    std::vector<TokenInfo> pack_sequence(const OrchestratorInput& in) const;

    Out condition(Graph& g, const OrchestratorInput& in);

    // Linear projection of c_a onto audio channels; supervision target for
    // the orchestrator-only warm-up phase.
    Graph::Id audio_readout(Graph& g, Graph::Id c_a) {
        return g.matmul(c_a, leafp(g, "orch.readout"));
    }

    // Plain-value c_a.
    Tensor condition_values(const OrchestratorInput& in);

    void randomize(Rng& rng, double stddev);

private:
    Graph::Id leafp(Graph& g, const std::string& name) {
        return g.leaf(params_.value(name), &params_.grad(name));
    }
    Graph::Id timestep_embedding(Graph& g, double t);

    OrchestratorConfig cfg_;
    ParameterSet params_;
};

// Whole-token history truncation: drop the oldest tokens until the retained
// audio fits the cap; transcript stays aligned with the retained audio.
struct HistoryPair {
    LatentBlock audio;
    std::vector<std::uint32_t> transcript;
    std::vector<std::size_t> durations;
};

inline HistoryPair truncate_history(const LatentBlock& history_audio,
                                    const std::vector<std::uint32_t>& transcript,
                                    const std::vector<std::size_t>& durations,
                                    std::size_t cap_frames) {
    require(transcript.size() == durations.size(), "truncate_history: misaligned history");
    std::size_t total = 0;
    for (std::size_t d : durations) total += d;
    require(total == history_audio.frames, "truncate_history: duration sum != audio length");
    std::size_t drop = 0, dropped_frames = 0;
    while (total - dropped_frames > cap_frames && drop < durations.size()) {
        dropped_frames += durations[drop];
        ++drop;
    }
    HistoryPair out;
    out.audio = history_audio.frames == dropped_frames
                    ? LatentBlock::audio(0, history_audio.channels)
                    : audio_frame_slice(history_audio, dropped_frames, history_audio.frames);
    out.transcript.assign(transcript.begin() + static_cast<std::ptrdiff_t>(drop),
                          transcript.end());
    out.durations.assign(durations.begin() + static_cast<std::ptrdiff_t>(drop), durations.end());
    return out;
}

}  // namespace streamchar
