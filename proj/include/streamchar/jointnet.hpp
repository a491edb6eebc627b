#pragma once

#include <optional>
#include <vector>

#include "streamchar/graph.hpp"
#include "streamchar/params.hpp"
#include "streamchar/rope.hpp"

namespace streamchar {

struct DenoiserConfig {
    std::size_t model_dim = 32;
    std::size_t n_heads = 4;
    std::size_t head_dim = 8;
    std::size_t n_blocks = 2;
    std::size_t expert_hidden = 64;
    std::size_t audio_encoder_blocks = 1;
    std::size_t prompt_vocab = 8;
    std::size_t cond_dim = 32;  // width of the injected audio condition c_a
    double rope_base = 10000.0;
    std::uint64_t seed = 7;

    // world-derived token feature dims
    std::size_t video_channels = 4;
    std::size_t video_height = 2, video_width = 2;
    std::size_t audio_channels = 8;

    void validate() const {
        require(model_dim == n_heads * head_dim, "DenoiserConfig: model_dim != n_heads*head_dim");
        require(n_blocks >= 1, "DenoiserConfig: n_blocks < 1");
        require(head_dim % 2 == 0, "DenoiserConfig: head_dim must be even");
    }
};

// Token stream in the fixed order [prompt, ref, sink, motion, x_v, x_a];
// sink and motion carry video tokens first, then their paired audio tokens.
struct PackedSequence {
    std::vector<TokenInfo> tokens;
    Tensor mask;  // (T, T) attention permission, 1 = may attend
    std::vector<PositionAssignment> positions;

    LatentBlock ref, sink_v, sink_a, motion_v, motion_a, x_v, x_a;
    Tensor c_a;  // (audio frames, cond_dim)
    double t = 0.0;
    int motion_frames_k = 0;
    int sink_offset = 0;

    std::size_t n_condition = 0;  // leading condition-token count
    std::size_t video_noisy_begin = 0, audio_noisy_begin = 0;
};

// Cached key/value projections of the timestep-invariant condition tokens.
struct KVCache {
    bool valid = false;
    std::uint64_t fingerprint = 0;
    std::size_t n_cond = 0;
    std::vector<Tensor> k, v;  // per block, (n_cond, model_dim), k post-rotation
};

class JointDenoiser {
public:
    struct Cond {
        LatentBlock video, audio;
        bool empty() const { return video.empty(); }
    };

    struct Out {
        Graph::Id f_v = -1;  // (F*H*W, C_v) rows ordered (frame, h, w)
        Graph::Id f_a = -1;  // (4F, C_a)
    };

    explicit JointDenoiser(DenoiserConfig cfg);

    const DenoiserConfig& config() const { return cfg_; }
    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }

    PackedSequence pack(const LatentBlock& ref, const Cond& motion, const Cond& sink,
                        const LatentBlock& x_v, const LatentBlock& x_a, const Tensor& c_a,
                        double t) const;

    static Tensor build_mask(const std::vector<TokenInfo>& tokens);

    // x_v_rows / x_a_rows / c_a_node may supply the noisy latents and the
    // audio condition as live graph nodes (row layouts as in video_rows /
    // audio_rows); when absent the values stored in the PackedSequence are
    // entered as constants.
    Out forward(Graph& g, const PackedSequence& seq, const std::vector<int>& prompt_ids,
                const KVCache* cache = nullptr, Graph::Id c_a_node = -1,
                Graph::Id x_v_rows = -1, Graph::Id x_a_rows = -1);

    KVCache build_cache(const PackedSequence& seq, const std::vector<int>& prompt_ids);

    std::uint64_t cond_fingerprint(const PackedSequence& seq,
                                   const std::vector<int>& prompt_ids) const;

    // Plain-value convenience wrappers around a graph forward.
    std::pair<LatentBlock, LatentBlock> predict(const PackedSequence& seq,
                                               const std::vector<int>& prompt_ids,
                                               const KVCache* cache = nullptr);

    void randomize(Rng& rng, double stddev);

    static Tensor video_rows(const LatentBlock& b);
    static LatentBlock video_from_rows(const Tensor& rows, std::size_t c, std::size_t f,
                                       std::size_t h, std::size_t w);
    static Tensor audio_rows(const LatentBlock& b);
    static LatentBlock audio_from_rows(const Tensor& rows);

    // Exposed for tests: one attention layer over hidden states. out_k/out_v
    // capture the (post-rotation) key and value projections for caching;
    // cached_k/cached_v prepend condition keys/values to the computed ones.
    Graph::Id attend(Graph& g, Graph::Id x, const Tensor& mask, const Tensor& angles,
                     const std::string& prefix, Tensor* out_k = nullptr, Tensor* out_v = nullptr,
                     const Tensor* cached_k = nullptr, const Tensor* cached_v = nullptr);

    Graph::Id moe_ffn(Graph& g, Graph::Id x, const std::vector<Modality>& mods,
                      std::size_t block);

    Graph::Id audio_fuse(Graph& g, Graph::Id x_a_base, Graph::Id c_a);

private:
    Graph::Id timestep_embedding(Graph& g, double t);
    Graph::Id embed_video_rows(Graph& g, Graph::Id rows, std::size_t frames, Role role,
                               Graph::Id t_emb);
    Graph::Id embed_video_segment(Graph& g, const LatentBlock& block, Role role,
                                  Graph::Id t_emb);
    Graph::Id embed_audio_rows(Graph& g, Graph::Id rows, Role role, Graph::Id t_emb);
    Graph::Id embed_audio_segment(Graph& g, const LatentBlock& block, Role role, Graph::Id t_emb);
    Graph::Id mini_block(Graph& g, Graph::Id x, const std::string& prefix, const Tensor& mask);

    Graph::Id leafp(Graph& g, const std::string& name) {
        return g.leaf(params_.value(name), &params_.grad(name));
    }

    DenoiserConfig cfg_;
    ParameterSet params_;
};

}  // namespace streamchar
