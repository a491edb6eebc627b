#pragma once

#include <functional>

#include "streamchar/flowcore.hpp"
#include "streamchar/jointnet.hpp"
#include "streamchar/orchestrator.hpp"
#include "streamchar/pap.hpp"
#include "streamchar/synthworld.hpp"

namespace streamchar {

// Joint configuration for the whole generation stack. finalize() propagates
// shared dims (world channels, condition width) into the component configs.
struct SystemConfig {
    WorldConfig world;
    DenoiserConfig dit;
    OrchestratorConfig orch;
    PapConfig pap;

    std::size_t chunk_video_frames = 9;  // decodes to 33 pixel frames
    std::size_t ref_audio_frames = 8;
    std::size_t motion_video_frames = 9;  // previous chunk reused as motion context
    std::size_t sink_video_frames = 9;    // first chunk kept as the anchoring sink
    std::size_t train_tokens_min = 18, train_tokens_max = 30;
    std::size_t teacher_sample_steps = 50;
    std::vector<double> student_schedule{1.0, 0.75, 0.5, 0.25};
    std::uint64_t seed = 1;

    std::size_t chunk_audio_frames() const { return 4 * chunk_video_frames; }

    void finalize() {
        world.validate();
        dit.video_channels = world.video_channels;
        dit.video_height = world.video_height;
        dit.video_width = world.video_width;
        dit.audio_channels = world.audio_channels;
        dit.cond_dim = orch.cond_dim;
        orch.vocab = world.vocab_size;
        orch.prompt_vocab = dit.prompt_vocab;
        orch.audio_channels = world.audio_channels;
        orch.latent_audio_rate = world.latent_audio_rate;
        pap.state_dim = orch.model_dim;
        pap.cond_dim = orch.cond_dim;
        dit.validate();
        orch.validate();
        require(chunk_video_frames >= 1, "SystemConfig: empty chunk");
    }
};

// One ground-truth chunk training instance cut from a SynthSample.
struct ChunkData {
    LatentBlock z_v, z_a;              // clean chunk latents
    JointDenoiser::Cond motion;        // trailing frames of the previous chunk
    JointDenoiser::Cond sink;          // leading frames of the first chunk
    LatentBlock ref;                   // one video frame
    LatentBlock ref_audio;
    LatentBlock history_audio;         // whole-token truncated
    std::vector<std::uint32_t> window_transcript;
    double endpoint = 0.0;             // ground-truth s within the window
    std::vector<int> prompt_ids;
};

// Conditioning for generating one chunk at inference.
struct GenCond {
    LatentBlock ref, ref_audio, history_audio;
    std::vector<std::uint32_t> window_transcript;
    std::vector<int> prompt_ids;
    JointDenoiser::Cond motion, sink;
};

struct GenOut {
    LatentBlock z_v, z_a;
    double s_hat = 0.0;       // PAP endpoint within the window
    std::size_t denoiser_calls = 0;
};

class System {
public:
    explicit System(SystemConfig cfg);

    SystemConfig cfg;
    Orchestrator orch;
    JointDenoiser dit;
    Pap pap;

    SynthSample draw_sample(Rng& rng) const;
    std::size_t n_full_chunks(const SynthSample& s) const;
    ChunkData make_chunk(const SynthSample& s, std::size_t chunk_idx) const;

    struct LossOut {
        Graph::Id total = -1;
        double flow = 0.0, pap = 0.0;
    };
    // Builds the joint end-to-end graph: orchestrator -> c_a -> denoiser,
    // flow loss plus PAP smooth-l1 supervision.
    LossOut loss_graph(Graph& g, const ChunkData& cd, double t, Rng& noise_rng);

    GenOut generate_chunk(JointDenoiser& net, const GenCond& cond,
                          const std::vector<double>& schedule, Rng& noise_rng,
                          bool use_cache = true);

    struct TrainLog {
        std::size_t step;
        double flow_loss, pap_loss;
    };
    // orch_lr <= 0 means "use lr". After an orchestrator warm-up, joint
    // training should run the orchestrator at a much lower rate so the flow
    // loss does not erase the warmed-up transcript pathway before the
    // denoiser learns to read it.
    void train_teacher(std::size_t steps, double lr, Rng& rng,
                       const std::function<void(const TrainLog&)>& log = {},
                       double orch_lr = 0.0);

    // Pre-joint warm-up for the orchestrator and pointer (the denoiser is
    // untouched): a linear readout of c_a must reconstruct the clean chunk
    // audio so the condition frames carry transcript-driven content before
    // joint training starts, and an endpoint pass on the finished audio
    // trains the pointer. Returns the mean readout loss over the last 50
    // steps.
    double pretrain_orchestrator(std::size_t steps, double lr, Rng& rng);

    double pap_mae(std::size_t n_chunks, Rng& rng);

    OrchestratorInput make_orch_input(const GenCond& cond, const LatentBlock& x_t_a,
                                      double t) const;
};

}  // namespace streamchar
