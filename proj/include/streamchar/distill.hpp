#pragma once

#include <ostream>

#include "streamchar/system.hpp"

namespace streamchar {

// Score-distillation of the many-step teacher denoiser into a few-step
// student, plus a second stage that trains the student on its own rollouts.
struct DistillConfig {
    std::size_t stage1_steps = 600;
    std::size_t stage2_steps = 400;
    double lr_student = 2e-6;
    double lr_fake = 4e-7;
    std::size_t rollout_chunks = 5;  // chunks per on-policy rollout
    std::size_t loss_window = 3;     // trailing chunks the loss covers
    bool use_sink = true;
    std::size_t transcript_lookahead = 10;  // window tokens from the cursor
};

struct RolloutOut {
    std::vector<GenOut> chunks;
    LatentBlock video, audio;     // concatenated over chunks
    std::vector<double> cursor;   // absolute endpoint after each chunk
};

class Distiller {
public:
    Distiller(System& teacher, DistillConfig cfg);

    DistillConfig cfg;
    System& teacher;
    JointDenoiser student;  // initialized from the teacher weights
    JointDenoiser fake;     // score model tracking the student distribution

    // One distribution-matching step on a ground-truth-conditioned chunk:
    // unrolled few-step student sample, re-noised, pushed toward the
    // teacher score and away from the current fake score; then one flow
    // step fitting the fake score to fresh student samples.
    struct StepLog {
        std::size_t step = 0;
        double grad_dot = 0.0;   // surrogate value (fake - real, x_t)
        double fake_loss = 0.0;
    };
    StepLog dmd_step(std::size_t step, Rng& rng);

    void run_stage1(Rng& rng, std::ostream* diag = nullptr);
    void run_stage2(Rng& rng, std::ostream* diag = nullptr);

    // Free-running student rollout over a script: chunk conditioning comes
    // from the student's own outputs (motion = trailing frames, sink =
    // leading frames of the first chunk, bounded history), transcript
    // windows follow the pointer cursor.
    RolloutOut rollout(JointDenoiser& net, const SynthSample& script, std::size_t n_chunks,
                       Rng& rng, bool with_sink, std::ostream* diag = nullptr);

    // One on-policy step: roll the student for rollout_chunks chunks, keep
    // the trailing loss_window chunks differentiable, and apply the
    // distribution-matching update on their concatenation at a shared
    // re-noise level.
    StepLog stage2_step(std::size_t step, Rng& rng);

    bool teacher_unchanged() const;

private:
    struct Unrolled {
        Graph::Id xv_rows = -1, xa_rows = -1;  // student sample at t = 0
        LatentBlock z_v, z_a;
    };
    Unrolled unroll_student(Graph& g, const GenCond& cond, Rng& rng);

    GenCond next_cond(const RolloutOut& so, const SynthSample& script, double cursor,
                      bool with_sink) const;

    void fake_update(const GenCond& cond, const LatentBlock& z_v, const LatentBlock& z_a,
                     Rng& rng, StepLog& log);

    std::uint64_t teacher_fp_;
};

// Conditioning view of a ground-truth chunk.
inline GenCond to_gen_cond(const ChunkData& cd) {
    GenCond c;
    c.ref = cd.ref;
    c.ref_audio = cd.ref_audio;
    c.history_audio = cd.history_audio;
    c.window_transcript = cd.window_transcript;
    c.prompt_ids = cd.prompt_ids;
    c.motion = cd.motion;
    c.sink = cd.sink;
    return c;
}

}  // namespace streamchar
