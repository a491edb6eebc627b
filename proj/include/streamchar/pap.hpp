#pragma once

#include <vector>

#include "streamchar/graph.hpp"
#include "streamchar/params.hpp"

namespace streamchar {

// Progress-aware pointer: predicts the real-valued spoken transcript
// endpoint for a chunk from transcript hidden states and the audio
// condition c_a.
struct PapConfig {
    std::size_t state_dim = 32;  // transcript hidden width
    std::size_t cond_dim = 32;   // c_a width
    std::size_t attn_dim = 16;
    std::size_t head_hidden = 16;
    std::uint64_t seed = 13;
};

class Pap {
public:
    struct Out {
        Graph::Id s_hat = -1;  // (1,1), clamped to [0, N]
        Graph::Id p = -1;      // (J,1) frame-wise soft positions
        Graph::Id delta = -1;  // (J,1) learned offsets
        Graph::Id w = -1;      // (1,J) confidence weights, sum 1
    };

    explicit Pap(PapConfig cfg);

    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }
    const PapConfig& config() const { return cfg_; }

    // transcript_states: (N, state_dim); c_a: (J, cond_dim) node ids.
    Graph::Id soft_positions(Graph& g, Graph::Id transcript_states, Graph::Id c_a);
    Out forward(Graph& g, Graph::Id transcript_states, Graph::Id c_a);

    double predict(const Tensor& transcript_states, const Tensor& c_a);

    void randomize(Rng& rng, double stddev);

private:
    Graph::Id leafp(Graph& g, const std::string& name) {
        return g.leaf(params_.value(name), &params_.grad(name));
    }

    PapConfig cfg_;
    ParameterSet params_;
};

// Smooth l1 with transition 1: 0.5 d^2 for |d| < 1 else |d| - 0.5.
inline double pap_loss(double s_hat, double s_true) {
    double d = s_hat - s_true;
    return (std::abs(d) < 1.0) ? 0.5 * d * d : std::abs(d) - 0.5;
}

// First ceil(s_hat) tokens; the partially spoken token is included.
inline std::vector<std::uint32_t> truncate_transcript(const std::vector<std::uint32_t>& transcript,
                                                      double s_hat) {
    require(s_hat >= 0.0 && s_hat <= static_cast<double>(transcript.size()),
            "truncate_transcript: s_hat outside [0, N]");
    std::size_t n = static_cast<std::size_t>(std::ceil(s_hat));
    return std::vector<std::uint32_t>(transcript.begin(),
                                      transcript.begin() + static_cast<std::ptrdiff_t>(n));
}

}  // namespace streamchar
