#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "streamchar/core.hpp"
#include "streamchar/graph.hpp"

namespace streamchar {
namespace flowcore {

struct FlowState {
    LatentBlock x_v, x_a;      // noisy latents
    LatentBlock eps_v, eps_a;  // sampled noises
    double t = 0.0;
};

// x = (1-t) z + t eps, same t for both modalities.
inline FlowState corrupt(const LatentBlock& z_v, const LatentBlock& z_a, LatentBlock eps_v,
                         LatentBlock eps_a, double t) {
    require(t >= 0.0 && t <= 1.0, "corrupt: t outside [0,1]");
    require(z_v.same_shape(eps_v) && z_a.same_shape(eps_a), "corrupt: shape mismatch");
    FlowState s;
    s.t = t;
    s.x_v = z_v;
    s.x_a = z_a;
    for (std::size_t i = 0; i < s.x_v.size(); ++i)
        s.x_v.v[i] = (1.0 - t) * z_v.v[i] + t * eps_v.v[i];
    for (std::size_t i = 0; i < s.x_a.size(); ++i)
        s.x_a.v[i] = (1.0 - t) * z_a.v[i] + t * eps_a.v[i];
    s.x_v.provenance = Provenance::noise;
    s.x_a.provenance = Provenance::noise;
    s.eps_v = std::move(eps_v);
    s.eps_a = std::move(eps_a);
    return s;
}

// v = eps - z.
inline LatentBlock velocity_target(const LatentBlock& z, const LatentBlock& eps) {
    require(z.same_shape(eps), "velocity_target: shape mismatch");
    LatentBlock v = z;
    for (std::size_t i = 0; i < v.size(); ++i) v.v[i] = eps.v[i] - z.v[i];
    return v;
}

// Per-modality mean squared error against the velocity targets, summed.
inline double flow_loss(const LatentBlock& pred_v, const LatentBlock& pred_a,
                        const LatentBlock& z_v, const LatentBlock& z_a, const LatentBlock& eps_v,
                        const LatentBlock& eps_a) {
    require(pred_v.same_shape(z_v) && pred_a.same_shape(z_a), "flow_loss: shape mismatch");
    LatentBlock tv = velocity_target(z_v, eps_v), ta = velocity_target(z_a, eps_a);
    double lv = 0.0, la = 0.0;
    for (std::size_t i = 0; i < tv.size(); ++i) {
        double d = pred_v.v[i] - tv.v[i];
        lv += d * d;
    }
    for (std::size_t i = 0; i < ta.size(); ++i) {
        double d = pred_a.v[i] - ta.v[i];
        la += d * d;
    }
    return lv / static_cast<double>(tv.size()) + la / static_cast<double>(ta.size());
}

// Graph version for training. Targets are pre-flattened token-row matrices
// matching the prediction node layouts.
inline Graph::Id flow_loss_node(Graph& g, Graph::Id pred_v, Graph::Id pred_a,
                                const Tensor& target_v_rows, const Tensor& target_a_rows) {
    return g.add(g.mean_sq_diff(pred_v, target_v_rows), g.mean_sq_diff(pred_a, target_a_rows));
}

using Denoiser = std::function<std::pair<LatentBlock, LatentBlock>(const LatentBlock& x_v,
                                                                   const LatentBlock& x_a,
                                                                   double t)>;

inline std::vector<double> uniform_schedule(std::size_t n_steps) {
    require(n_steps >= 1, "uniform_schedule: empty");
    std::vector<double> s(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i)
        s[i] = 1.0 - static_cast<double>(i) / static_cast<double>(n_steps);
    return s;
}

// Euler integration x <- x - dt * f(x, t) from pure noise down to t = 0.
// The schedule lists the evaluation times, strictly decreasing from 1.0;
// the final step integrates from schedule.back() to 0.
inline std::pair<LatentBlock, LatentBlock> sample(const Denoiser& f, const LatentBlock& noise_v,
                                                  const LatentBlock& noise_a,
                                                  const std::vector<double>& schedule) {
    require(!schedule.empty(), "sample: empty schedule");
    require(schedule.front() == 1.0, "sample: schedule must start at 1.0");
    for (std::size_t i = 0; i + 1 < schedule.size(); ++i)
        require(schedule[i] > schedule[i + 1], "sample: schedule not strictly decreasing");
    require(schedule.back() > 0.0, "sample: schedule must stay above 0");

    LatentBlock x_v = noise_v, x_a = noise_a;
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        double t = schedule[i];
        double t_next = (i + 1 < schedule.size()) ? schedule[i + 1] : 0.0;
        double dt = t - t_next;
        auto [v_v, v_a] = f(x_v, x_a, t);
        require(v_v.same_shape(x_v) && v_a.same_shape(x_a), "sample: denoiser shape mismatch");
        for (std::size_t j = 0; j < x_v.size(); ++j) x_v.v[j] -= dt * v_v.v[j];
        for (std::size_t j = 0; j < x_a.size(); ++j) x_a.v[j] -= dt * v_a.v[j];
    }
    x_v.provenance = Provenance::generated;
    x_a.provenance = Provenance::generated;
    return {x_v, x_a};
}

}  // namespace flowcore
}  // namespace streamchar
