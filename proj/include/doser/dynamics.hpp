#pragma once

#include "doser/mat.hpp"
#include "doser/mlp.hpp"
#include "doser/rng.hpp"
#include "doser/toyworld.hpp"

namespace doser {

/// One-step model (s, a) -> (s', r). The reward head is trained jointly even
/// though the OOD classification path only consumes the next state.
struct DynamicsModel {
    Mlp net;  // (state_dim + action_dim) -> (state_dim + 1)
    size_t state_dim = 1;
    size_t action_dim = 1;
    size_t training_steps_done = 0;
    double state_lo = -10.0;
    double state_hi = 10.0;

    static DynamicsModel make(size_t state_dim, size_t action_dim,
                              std::vector<size_t> hidden_dims, double state_lo, double state_hi,
                              Rng& rng);
};

struct DynamicsTrainConfig {
    size_t steps = 5000;
    size_t batch = 256;
    double lr = 3e-4;
};

/// Supervised regression of (s', r) on (s, a); returns the loss trace.
std::vector<double> train_dynamics(DynamicsModel& m, const Dataset& data,
                                   const DynamicsTrainConfig& cfg, Rng& rng);

/// Deterministic prediction; next state clamped to the state box.
void predict(const DynamicsModel& m, std::span<const double> s, std::span<const double> a,
             std::span<double> s_next_out, double& r_out);

/// Batched prediction into s_next (clamped) and rewards.
void predict_batch(const DynamicsModel& m, const Mat& s, const Mat& a, Mat& s_next,
                   std::vector<double>& r, MlpWorkspace& ws);

}  // namespace doser
