#pragma once

#include "doser/adam.hpp"
#include "doser/mat.hpp"
#include "doser/mlp.hpp"
#include "doser/rng.hpp"

namespace doser {

struct SupervisedConfig {
    size_t steps = 5000;
    size_t batch = 256;
    double lr = 3e-4;
    bool dropout_active = true;  // train-mode forward when the net has dropout
};

/// Minibatch MSE regression of net(x) onto y with Adam + cosine decay.
/// Returns the per-step loss trace.
std::vector<double> train_regression(Mlp& net, const Mat& x, const Mat& y,
                                     const SupervisedConfig& cfg, Rng& rng);

/// Mean squared error of net(x) against y (no dropout).
double mse(const Mlp& net, const Mat& x, const Mat& y);

}  // namespace doser
