#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace doser {

/// Adam with bias correction and a cosine learning-rate schedule over
/// total_steps. The schedule is evaluated at the pre-increment step counter:
/// lr(0) = base_lr, lr(total_steps) = 0.
struct AdamState {
    size_t step = 0;
    double base_lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    size_t total_steps = 1;
    std::vector<double> m, v;

    static AdamState make(size_t n, double lr, size_t total_steps);
};

double cosine_lr(const AdamState& s);

/// One update in place. Throws TrainingError (with the step index) on a
/// non-finite gradient component.
void adam_step(AdamState& s, std::span<double> weights, std::span<const double> grads);

}  // namespace doser
