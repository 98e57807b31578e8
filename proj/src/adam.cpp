#include "doser/adam.hpp"

#include <cmath>

#include "doser/errors.hpp"

namespace doser {

AdamState AdamState::make(size_t n, double lr, size_t total_steps) {
    if (lr <= 0.0) throw InputError("AdamState: base_lr must be positive");
    if (total_steps == 0) throw InputError("AdamState: total_steps must be positive");
    AdamState s;
    s.base_lr = lr;
    s.total_steps = total_steps;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    return s;
}

double cosine_lr(const AdamState& s) {
    const double frac = static_cast<double>(s.step) / static_cast<double>(s.total_steps);
    return s.base_lr * 0.5 * (1.0 + std::cos(M_PI * frac));
}

void adam_step(AdamState& s, std::span<double> weights, std::span<const double> grads) {
    if (weights.size() != s.m.size() || grads.size() != s.m.size())
        throw InputError("adam_step: array sizes not congruent");
    for (double g : grads)
        if (!std::isfinite(g)) throw TrainingError("adam_step: non-finite gradient", s.step);

    const double lr = cosine_lr(s);
    const double t = static_cast<double>(s.step + 1);
    const double bc1 = 1.0 - std::pow(s.beta1, t);
    const double bc2 = 1.0 - std::pow(s.beta2, t);
    for (size_t i = 0; i < weights.size(); ++i) {
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grads[i];
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grads[i] * grads[i];
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        weights[i] -= lr * mhat / (std::sqrt(vhat) + s.eps);
    }
    s.step += 1;
}

}  // namespace doser
