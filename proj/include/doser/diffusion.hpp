#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "doser/mat.hpp"
#include "doser/mlp.hpp"
#include "doser/rng.hpp"

namespace doser {

/// Continuous noise schedule. Training sigmas are drawn from a log-logistic
/// distribution centered at sigma_data (scale s) and clamped to
/// [sigma_min, sigma_max].
struct NoiseSchedule {
    double sigma_data = 0.5;
    double sigma_min = 0.02;
    double sigma_max = 80.0;
    double scale = 1.0;  // log-logistic scale parameter
    /// Use the variance-normalizing 1/sqrt(sigma^2 + sigma_data^2) input
    /// scaling. The non-sqrt variant is selectable for comparison but breaks
    /// unit-variance inputs.
    bool sqrt_cin = true;
};

struct Precond {
    double c_skip, c_out, c_in, c_noise, lambda;
};

/// Sigma-dependent denoiser coefficients:
///   c_skip = sd^2/(s^2+sd^2), c_out = s*sd/sqrt(s^2+sd^2),
///   c_in = 1/sqrt(s^2+sd^2), c_noise = ln(s)/4, lambda = (s^2+sd^2)/(s*sd)^2.
/// lambda * c_out^2 == 1 identically.
Precond precondition(double sigma, double sigma_data);
Precond precondition(double sigma, const NoiseSchedule& sched);

/// sigma = clamp(exp(ln(sigma_data) + scale * logit(u)), sigma_min, sigma_max)
double sample_sigma(const NoiseSchedule& sched, Rng& rng);

enum class NoiseEmbedding { kScalar, kSinusoidal };

/// A denoiser D(x, sigma, cond) = c_skip*x + c_out*F(c_in*x, c_noise, cond)
/// where F is an MLP. condition_dim = 0 gives the unconditional (state
/// distribution) model; condition_dim = state_dim gives the behavior model.
struct DenoiserModel {
    Mlp net;
    NoiseSchedule schedule;
    size_t condition_dim = 0;
    size_t target_dim = 1;
    NoiseEmbedding embedding = NoiseEmbedding::kScalar;
    size_t embed_width = 16;  // used only for kSinusoidal

    size_t noise_feature_dim() const {
        return embedding == NoiseEmbedding::kScalar ? 1 : embed_width;
    }
    size_t feature_dim() const { return target_dim + noise_feature_dim() + condition_dim; }

    static DenoiserModel make(size_t target_dim, size_t condition_dim,
                              std::vector<size_t> hidden_dims, const NoiseSchedule& sched,
                              Rng& rng, NoiseEmbedding embedding = NoiseEmbedding::kScalar);
};

/// Writes the noise-conditioning features for c_noise into out.
void noise_features(const DenoiserModel& m, double c_noise, double* out);

/// Single-sample denoise. condition must be empty iff condition_dim == 0.
std::vector<double> denoise(const DenoiserModel& m, std::span<const double> noisy, double sigma,
                            std::span<const double> condition);

/// Batched denoise: one sigma per row; cond may be empty for unconditional
/// models. out is resized to noisy's shape.
void denoise_batch(const DenoiserModel& m, const Mat& noisy, std::span<const double> sigmas,
                   const Mat& cond, Mat& out, MlpWorkspace& ws);

struct DenoiserTrainConfig {
    size_t steps = 20000;
    size_t batch = 256;
    double lr = 3e-4;
};

struct TrainTraceResult {
    std::vector<double> loss_trace;  // lambda-weighted loss per step
};

/// Minimizes E[lambda(sigma) * ||target - D(target + sigma*eps, sigma, cond)||^2]
/// over minibatches with Adam + cosine decay. Since lambda*c_out^2 == 1 the
/// optimized residual is the raw-network one, which keeps gradients O(1)
/// across the whole sigma range.
TrainTraceResult train_denoiser(DenoiserModel& m, const Mat& targets, const Mat& conditions,
                                const DenoiserTrainConfig& cfg, Rng& rng);

/// Karras sigma grid: steps values from sigma_max down to sigma_min with
/// exponent rho, followed by a terminal 0.
std::vector<double> karras_grid(size_t steps, double sigma_min, double sigma_max, double rho = 7.0);

/// Draw one sample per condition row by integrating the probability-flow ODE
/// with Heun's method over a Karras grid, starting from sigma_max * N(0, I).
/// Output rows are clipped to [box_lo, box_hi].
Mat sample_denoiser(const DenoiserModel& m, const Mat& conditions, size_t rows_if_unconditional,
                    size_t steps, Rng& rng, double box_lo, double box_hi);

/// n i.i.d. action draws from the behavior model at a single state.
Mat sample_actions(const DenoiserModel& m, std::span<const double> state, size_t n, size_t steps,
                   Rng& rng, double box_lo = -1.0, double box_hi = 1.0);

/// Mean over m_draws of ||x - D(x + sigma*eps, sigma, cond)||_2 with fresh
/// (sigma, eps) per draw.
double recon_error(const DenoiserModel& m, std::span<const double> target,
                   std::span<const double> condition, size_t m_draws, Rng& rng);

double recon_error_action(const DenoiserModel& m, std::span<const double> state,
                          std::span<const double> action, size_t m_draws, Rng& rng);
double recon_error_state(const DenoiserModel& m, std::span<const double> state, size_t m_draws,
                         Rng& rng);

/// Batched reconstruction errors, one per row. Draws are derived by seed
/// splitting per row, so the result is independent of evaluation order.
std::vector<double> recon_errors(const DenoiserModel& m, const Mat& targets, const Mat& conditions,
                                 size_t m_draws, uint64_t seed);

}  // namespace doser
