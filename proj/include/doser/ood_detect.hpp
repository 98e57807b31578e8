#pragma once

#include "doser/diffusion.hpp"
#include "doser/mat.hpp"
#include "doser/mlp.hpp"
#include "doser/toyworld.hpp"

namespace doser {

/// Calibrated reconstruction-error cutoffs. tau_* is the nearest-rank
/// percentile of the sorted calibration errors.
struct OodThresholds {
    double tau_a = 0.0, tau_s = 0.0;
    double percentile_a = 99.0, percentile_s = 99.0;
    std::vector<double> calibration_errors_a, calibration_errors_s;  // sorted ascending

    bool calibrated() const {
        return !calibration_errors_a.empty() && !calibration_errors_s.empty();
    }
};

/// ceil(p/100 * n)-th order statistic of a sorted sample (1-based).
double nearest_rank_percentile(std::span<const double> sorted_values, double p);

/// Scores every dataset row (or `subsample` rows if nonzero) with both
/// diffusion models, sorts the errors, and applies the nearest-rank rule.
OodThresholds fit_thresholds(const DenoiserModel& behavior, const DenoiserModel& state_model,
                             const Dataset& data, double percentile_a, double percentile_s,
                             size_t m_draws, uint64_t seed, size_t subsample = 0);

/// Strictly-greater comparison: an error exactly at the threshold is ID.
bool is_ood_action(const OodThresholds& t, double error_a);
bool is_ood_state(const OodThresholds& t, double error_s);

/// Dynamics ensemble for epistemic-uncertainty scoring:
/// Var(s') = (1/K) sum_k ||s'_k - mean||^2.
struct EnsembleDetector {
    std::vector<Mlp> members;  // (s,a) -> s'
    size_t state_dim = 1, action_dim = 1;
    double variance_threshold = -1.0;  // < 0 means uncalibrated

    bool trained() const { return !members.empty(); }
    bool calibrated() const { return variance_threshold >= 0.0; }
};

struct EnsembleTrainConfig {
    size_t members = 5;
    size_t steps = 4000;
    size_t batch = 256;
    double lr = 1e-3;
    std::vector<size_t> hidden = {64, 64};
};

/// Members share the data and differ only by init/minibatch seeds.
EnsembleDetector train_ensemble(const Dataset& data, const EnsembleTrainConfig& cfg,
                                uint64_t seed);

double ensemble_score(const EnsembleDetector& det, std::span<const double> s,
                      std::span<const double> a);

/// Sets variance_threshold to the given percentile of member variance over
/// the dataset rows.
void calibrate_gate(EnsembleDetector& det, const Dataset& data, double percentile = 99.0);

enum class GateDecision { kConfident, kUncertain };

/// Uncertain iff ensemble variance exceeds the calibrated threshold.
GateDecision ensemble_gate(const EnsembleDetector& det, std::span<const double> s,
                           std::span<const double> a);

/// Sample variance of Q(s,a) over `passes` stochastic forward passes with
/// dropout active. The net must have dropout_prob > 0.
double mc_dropout_score(const Mlp& q_net, std::span<const double> s, std::span<const double> a,
                        size_t passes, Rng& rng);

struct DropoutQConfig {
    double dropout = 0.1;
    size_t steps = 6000;
    size_t batch = 256;
    double lr = 1e-3;
    std::vector<size_t> hidden = {64, 64};
};

/// Q-network with dropout, regressed onto ground-truth Q values at the
/// dataset's state-action pairs (the toy task has an exact Q oracle).
Mlp train_dropout_q(const Dataset& data, const NavEnv& env, const Mat& q_table,
                    const DropoutQConfig& cfg, uint64_t seed);

/// Conditional VAE over (s -> a): encoder (s,a) -> (mu, logvar) of the
/// latent, decoder (s, z) -> a_hat.
struct CvaeModel {
    Mlp encoder, decoder;
    size_t latent_dim = 4;
    size_t state_dim = 1, action_dim = 1;

    static CvaeModel make(size_t state_dim, size_t action_dim, size_t latent_dim,
                          std::vector<size_t> hidden_dims, Rng& rng);
};

struct CvaeTrainConfig {
    size_t steps = 8000;
    size_t batch = 256;
    double lr = 1e-3;
    double kl_weight = 1.0;
};

/// ELBO training: ||a - dec(s, mu + sigma*eps)||^2 + kl_weight * KL(q || N(0,I)).
std::vector<double> train_cvae(CvaeModel& m, const Dataset& data, const CvaeTrainConfig& cfg,
                               Rng& rng);

/// ||a - dec(s, z)||_2. z is the posterior mean by default (deterministic);
/// pass an rng to sample the posterior instead.
double cvae_score(const CvaeModel& m, std::span<const double> s, std::span<const double> a,
                  Rng* sample_rng = nullptr);

}  // namespace doser
