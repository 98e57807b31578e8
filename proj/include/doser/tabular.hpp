#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "doser/mat.hpp"
#include "doser/rng.hpp"

namespace doser {

enum class OodLabel : uint8_t { kId = 0, kBeneficial = 1, kDetrimental = 2 };

/// Finite MDP with oracle behavior support and OOD labels, used to certify
/// the selective policy-evaluation operator exactly.
///
/// `support` marks in-distribution pairs and drives the in-sample backup
/// (empirical behavior policy taken uniform over the support). `labels`
/// selects which backup branch applies per pair; for the unperturbed MDP the
/// two agree (label == kId iff support), while the deviation experiment
/// corrupts labels only, the way a misclassifying detector would.
struct TabularMdp {
    size_t n_states = 0;
    size_t n_actions = 0;
    std::vector<double> transition;  // S*A*S, rows sum to 1
    std::vector<double> reward;      // S*A, values in [r_min, r_max]
    double gamma = 0.99;
    std::vector<uint8_t> support;    // S*A
    std::vector<OodLabel> labels;    // S*A
    double delta_v = 0.0;            // fixed scalar >= 0
    double eta = 0.9;                // in [0, 1]
    double r_min = 0.0, r_max = 1.0;

    double q_min() const { return r_min / (1.0 - gamma); }
    double q_max() const { return r_max / (1.0 - gamma); }
    const double* row(size_t s, size_t a) const {
        return transition.data() + (s * n_actions + a) * n_states;
    }
    /// Throws InputError on malformed tensors or a state with empty support.
    void validate() const;
};

/// Q'(s,a) = R(s,a) + gamma * sum_s' P(s'|s,a) * mean over supported a' of Q(s',a')
Mat in_sample_op(const TabularMdp& mdp, const Mat& q);

/// Selective backup: in-sample for kId, q_min for kDetrimental,
/// eta * (max over supported actions of Q(s,.) + delta_v) for kBeneficial.
/// `labels` overrides mdp.labels when nonempty.
Mat doser_op(const TabularMdp& mdp, const Mat& q, std::span<const OodLabel> labels = {});

/// Max over random Q pairs (entries uniform in [q_min, q_max]) of
/// ||T Q1 - T Q2||_inf / ||Q1 - Q2||_inf, skipping zero denominators.
double check_contraction(const TabularMdp& mdp, size_t trials, Rng& rng);

/// Iterate doser_op from q0 (or zeros) to sup-norm residual < tol.
Mat fixed_point(const TabularMdp& mdp, double tol, size_t max_iter = 100000,
                const Mat* q0 = nullptr, std::span<const OodLabel> labels = {});

/// Fixed point of the in-sample operator alone.
Mat in_sample_fixed_point(const TabularMdp& mdp, double tol, size_t max_iter = 100000);

struct DeviationTable {
    std::vector<double> eps_dyn;  // row grid
    std::vector<double> eps_det;  // column grid
    Mat mean_deviation;           // |eps_dyn| x |eps_det|
};

/// Reference fixed point with true transitions and labels; each grid cell
/// averages ||Q_hat - Q_ref||_inf over `trials` perturbed reconstructions:
/// transition rows mixed toward a random row with L1 shift <= eps_dyn, and
/// each label independently replaced by a wrong one with probability eps_det.
DeviationTable deviation_experiment(const TabularMdp& mdp, std::span<const double> eps_dyn_grid,
                                    std::span<const double> eps_det_grid, size_t trials, Rng& rng);

struct RandomMdpConfig {
    double gamma = 0.99;
    double reward_lo = 0.0;
    double reward_hi = 1.0;
    double support_frac = 0.6;      // fraction of pairs in-distribution
    double beneficial_frac = 0.5;   // of the OOD pairs
    double delta_v = 0.5;
    double eta = 0.9;
};

/// Random dense MDP with at least one supported action per state and labels
/// consistent with the support mask.
TabularMdp random_mdp(size_t n_states, size_t n_actions, const RandomMdpConfig& cfg, Rng& rng);

}  // namespace doser
