#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "doser/mat.hpp"
#include "doser/rng.hpp"

namespace doser {

/// 1D navigation: position in [-10, 10], step in [-1, 1], reward is the
/// negative distance of the post-step position to the target at 0.
struct NavEnv {
    double state_lo = -10.0;
    double state_hi = 10.0;
    double action_lo = -1.0;
    double action_hi = 1.0;
    int horizon = 50;
    double target = 0.0;
};

/// s' = clamp(s + a), r = -|s'|. Actions outside the box are clamped first.
std::pair<double, double> nav_step(const NavEnv& env, double s, double a);

/// a = clamp(-s, -1, 1): the greedy rule the datasets perturb.
double optimal_action(const NavEnv& env, double s);

enum class DatasetKind { kExpert, kMedium };

/// Flat transition store. Values are kept in 32-bit floats, matching the
/// on-disk format exactly so persistence round-trips are bit-identical.
/// Rows are generated with float arithmetic, so r == -|s'| and
/// s' == clamp(s + a) hold exactly in f32.
struct Dataset {
    size_t state_dim = 1;
    size_t action_dim = 1;
    std::vector<float> s, a, r, s_next, done;
    std::string source_tag = "custom";
    uint64_t seed = 0;

    size_t rows() const { return r.size(); }
    const float* state_row(size_t i) const { return s.data() + i * state_dim; }
    const float* action_row(size_t i) const { return a.data() + i * action_dim; }
    const float* next_state_row(size_t i) const { return s_next.data() + i * state_dim; }
};

/// Double-precision views used by training code.
Mat dataset_states(const Dataset& d);
Mat dataset_actions(const Dataset& d);
Mat dataset_next_states(const Dataset& d);
std::vector<double> dataset_rewards(const Dataset& d);
std::vector<double> dataset_done(const Dataset& d);

/// Rolls full episodes from uniform starts, acting with
/// clamp(optimal_action(s) + eps) where eps ~ U[-0.05, 0.05] (expert) or
/// U[-0.5, 0.5] (medium), until n transitions are emitted.
Dataset gen_dataset(const NavEnv& env, DatasetKind kind, size_t n, uint64_t seed);

/// Value iteration for the optimal Q on the discretized environment, to
/// sup-norm residual < tol. Returns a (state_bins x action_bins) table.
Mat ground_truth_q(const NavEnv& env, size_t state_bins, size_t action_bins, double gamma,
                   double tol = 1e-10, size_t max_iter = 1000000);

/// Bilinear lookup into a ground_truth_q table.
double q_lookup(const NavEnv& env, const Mat& q, double s, double a);

/// Paired synthetic-OOD split: n rows sampled from the dataset, plus copies
/// whose actions are shifted by noise_scale * N(0,1), unclipped.
struct OodSplit {
    Dataset id;
    Dataset ood;
};
OodSplit perturb_ood(const Dataset& d, size_t n, double noise_scale, uint64_t seed);

/// Gaussian mixture with arbitrary SPD covariances (stored dense).
struct GmmSpec {
    size_t k = 4;
    Mat means;                  // k x dim
    std::vector<Mat> covs;      // k of dim x dim, SPD
    std::vector<double> weights;

    size_t dim() const { return means.cols; }
    /// Four components at the (+-3, +-3) corners, unit isotropic covariance,
    /// equal weights.
    static GmmSpec symmetric_default();
};

/// Exact negative log-likelihood of a point under the mixture.
double gmm_nll(const GmmSpec& spec, std::span<const double> x);

/// Mixture draws (for training a model of the distribution).
Mat sample_gmm(const GmmSpec& spec, size_t n, uint64_t seed);

/// Uniform probe points covering the mixture's +-4 sigma extent, each with
/// its exact NLL.
struct GmmProbe {
    Mat points;
    std::vector<double> nll;
};
GmmProbe gen_gmm(const GmmSpec& spec, size_t n, uint64_t seed);

/// Return anchors for normalized scores: the greedy optimal rule and the
/// uniform-random policy, averaged over seeded episodes.
struct EvalAnchors {
    double j_opt = 0.0;
    double j_random = 0.0;
};
EvalAnchors normalization_anchors(const NavEnv& env, size_t episodes, uint64_t seed);

double normalized_score(double mean_return, const EvalAnchors& anchors);

}  // namespace doser
