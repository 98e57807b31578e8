#include "doser/toyworld.hpp"

#include <algorithm>
#include <cmath>

#include "doser/errors.hpp"

namespace doser {

std::pair<double, double> nav_step(const NavEnv& env, double s, double a) {
    a = std::clamp(a, env.action_lo, env.action_hi);
    const double s_next = std::clamp(s + a, env.state_lo, env.state_hi);
    return {s_next, -std::abs(s_next - env.target)};
}

double optimal_action(const NavEnv& env, double s) {
    return std::clamp(env.target - s, env.action_lo, env.action_hi);
}

Mat dataset_states(const Dataset& d) {
    Mat m(d.rows(), d.state_dim);
    for (size_t i = 0; i < m.size(); ++i) m.v[i] = static_cast<double>(d.s[i]);
    return m;
}

Mat dataset_actions(const Dataset& d) {
    Mat m(d.rows(), d.action_dim);
    for (size_t i = 0; i < m.size(); ++i) m.v[i] = static_cast<double>(d.a[i]);
    return m;
}

Mat dataset_next_states(const Dataset& d) {
    Mat m(d.rows(), d.state_dim);
    for (size_t i = 0; i < m.size(); ++i) m.v[i] = static_cast<double>(d.s_next[i]);
    return m;
}

std::vector<double> dataset_rewards(const Dataset& d) {
    return {d.r.begin(), d.r.end()};
}

std::vector<double> dataset_done(const Dataset& d) {
    return {d.done.begin(), d.done.end()};
}

Dataset gen_dataset(const NavEnv& env, DatasetKind kind, size_t n, uint64_t seed) {
    if (n < 1) throw InputError("gen_dataset: n must be >= 1");
    const double noise = kind == DatasetKind::kExpert ? 0.05 : 0.5;

    Dataset d;
    d.source_tag = kind == DatasetKind::kExpert ? "expert" : "medium";
    d.seed = seed;
    d.s.reserve(n);
    d.a.reserve(n);
    d.r.reserve(n);
    d.s_next.reserve(n);
    d.done.reserve(n);

    Rng rng(seed);
    const float lo = static_cast<float>(env.state_lo), hi = static_cast<float>(env.state_hi);
    const float alo = static_cast<float>(env.action_lo), ahi = static_cast<float>(env.action_hi);

    // Episodes run entirely in f32 so every stored tuple satisfies
    // s' == clamp(s + a) and r == -|s'| exactly in the stored precision.
    while (d.rows() < n) {
        float s = static_cast<float>(rng.uniform(env.state_lo, env.state_hi));
        for (int t = 0; t < env.horizon && d.rows() < n; ++t) {
            const float opt = std::clamp(static_cast<float>(env.target) - s, alo, ahi);
            const float eps = static_cast<float>(rng.uniform(-noise, noise));
            const float a = std::clamp(opt + eps, alo, ahi);
            const float s_next = std::clamp(s + a, lo, hi);
            const float r = -std::abs(s_next - static_cast<float>(env.target));
            d.s.push_back(s);
            d.a.push_back(a);
            d.r.push_back(r);
            d.s_next.push_back(s_next);
            d.done.push_back(t == env.horizon - 1 ? 1.0f : 0.0f);
            s = s_next;
        }
    }
    return d;
}

Mat ground_truth_q(const NavEnv& env, size_t state_bins, size_t action_bins, double gamma,
                   double tol, size_t max_iter) {
    if (state_bins < 2 || action_bins < 2) throw InputError("ground_truth_q: need >= 2 bins each");
    if (gamma < 0.0 || gamma >= 1.0) throw InputError("ground_truth_q: gamma must be in [0,1)");

    std::vector<double> sgrid(state_bins), agrid(action_bins);
    for (size_t i = 0; i < state_bins; ++i)
        sgrid[i] = env.state_lo + (env.state_hi - env.state_lo) * static_cast<double>(i) /
                                      static_cast<double>(state_bins - 1);
    for (size_t j = 0; j < action_bins; ++j)
        agrid[j] = env.action_lo + (env.action_hi - env.action_lo) * static_cast<double>(j) /
                                       static_cast<double>(action_bins - 1);

    // Deterministic transitions snapped to the nearest state bin.
    const double inv_ds = static_cast<double>(state_bins - 1) / (env.state_hi - env.state_lo);
    std::vector<size_t> next_idx(state_bins * action_bins);
    std::vector<double> reward(state_bins * action_bins);
    for (size_t i = 0; i < state_bins; ++i)
        for (size_t j = 0; j < action_bins; ++j) {
            const auto [s_next, r] = nav_step(env, sgrid[i], agrid[j]);
            const double pos = (s_next - env.state_lo) * inv_ds;
            size_t idx = static_cast<size_t>(std::nearbyint(pos));
            idx = std::min(idx, state_bins - 1);
            next_idx[i * action_bins + j] = idx;
            reward[i * action_bins + j] = r;
        }
    // The continuous problem is exactly symmetric under (s,a) -> (-s,-a);
    // grid arithmetic is not. Mirror half the table so the discretized MDP
    // keeps the symmetry instead of inheriting rounding artifacts.
    for (size_t i = 0; i < state_bins; ++i)
        for (size_t j = 0; j < action_bins; ++j) {
            const size_t mi = state_bins - 1 - i, mj = action_bins - 1 - j;
            if (std::make_pair(i, j) <= std::make_pair(mi, mj)) continue;
            next_idx[i * action_bins + j] = state_bins - 1 - next_idx[mi * action_bins + mj];
            reward[i * action_bins + j] = reward[mi * action_bins + mj];
        }

    Mat q(state_bins, action_bins, 0.0);
    std::vector<double> vmax(state_bins, 0.0);
    for (size_t iter = 0; iter < max_iter; ++iter) {
        for (size_t i = 0; i < state_bins; ++i) {
            double best = q.at(i, 0);
            for (size_t j = 1; j < action_bins; ++j) best = std::max(best, q.at(i, j));
            vmax[i] = best;
        }
        double residual = 0.0;
#pragma omp parallel for schedule(static) reduction(max : residual)
        for (long i = 0; i < static_cast<long>(state_bins); ++i) {
            for (size_t j = 0; j < action_bins; ++j) {
                const double next =
                    reward[i * action_bins + j] + gamma * vmax[next_idx[i * action_bins + j]];
                residual = std::max(residual, std::abs(next - q.at(i, j)));
                q.at(i, j) = next;
            }
        }
        if (residual < tol) return q;
    }
    throw NumericError("ground_truth_q: value iteration did not converge");
}

double q_lookup(const NavEnv& env, const Mat& q, double s, double a) {
    const size_t sb = q.rows, ab = q.cols;
    const double sf = (std::clamp(s, env.state_lo, env.state_hi) - env.state_lo) /
                      (env.state_hi - env.state_lo) * static_cast<double>(sb - 1);
    const double af = (std::clamp(a, env.action_lo, env.action_hi) - env.action_lo) /
                      (env.action_hi - env.action_lo) * static_cast<double>(ab - 1);
    const size_t i0 = std::min(static_cast<size_t>(sf), sb - 2);
    const size_t j0 = std::min(static_cast<size_t>(af), ab - 2);
    const double ts = sf - static_cast<double>(i0), ta = af - static_cast<double>(j0);
    return (1 - ts) * (1 - ta) * q.at(i0, j0) + (1 - ts) * ta * q.at(i0, j0 + 1) +
           ts * (1 - ta) * q.at(i0 + 1, j0) + ts * ta * q.at(i0 + 1, j0 + 1);
}

OodSplit perturb_ood(const Dataset& d, size_t n, double noise_scale, uint64_t seed) {
    if (noise_scale <= 0.0) throw InputError("perturb_ood: noise_scale must be positive");
    if (d.rows() == 0) throw InputError("perturb_ood: empty dataset");
    n = std::min(n, d.rows());

    Rng rng(seed);
    // Sample n distinct row indices (partial Fisher-Yates).
    std::vector<size_t> idx(d.rows());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
    idx.resize(n);

    OodSplit split;
    split.id.state_dim = split.ood.state_dim = d.state_dim;
    split.id.action_dim = split.ood.action_dim = d.action_dim;
    split.id.source_tag = d.source_tag + "-id";
    split.ood.source_tag = d.source_tag + "-ood";
    split.id.seed = split.ood.seed = seed;
    for (size_t i : idx) {
        for (size_t j = 0; j < d.state_dim; ++j) {
            split.id.s.push_back(d.s[i * d.state_dim + j]);
            split.ood.s.push_back(d.s[i * d.state_dim + j]);
            split.id.s_next.push_back(d.s_next[i * d.state_dim + j]);
            split.ood.s_next.push_back(d.s_next[i * d.state_dim + j]);
        }
        for (size_t j = 0; j < d.action_dim; ++j) {
            const float a = d.a[i * d.action_dim + j];
            split.id.a.push_back(a);
            // Unclipped on purpose: the perturbation is meant to move
            // off-support, including outside the action box.
            split.ood.a.push_back(a + static_cast<float>(noise_scale * rng.normal()));
        }
        split.id.r.push_back(d.r[i]);
        split.ood.r.push_back(d.r[i]);
        split.id.done.push_back(d.done[i]);
        split.ood.done.push_back(d.done[i]);
    }
    return split;
}

GmmSpec GmmSpec::symmetric_default() {
    GmmSpec spec;
    spec.k = 4;
    spec.means = Mat(4, 2);
    const double c[4][2] = {{3, 3}, {3, -3}, {-3, 3}, {-3, -3}};
    for (size_t i = 0; i < 4; ++i)
        for (size_t j = 0; j < 2; ++j) spec.means.at(i, j) = c[i][j];
    spec.covs.assign(4, Mat(2, 2));
    for (auto& cov : spec.covs) {
        cov.at(0, 0) = 1.0;
        cov.at(1, 1) = 1.0;
    }
    spec.weights.assign(4, 0.25);
    return spec;
}

namespace {

/// Cholesky factor (lower) of a small SPD matrix.
Mat cholesky(const Mat& a) {
    const size_t n = a.rows;
    Mat l(n, n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j <= i; ++j) {
            double sum = a.at(i, j);
            for (size_t k = 0; k < j; ++k) sum -= l.at(i, k) * l.at(j, k);
            if (i == j) {
                if (sum <= 0.0) throw InputError("GmmSpec: covariance not SPD");
                l.at(i, j) = std::sqrt(sum);
            } else {
                l.at(i, j) = sum / l.at(j, j);
            }
        }
    }
    return l;
}

double log_gaussian(const Mat& chol, std::span<const double> mean, std::span<const double> x) {
    const size_t n = mean.size();
    // Solve L y = (x - mean); quadratic form is ||y||^2.
    std::vector<double> y(n);
    double logdet = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double sum = x[i] - mean[i];
        for (size_t k = 0; k < i; ++k) sum -= chol.at(i, k) * y[k];
        y[i] = sum / chol.at(i, i);
        logdet += std::log(chol.at(i, i));
    }
    double quad = 0.0;
    for (double v : y) quad += v * v;
    return -0.5 * quad - logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
}

void validate_gmm(const GmmSpec& spec) {
    if (spec.k == 0 || spec.means.rows != spec.k || spec.covs.size() != spec.k ||
        spec.weights.size() != spec.k)
        throw InputError("GmmSpec: inconsistent component counts");
    double total = 0.0;
    for (double w : spec.weights) {
        if (w < 0.0) throw InputError("GmmSpec: negative weight");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InputError("GmmSpec: weights must sum to 1");
}

}  // namespace

double gmm_nll(const GmmSpec& spec, std::span<const double> x) {
    validate_gmm(spec);
    if (x.size() != spec.dim()) throw InputError("gmm_nll: dimension mismatch");
    // log-sum-exp over components
    std::vector<double> terms(spec.k);
    double max_term = -1e300;
    for (size_t c = 0; c < spec.k; ++c) {
        const Mat chol = cholesky(spec.covs[c]);
        terms[c] = std::log(spec.weights[c]) + log_gaussian(chol, spec.means.row_span(c), x);
        max_term = std::max(max_term, terms[c]);
    }
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - max_term);
    return -(max_term + std::log(sum));
}

Mat sample_gmm(const GmmSpec& spec, size_t n, uint64_t seed) {
    validate_gmm(spec);
    const size_t d = spec.dim();
    std::vector<Mat> chols;
    chols.reserve(spec.k);
    for (const auto& cov : spec.covs) chols.push_back(cholesky(cov));

    Rng rng(seed);
    Mat out(n, d);
    std::vector<double> z(d);
    for (size_t r = 0; r < n; ++r) {
        // pick a component by cumulative weight
        const double u = rng.uniform();
        size_t c = 0;
        double acc = 0.0;
        for (; c + 1 < spec.k; ++c) {
            acc += spec.weights[c];
            if (u < acc) break;
        }
        for (size_t j = 0; j < d; ++j) z[j] = rng.normal();
        for (size_t i = 0; i < d; ++i) {
            double v = spec.means.at(c, i);
            for (size_t k = 0; k <= i; ++k) v += chols[c].at(i, k) * z[k];
            out.at(r, i) = v;
        }
    }
    return out;
}

GmmProbe gen_gmm(const GmmSpec& spec, size_t n, uint64_t seed) {
    validate_gmm(spec);
    const size_t d = spec.dim();

    // Box covering every component mean +- 4 standard deviations (per axis).
    std::vector<double> lo(d, 1e300), hi(d, -1e300);
    for (size_t c = 0; c < spec.k; ++c)
        for (size_t j = 0; j < d; ++j) {
            const double sd = std::sqrt(spec.covs[c].at(j, j));
            lo[j] = std::min(lo[j], spec.means.at(c, j) - 4.0 * sd);
            hi[j] = std::max(hi[j], spec.means.at(c, j) + 4.0 * sd);
        }

    Rng rng(seed);
    GmmProbe probe;
    probe.points = Mat(n, d);
    probe.nll.resize(n);
    for (size_t r = 0; r < n; ++r) {
        for (size_t j = 0; j < d; ++j) probe.points.at(r, j) = rng.uniform(lo[j], hi[j]);
        probe.nll[r] = gmm_nll(spec, probe.points.row_span(r));
    }
    return probe;
}

EvalAnchors normalization_anchors(const NavEnv& env, size_t episodes, uint64_t seed) {
    if (episodes == 0) throw InputError("normalization_anchors: episodes must be >= 1");
    Rng rng(seed);
    double opt_total = 0.0, rand_total = 0.0;
    for (size_t e = 0; e < episodes; ++e) {
        const double s0 = rng.uniform(env.state_lo, env.state_hi);
        double s = s0, ret = 0.0;
        for (int t = 0; t < env.horizon; ++t) {
            const auto [sn, r] = nav_step(env, s, optimal_action(env, s));
            ret += r;
            s = sn;
        }
        opt_total += ret;
        s = s0;
        ret = 0.0;
        for (int t = 0; t < env.horizon; ++t) {
            const auto [sn, r] = nav_step(env, s, rng.uniform(env.action_lo, env.action_hi));
            ret += r;
            s = sn;
        }
        rand_total += ret;
    }
    EvalAnchors a;
    a.j_opt = opt_total / static_cast<double>(episodes);
    a.j_random = rand_total / static_cast<double>(episodes);
    return a;
}

double normalized_score(double mean_return, const EvalAnchors& anchors) {
    return 100.0 * (mean_return - anchors.j_random) / (anchors.j_opt - anchors.j_random);
}

}  // namespace doser
