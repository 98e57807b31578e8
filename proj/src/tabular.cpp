#include "doser/tabular.hpp"

#include <algorithm>
#include <cmath>

#include "doser/errors.hpp"

namespace doser {

void TabularMdp::validate() const {
    const size_t sa = n_states * n_actions;
    if (n_states == 0 || n_actions == 0) throw InputError("TabularMdp: empty state/action space");
    if (transition.size() != sa * n_states || reward.size() != sa || support.size() != sa ||
        labels.size() != sa)
        throw InputError("TabularMdp: tensor sizes inconsistent");
    if (gamma < 0.0 || gamma >= 1.0) throw InputError("TabularMdp: gamma must be in [0,1)");
    if (eta < 0.0 || eta > 1.0) throw InputError("TabularMdp: eta must be in [0,1]");
    if (delta_v < 0.0) throw InputError("TabularMdp: delta_v must be >= 0");
    for (size_t s = 0; s < n_states; ++s) {
        bool any = false;
        for (size_t a = 0; a < n_actions; ++a) any = any || support[s * n_actions + a];
        if (!any) throw InputError("TabularMdp: state with empty behavior support");
    }
    for (size_t sa_i = 0; sa_i < sa; ++sa_i) {
        double total = 0.0;
        for (size_t s2 = 0; s2 < n_states; ++s2) {
            const double p = transition[sa_i * n_states + s2];
            if (p < 0.0) throw InputError("TabularMdp: negative transition probability");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) throw InputError("TabularMdp: transition row must sum to 1");
        if (reward[sa_i] < r_min - 1e-12 || reward[sa_i] > r_max + 1e-12)
            throw InputError("TabularMdp: reward outside [r_min, r_max]");
    }
}

namespace {

/// Per-state mean of Q over supported actions.
void support_mean(const TabularMdp& mdp, const Mat& q, std::vector<double>& out) {
    out.assign(mdp.n_states, 0.0);
    for (size_t s = 0; s < mdp.n_states; ++s) {
        double total = 0.0;
        size_t count = 0;
        for (size_t a = 0; a < mdp.n_actions; ++a)
            if (mdp.support[s * mdp.n_actions + a]) {
                total += q.at(s, a);
                ++count;
            }
        out[s] = total / static_cast<double>(count);
    }
}

/// Per-state max of Q over supported actions.
void support_max(const TabularMdp& mdp, const Mat& q, std::vector<double>& out) {
    out.assign(mdp.n_states, 0.0);
    for (size_t s = 0; s < mdp.n_states; ++s) {
        double best = -1e300;
        for (size_t a = 0; a < mdp.n_actions; ++a)
            if (mdp.support[s * mdp.n_actions + a]) best = std::max(best, q.at(s, a));
        out[s] = best;
    }
}

void backup_in_sample(const TabularMdp& mdp, const Mat& q, const std::vector<double>& mean,
                      Mat& out) {
#pragma omp parallel for schedule(static)
    for (long s = 0; s < static_cast<long>(mdp.n_states); ++s) {
        for (size_t a = 0; a < mdp.n_actions; ++a) {
            const double* p = mdp.row(s, a);
            double exp_next = 0.0;
            for (size_t s2 = 0; s2 < mdp.n_states; ++s2) exp_next += p[s2] * mean[s2];
            out.at(s, a) = mdp.reward[s * mdp.n_actions + a] + mdp.gamma * exp_next;
        }
    }
    (void)q;
}

}  // namespace

Mat in_sample_op(const TabularMdp& mdp, const Mat& q) {
    if (q.rows != mdp.n_states || q.cols != mdp.n_actions)
        throw InputError("in_sample_op: Q shape mismatch");
    std::vector<double> mean;
    support_mean(mdp, q, mean);
    Mat out(mdp.n_states, mdp.n_actions);
    backup_in_sample(mdp, q, mean, out);
    return out;
}

Mat doser_op(const TabularMdp& mdp, const Mat& q, std::span<const OodLabel> labels) {
    if (q.rows != mdp.n_states || q.cols != mdp.n_actions)
        throw InputError("doser_op: Q shape mismatch");
    const OodLabel* lab = labels.empty() ? mdp.labels.data() : labels.data();
    if (!labels.empty() && labels.size() != mdp.n_states * mdp.n_actions)
        throw InputError("doser_op: label override size mismatch");

    std::vector<double> mean, best;
    support_mean(mdp, q, mean);
    support_max(mdp, q, best);

    Mat out(mdp.n_states, mdp.n_actions);
    backup_in_sample(mdp, q, mean, out);
    const double qmin = mdp.q_min();
    for (size_t s = 0; s < mdp.n_states; ++s)
        for (size_t a = 0; a < mdp.n_actions; ++a) {
            switch (lab[s * mdp.n_actions + a]) {
                case OodLabel::kId: break;
                case OodLabel::kDetrimental: out.at(s, a) = qmin; break;
                case OodLabel::kBeneficial:
                    out.at(s, a) = mdp.eta * (best[s] + mdp.delta_v);
                    break;
            }
        }
    return out;
}

namespace {

double sup_diff(const Mat& a, const Mat& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

}  // namespace

double check_contraction(const TabularMdp& mdp, size_t trials, Rng& rng) {
    if (trials < 1) throw InputError("check_contraction: trials must be >= 1");
    const double lo = mdp.q_min(), hi = mdp.q_max();
    Mat q1(mdp.n_states, mdp.n_actions), q2(mdp.n_states, mdp.n_actions);
    double worst = 0.0;
    for (size_t t = 0; t < trials; ++t) {
        for (size_t i = 0; i < q1.v.size(); ++i) {
            q1.v[i] = rng.uniform(lo, hi);
            q2.v[i] = rng.uniform(lo, hi);
        }
        const double denom = sup_diff(q1, q2);
        if (denom == 0.0) continue;
        const Mat t1 = doser_op(mdp, q1);
        const Mat t2 = doser_op(mdp, q2);
        worst = std::max(worst, sup_diff(t1, t2) / denom);
    }
    return worst;
}

namespace {

/// Stop once the contraction bound puts the iterate within tol of the true
/// fixed point: residual * gamma / (1 - gamma) < tol. This implies the
/// residual itself is below tol.
double stop_residual(double tol, double gamma) {
    return gamma > 0.0 ? tol * std::min(1.0, (1.0 - gamma) / gamma) : tol;
}

}  // namespace

Mat fixed_point(const TabularMdp& mdp, double tol, size_t max_iter, const Mat* q0,
                std::span<const OodLabel> labels) {
    if (tol <= 0.0) throw InputError("fixed_point: tol must be positive");
    const double stop = stop_residual(tol, mdp.gamma);
    Mat q = q0 ? *q0 : Mat(mdp.n_states, mdp.n_actions, 0.0);
    for (size_t it = 0; it < max_iter; ++it) {
        Mat next = doser_op(mdp, q, labels);
        const double res = sup_diff(next, q);
        q = std::move(next);
        if (res < stop) return q;
    }
    throw NumericError("fixed_point: iteration cap exceeded");
}

Mat in_sample_fixed_point(const TabularMdp& mdp, double tol, size_t max_iter) {
    if (tol <= 0.0) throw InputError("in_sample_fixed_point: tol must be positive");
    const double stop = stop_residual(tol, mdp.gamma);
    Mat q(mdp.n_states, mdp.n_actions, 0.0);
    for (size_t it = 0; it < max_iter; ++it) {
        Mat next = in_sample_op(mdp, q);
        const double res = sup_diff(next, q);
        q = std::move(next);
        if (res < stop) return q;
    }
    throw NumericError("in_sample_fixed_point: iteration cap exceeded");
}

DeviationTable deviation_experiment(const TabularMdp& mdp, std::span<const double> eps_dyn_grid,
                                    std::span<const double> eps_det_grid, size_t trials, Rng& rng) {
    if (eps_dyn_grid.empty() || eps_det_grid.empty())
        throw InputError("deviation_experiment: grids must be nonempty");

    const Mat q_ref = fixed_point(mdp, 1e-10);
    const size_t sa = mdp.n_states * mdp.n_actions;

    DeviationTable table;
    table.eps_dyn.assign(eps_dyn_grid.begin(), eps_dyn_grid.end());
    table.eps_det.assign(eps_det_grid.begin(), eps_det_grid.end());
    table.mean_deviation = Mat(eps_dyn_grid.size(), eps_det_grid.size());

    std::vector<double> mix_row(mdp.n_states);
    std::vector<OodLabel> labels(sa);
    for (size_t di = 0; di < eps_dyn_grid.size(); ++di) {
        for (size_t ei = 0; ei < eps_det_grid.size(); ++ei) {
            const double eps_dyn = eps_dyn_grid[di];
            const double eps_det = eps_det_grid[ei];
            double total = 0.0;
            for (size_t t = 0; t < trials; ++t) {
                TabularMdp hat = mdp;
                if (eps_dyn > 0.0) {
                    for (size_t i = 0; i < sa; ++i) {
                        // Random target row, normalized; mix weight chosen so
                        // the L1 shift is min(eps_dyn, ||u - p||_1).
                        double norm = 0.0;
                        for (size_t s2 = 0; s2 < mdp.n_states; ++s2) {
                            mix_row[s2] = rng.open_uniform();
                            norm += mix_row[s2];
                        }
                        double l1 = 0.0;
                        double* p = hat.transition.data() + i * mdp.n_states;
                        for (size_t s2 = 0; s2 < mdp.n_states; ++s2) {
                            mix_row[s2] /= norm;
                            l1 += std::abs(mix_row[s2] - p[s2]);
                        }
                        const double w = l1 > 0.0 ? std::min(1.0, eps_dyn / l1) : 0.0;
                        for (size_t s2 = 0; s2 < mdp.n_states; ++s2)
                            p[s2] = (1.0 - w) * p[s2] + w * mix_row[s2];
                    }
                }
                std::copy(mdp.labels.begin(), mdp.labels.end(), labels.begin());
                if (eps_det > 0.0) {
                    for (size_t i = 0; i < sa; ++i) {
                        if (rng.uniform() >= eps_det) continue;
                        // Misclassify: replace with one of the two other classes.
                        const OodLabel truth = mdp.labels[i];
                        const int pick = static_cast<int>(rng.index(2));
                        switch (truth) {
                            case OodLabel::kId:
                                labels[i] = pick ? OodLabel::kBeneficial : OodLabel::kDetrimental;
                                break;
                            case OodLabel::kBeneficial:
                                labels[i] = pick ? OodLabel::kId : OodLabel::kDetrimental;
                                break;
                            case OodLabel::kDetrimental:
                                labels[i] = pick ? OodLabel::kId : OodLabel::kBeneficial;
                                break;
                        }
                    }
                }
                const Mat q_hat = fixed_point(hat, 1e-10, 100000, nullptr, labels);
                total += sup_diff(q_hat, q_ref);
            }
            table.mean_deviation.at(di, ei) = total / static_cast<double>(trials);
        }
    }
    return table;
}

TabularMdp random_mdp(size_t n_states, size_t n_actions, const RandomMdpConfig& cfg, Rng& rng) {
    if (n_states == 0 || n_actions == 0) throw InputError("random_mdp: empty space");
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = cfg.gamma;
    mdp.eta = cfg.eta;
    mdp.delta_v = cfg.delta_v;
    mdp.r_min = cfg.reward_lo;
    mdp.r_max = cfg.reward_hi;
    const size_t sa = n_states * n_actions;
    mdp.transition.resize(sa * n_states);
    mdp.reward.resize(sa);
    mdp.support.assign(sa, 0);
    mdp.labels.assign(sa, OodLabel::kId);

    for (size_t i = 0; i < sa; ++i) {
        double norm = 0.0;
        double* p = mdp.transition.data() + i * n_states;
        for (size_t s2 = 0; s2 < n_states; ++s2) {
            p[s2] = rng.open_uniform();
            norm += p[s2];
        }
        for (size_t s2 = 0; s2 < n_states; ++s2) p[s2] /= norm;
        mdp.reward[i] = rng.uniform(cfg.reward_lo, cfg.reward_hi);
    }
    for (size_t s = 0; s < n_states; ++s) {
        bool any = false;
        for (size_t a = 0; a < n_actions; ++a) {
            const bool in = rng.uniform() < cfg.support_frac;
            mdp.support[s * n_actions + a] = in;
            any = any || in;
        }
        if (!any) mdp.support[s * n_actions + rng.index(n_actions)] = 1;
        for (size_t a = 0; a < n_actions; ++a) {
            const size_t i = s * n_actions + a;
            if (mdp.support[i])
                mdp.labels[i] = OodLabel::kId;
            else
                mdp.labels[i] = rng.uniform() < cfg.beneficial_frac ? OodLabel::kBeneficial
                                                                    : OodLabel::kDetrimental;
        }
    }
    mdp.validate();
    return mdp;
}

}  // namespace doser
