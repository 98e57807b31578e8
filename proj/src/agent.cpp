#include "doser/agent.hpp"

#include <algorithm>
#include <cmath>

#include "doser/errors.hpp"

namespace doser {

double AgentState::alpha() const { return std::exp(log_alpha); }

double expectile_loss(double u, double tau) {
    if (tau <= 0.0 || tau >= 1.0) throw InputError("expectile_loss: tau must be in (0,1)");
    const double w = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
    return w * u * u;
}

namespace {

std::vector<size_t> hidden_dims(const AgentConfig& cfg) {
    return std::vector<size_t>(cfg.hidden_layers, cfg.hidden);
}

Mlp make_net(std::vector<size_t> dims, Rng rng) {
    Mlp net = Mlp::make(std::move(dims), Activation::kRelu, Activation::kIdentity);
    net.init_glorot(rng);
    return net;
}

std::vector<size_t> net_dims(size_t in, const AgentConfig& cfg, size_t out) {
    std::vector<size_t> dims;
    dims.push_back(in);
    for (size_t h : hidden_dims(cfg)) dims.push_back(h);
    dims.push_back(out);
    return dims;
}

}  // namespace

AgentState make_agent(size_t state_dim, size_t action_dim, AgentConfig cfg, uint64_t seed) {
    if (cfg.q_ensemble < 1) throw InputError("make_agent: q_ensemble must be >= 1");
    if (cfg.gamma < 0.0 || cfg.gamma >= 1.0) throw InputError("make_agent: gamma must be in [0,1)");
    if (cfg.eta < 0.0 || cfg.eta > 1.0) throw InputError("make_agent: eta must be in [0,1]");
    if (cfg.target_entropy == 0.0) cfg.target_entropy = -static_cast<double>(action_dim);

    AgentState a;
    a.cfg = cfg;
    a.state_dim = state_dim;
    a.action_dim = action_dim;

    const Rng base(seed);
    for (size_t k = 0; k < cfg.q_ensemble; ++k)
        a.q_nets.push_back(make_net(net_dims(state_dim + action_dim, cfg, 1), base.split(k)));
    a.q_targets = a.q_nets;
    a.v_net = make_net(net_dims(state_dim, cfg, 1), base.split(100));
    a.v_target = a.v_net;
    a.actor = make_net(net_dims(state_dim, cfg, 2 * action_dim), base.split(200));
    a.actor_target = a.actor;

    const size_t actor_steps = std::max<size_t>(1, cfg.total_steps / std::max<size_t>(1, cfg.policy_update_freq));
    for (auto& q : a.q_nets)
        a.q_opts.push_back(AdamState::make(q.weight_count(), cfg.lr, std::max<size_t>(1, cfg.total_steps)));
    a.v_opt = AdamState::make(a.v_net.weight_count(), cfg.lr, std::max<size_t>(1, cfg.total_steps));
    a.actor_opt = AdamState::make(a.actor.weight_count(), cfg.lr, actor_steps);
    a.alpha_opt = AdamState::make(1, cfg.lr, actor_steps);
    a.log_alpha = std::log(0.2);
    return a;
}

TransitionBatch sample_transition_batch(const Dataset& data, size_t batch, Rng& rng) {
    if (data.rows() == 0) throw InputError("sample_transition_batch: empty dataset");
    const size_t sd = data.state_dim, ad = data.action_dim;
    TransitionBatch b;
    b.s.resize(batch, sd);
    b.a.resize(batch, ad);
    b.s_next.resize(batch, sd);
    b.r.resize(batch);
    b.done.resize(batch);
    for (size_t i = 0; i < batch; ++i) {
        const size_t idx = rng.index(data.rows());
        for (size_t j = 0; j < sd; ++j) {
            b.s.at(i, j) = data.s[idx * sd + j];
            b.s_next.at(i, j) = data.s_next[idx * sd + j];
        }
        for (size_t j = 0; j < ad; ++j) b.a.at(i, j) = data.a[idx * ad + j];
        b.r[i] = data.r[idx];
        b.done[i] = data.done[idx];
    }
    return b;
}

namespace {

/// Sampled tanh-Gaussian head: everything the actor loss needs.
struct PolicySample {
    Mat head;    // raw actor output (B x 2*ad)
    Mat eps;     // standard normal draws
    Mat t;       // tanh(mu + sigma*eps)
    Mat action;  // center + scale * t
    Mat sigma;   // exp(clamped logstd)
    Mat in_range;  // 1 if logstd was inside the clamp range
    std::vector<double> logp;
};

PolicySample sample_policy(const AgentState& agent, const Mlp& actor, const Mat& states, Rng& rng,
                           MlpWorkspace& ws) {
    const size_t B = states.rows, ad = agent.action_dim;
    const double scale = agent.action_scale(), center = agent.action_center();
    PolicySample p;
    const Mat& out = mlp_forward(actor, states, false, nullptr, ws);
    p.head = out;
    p.eps.resize(B, ad);
    p.t.resize(B, ad);
    p.action.resize(B, ad);
    p.sigma.resize(B, ad);
    p.in_range.resize(B, ad);
    p.logp.assign(B, 0.0);
    constexpr double kHalfLog2Pi = 0.9189385332046727;  // ln(2*pi)/2
    for (size_t i = 0; i < B; ++i) {
        double lp = 0.0;
        for (size_t j = 0; j < ad; ++j) {
            const double mu = out.at(i, j);
            const double raw = out.at(i, ad + j);
            const double logstd = std::clamp(raw, agent.cfg.logstd_min, agent.cfg.logstd_max);
            p.in_range.at(i, j) = (raw > agent.cfg.logstd_min && raw < agent.cfg.logstd_max) ? 1.0 : 0.0;
            const double sigma = std::exp(logstd);
            const double e = rng.normal();
            const double z = mu + sigma * e;
            const double t = std::tanh(z);
            p.eps.at(i, j) = e;
            p.sigma.at(i, j) = sigma;
            p.t.at(i, j) = t;
            p.action.at(i, j) = center + scale * t;
            // log N(z; mu, sigma) - log|da/dz|, with the squash Jacobian
            // written as 2*(ln2 - z - softplus(-2z)) for stability.
            const double log_jac =
                std::log(scale) + 2.0 * (std::log(2.0) - z - (std::log1p(std::exp(-std::abs(2.0 * z))) + std::max(-2.0 * z, 0.0)));
            lp += -kHalfLog2Pi - logstd - 0.5 * e * e - log_jac;
        }
        p.logp[i] = lp;
    }
    return p;
}

Mat concat_cols(const Mat& a, const Mat& b) {
    Mat out(a.rows, a.cols + b.cols);
    for (size_t i = 0; i < a.rows; ++i) {
        std::copy(a.row(i), a.row(i) + a.cols, out.row(i));
        std::copy(b.row(i), b.row(i) + b.cols, out.row(i) + a.cols);
    }
    return out;
}

/// Minimum over the target-Q ensemble, one value per row of x.
std::vector<double> min_q(const std::vector<Mlp>& nets, const Mat& x, MlpWorkspace& ws) {
    std::vector<double> best;
    for (size_t k = 0; k < nets.size(); ++k) {
        const Mat& out = mlp_forward(nets[k], x, false, nullptr, ws);
        if (k == 0) {
            best.assign(out.v.begin(), out.v.end());
        } else {
            for (size_t i = 0; i < best.size(); ++i) best[i] = std::min(best[i], out.v[i]);
        }
    }
    return best;
}

struct BestIdBatch {
    Mat actions;               // rows x ad
    std::vector<double> q;     // min-ensemble target Q of the winner
};

/// Best in-distribution action for each row of `states`: n behavior draws
/// per state scored by the target-Q minimum.
BestIdBatch best_id_batch(const AgentState& agent, const DenoiserModel& behavior,
                          const Mat& states, size_t n, Rng& rng) {
    const size_t B = states.rows, sd = states.cols, ad = agent.action_dim;
    Mat cond(B * n, sd);
    for (size_t i = 0; i < B; ++i)
        for (size_t c = 0; c < n; ++c)
            std::copy(states.row(i), states.row(i) + sd, cond.row(i * n + c));
    const Mat cands = sample_denoiser(behavior, cond, B * n, agent.cfg.sampler_steps, rng,
                                      agent.cfg.action_lo, agent.cfg.action_hi);
    const Mat x = concat_cols(cond, cands);
    MlpWorkspace ws;
    const std::vector<double> q = min_q(agent.q_targets, x, ws);

    BestIdBatch out;
    out.actions.resize(B, ad);
    out.q.assign(B, 0.0);
    for (size_t i = 0; i < B; ++i) {
        size_t best = 0;
        for (size_t c = 1; c < n; ++c)
            if (q[i * n + c] > q[i * n + best]) best = c;  // strict: ties keep lowest index
        std::copy(cands.row(i * n + best), cands.row(i * n + best) + ad, out.actions.row(i));
        out.q[i] = q[i * n + best];
    }
    return out;
}

struct ClassifyBatchResult {
    std::vector<OodClass> cls;
    std::vector<double> delta_v;       // per row, beneficial rows only
    std::vector<double> bonus_target;  // per row, beneficial rows only
};

void require_context(const AgentState& agent, const ClassifyContext& ctx) {
    if (ctx.thresholds == nullptr || !ctx.thresholds->calibrated())
        throw StateError("classify: OOD thresholds missing or uncalibrated");
    if (ctx.behavior == nullptr || ctx.state_model == nullptr || ctx.dynamics == nullptr)
        throw StateError("classify: behavior/state/dynamics models required");
    if (agent.cfg.gating && (ctx.gate == nullptr || !ctx.gate->calibrated()))
        throw StateError("classify: gating enabled but ensemble gate not calibrated");
}

ClassifyBatchResult classify_batch(const AgentState& agent, const ClassifyContext& ctx,
                                   const Mat& states, const Mat& actions, Rng& rng) {
    require_context(agent, ctx);
    const size_t B = states.rows;
    ClassifyBatchResult res;
    res.cls.assign(B, OodClass::kInDistribution);
    res.delta_v.assign(B, 0.0);
    res.bonus_target.assign(B, 0.0);

    const std::vector<double> err_a =
        recon_errors(*ctx.behavior, actions, states, agent.cfg.m_draws, rng.next_u64());

    std::vector<size_t> ood_rows;
    for (size_t i = 0; i < B; ++i)
        if (is_ood_action(*ctx.thresholds, err_a[i])) ood_rows.push_back(i);

    if (ood_rows.empty()) return res;
    if (agent.cfg.ablation == AblationMode::kNoAcVc) {
        // Uniform penalty: no classification beyond the action detector.
        for (size_t i : ood_rows) res.cls[i] = OodClass::kDetrimental;
        return res;
    }

    // Predicted next states for OOD policy actions.
    Mat s_ood = gather_rows(states, ood_rows);
    Mat a_ood = gather_rows(actions, ood_rows);
    Mat s_pi;
    std::vector<double> r_hat;
    MlpWorkspace ws;
    predict_batch(*ctx.dynamics, s_ood, a_ood, s_pi, r_hat, ws);

    const std::vector<double> err_s =
        recon_errors(*ctx.state_model, s_pi, Mat(), agent.cfg.m_draws, rng.next_u64());

    std::vector<size_t> live;  // positions into ood_rows that passed the state test
    for (size_t p = 0; p < ood_rows.size(); ++p) {
        if (is_ood_state(*ctx.thresholds, err_s[p])) {
            res.cls[ood_rows[p]] = OodClass::kDetrimental;
        } else {
            live.push_back(p);
        }
    }

    if (agent.cfg.gating && !live.empty()) {
        std::vector<size_t> kept;
        for (size_t p : live) {
            const size_t i = ood_rows[p];
            if (ensemble_gate(*ctx.gate, states.row_span(i), actions.row_span(i)) ==
                GateDecision::kUncertain)
                res.cls[i] = OodClass::kDetrimental;
            else
                kept.push_back(p);
        }
        live = std::move(kept);
    }

    if (live.empty()) return res;

    // Value comparison against the best in-distribution action.
    std::vector<size_t> live_rows;
    for (size_t p : live) live_rows.push_back(ood_rows[p]);
    Mat s_live = gather_rows(states, live_rows);
    const BestIdBatch best = best_id_batch(agent, *ctx.behavior, s_live, agent.cfg.n_candidates, rng);

    Mat s_id;
    predict_batch(*ctx.dynamics, s_live, best.actions, s_id, r_hat, ws);

    std::vector<size_t> live_positions(live.begin(), live.end());
    Mat s_pi_live(live.size(), s_pi.cols);
    for (size_t k = 0; k < live.size(); ++k)
        std::copy(s_pi.row(live_positions[k]), s_pi.row(live_positions[k]) + s_pi.cols,
                  s_pi_live.row(k));

    MlpWorkspace vws;
    const Mat& v_pi_m = mlp_forward(agent.v_net, s_pi_live, false, nullptr, vws);
    std::vector<double> v_pi(v_pi_m.v.begin(), v_pi_m.v.end());
    const Mat& v_id_m = mlp_forward(agent.v_net, s_id, false, nullptr, vws);
    std::vector<double> v_id(v_id_m.v.begin(), v_id_m.v.end());

    for (size_t k = 0; k < live.size(); ++k) {
        const size_t i = live_rows[k];
        const double dv = v_pi[k] - v_id[k];
        if (dv >= 0.0) {
            res.cls[i] = OodClass::kBeneficial;
            res.delta_v[i] = dv;
            res.bonus_target[i] = agent.cfg.eta * (best.q[k] + dv);
        } else {
            res.cls[i] = OodClass::kDetrimental;
        }
    }
    return res;
}

}  // namespace

BestIdResult best_id_action(const AgentState& agent, const DenoiserModel& behavior,
                            std::span<const double> state, size_t n, Rng& rng) {
    if (n < 1) throw InputError("best_id_action: n must be >= 1");
    Mat s(1, state.size());
    std::copy(state.begin(), state.end(), s.row(0));
    const BestIdBatch b = best_id_batch(agent, behavior, s, n, rng);
    BestIdResult r;
    r.action.assign(b.actions.row(0), b.actions.row(0) + agent.action_dim);
    r.q_value = b.q[0];
    return r;
}

ClassifyResult classify_action(AgentState& agent, const ClassifyContext& ctx,
                               std::span<const double> state, std::span<const double> action,
                               Rng& rng) {
    Mat s(1, state.size()), a(1, action.size());
    std::copy(state.begin(), state.end(), s.row(0));
    std::copy(action.begin(), action.end(), a.row(0));
    const ClassifyBatchResult res = classify_batch(agent, ctx, s, a, rng);
    ClassifyResult out;
    out.cls = res.cls[0];
    out.delta_v = res.delta_v[0];
    out.bonus_target = res.bonus_target[0];
    return out;
}

double value_update(AgentState& agent, const TransitionBatch& batch, Rng& rng) {
    (void)rng;
    const size_t B = batch.s.rows;
    MlpWorkspace ws, tws;
    const Mat& v = mlp_forward(agent.v_net, batch.s, false, nullptr, ws);
    const Mat& vt = mlp_forward(agent.v_target, batch.s_next, false, nullptr, tws);

    Mat upstream(B, 1);
    double loss = 0.0;
    const double tau = agent.cfg.expectile;
    for (size_t i = 0; i < B; ++i) {
        const double not_done = agent.cfg.bootstrap_through_done ? 1.0 : 1.0 - batch.done[i];
        const double target = batch.r[i] + agent.cfg.gamma * not_done * vt.at(i, 0);
        const double u = target - v.at(i, 0);
        const double w = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
        loss += w * u * u;
        upstream.at(i, 0) = -2.0 * w * u / static_cast<double>(B);
    }
    loss /= static_cast<double>(B);
    if (!std::isfinite(loss)) throw TrainingError("value_update: non-finite loss", agent.step);

    mlp_backward(agent.v_net, batch.s, upstream, ws);
    adam_step(agent.v_opt, agent.v_net.weights, ws.grad);
    return loss;
}

CriticLosses critic_update(AgentState& agent, const TransitionBatch& batch,
                           const ClassifyContext& ctx, Rng& rng) {
    require_context(agent, ctx);
    const size_t B = batch.s.rows;
    const double Bd = static_cast<double>(B);

    // Bellman targets.
    std::vector<double> y(B);
    {
        std::vector<double> next_value(B);
        if (agent.cfg.bellman_target == BellmanTarget::kBehaviorSample) {
            const Mat a_next = sample_denoiser(*ctx.behavior, batch.s_next, B,
                                               agent.cfg.sampler_steps, rng, agent.cfg.action_lo,
                                               agent.cfg.action_hi);
            const Mat x = concat_cols(batch.s_next, a_next);
            MlpWorkspace ws;
            next_value = min_q(agent.q_targets, x, ws);
        } else {
            MlpWorkspace ws;
            const Mat& vt = mlp_forward(agent.v_target, batch.s_next, false, nullptr, ws);
            next_value.assign(vt.v.begin(), vt.v.end());
        }
        for (size_t i = 0; i < B; ++i) {
            const double not_done = agent.cfg.bootstrap_through_done ? 1.0 : 1.0 - batch.done[i];
            y[i] = batch.r[i] + agent.cfg.gamma * not_done * next_value[i];
        }
    }

    // Policy actions and their classification.
    MlpWorkspace actor_ws;
    const PolicySample pol = sample_policy(agent, agent.actor, batch.s, rng, actor_ws);
    const ClassifyBatchResult cls = classify_batch(agent, ctx, batch.s, pol.action, rng);

    CriticLosses losses;
    size_t n_id = 0, n_ben = 0, n_det = 0;
    for (size_t i = 0; i < B; ++i) {
        switch (cls.cls[i]) {
            case OodClass::kInDistribution: ++n_id; break;
            case OodClass::kBeneficial: ++n_ben; break;
            case OodClass::kDetrimental: ++n_det; break;
        }
    }
    losses.frac_id = static_cast<double>(n_id) / Bd;
    losses.frac_beneficial = static_cast<double>(n_ben) / Bd;
    losses.frac_detrimental = static_cast<double>(n_det) / Bd;

    const Mat x_data = concat_cols(batch.s, batch.a);
    const Mat x_pi = concat_cols(batch.s, pol.action);
    const bool use_bonus = agent.cfg.ablation == AblationMode::kFull;

    Mat up_data(B, 1), up_pi(B, 1);
    MlpWorkspace ws_data, ws_pi;
    std::vector<double> grads;
    for (size_t k = 0; k < agent.q_nets.size(); ++k) {
        Mlp& q = agent.q_nets[k];
        const Mat& q_data = mlp_forward(q, x_data, false, nullptr, ws_data);
        double bell = 0.0;
        for (size_t i = 0; i < B; ++i) {
            const double diff = q_data.at(i, 0) - y[i];
            bell += diff * diff;
            up_data.at(i, 0) = 2.0 * diff / Bd;
        }
        losses.bellman += bell / Bd;

        const Mat& q_pi = mlp_forward(q, x_pi, false, nullptr, ws_pi);
        double pen = 0.0, bon = 0.0;
        for (size_t i = 0; i < B; ++i) {
            double up = 0.0;
            if (cls.cls[i] == OodClass::kDetrimental) {
                const double diff = q_pi.at(i, 0) - agent.cfg.q_min;
                pen += diff * diff;
                up = 2.0 * agent.cfg.beta * diff / Bd;
            } else if (cls.cls[i] == OodClass::kBeneficial && use_bonus) {
                const double diff = q_pi.at(i, 0) - cls.bonus_target[i];
                bon += diff * diff;
                up = 2.0 * agent.cfg.lambda * diff / Bd;
            }
            up_pi.at(i, 0) = up;
        }
        losses.penalty += agent.cfg.beta * pen / Bd;
        losses.bonus += agent.cfg.lambda * bon / Bd;

        mlp_backward(q, x_data, up_data, ws_data);
        grads = ws_data.grad;
        mlp_backward(q, x_pi, up_pi, ws_pi);
        for (size_t i = 0; i < grads.size(); ++i) grads[i] += ws_pi.grad[i];
        adam_step(agent.q_opts[k], q.weights, grads);
    }
    const double nets = static_cast<double>(agent.q_nets.size());
    losses.bellman /= nets;
    losses.penalty /= nets;
    losses.bonus /= nets;
    if (!std::isfinite(losses.bellman + losses.penalty + losses.bonus))
        throw TrainingError("critic_update: non-finite loss", agent.step);
    return losses;
}

ActorLosses actor_update(AgentState& agent, const Mat& states, Rng& rng) {
    const size_t B = states.rows, ad = agent.action_dim;
    const double Bd = static_cast<double>(B);
    const double scale = agent.action_scale();

    MlpWorkspace actor_ws;
    const PolicySample pol = sample_policy(agent, agent.actor, states, rng, actor_ws);
    const double alpha = agent.alpha();

    // Min-ensemble Q over the sampled actions, with dQ/da for the argmin net.
    const Mat x = concat_cols(states, pol.action);
    std::vector<Mat> q_vals(agent.q_nets.size());
    {
        MlpWorkspace qws;
        for (size_t k = 0; k < agent.q_nets.size(); ++k)
            q_vals[k] = mlp_forward(agent.q_nets[k], x, false, nullptr, qws);
    }
    std::vector<size_t> argmin(B, 0);
    std::vector<double> min_val(B);
    for (size_t i = 0; i < B; ++i) {
        size_t best = 0;
        for (size_t k = 1; k < agent.q_nets.size(); ++k)
            if (q_vals[k].at(i, 0) < q_vals[best].at(i, 0)) best = k;
        argmin[i] = best;
        min_val[i] = q_vals[best].at(i, 0);
    }
    Mat dq_da(B, ad);
    {
        Mat upstream(B, 1);
        MlpWorkspace qws;
        for (size_t k = 0; k < agent.q_nets.size(); ++k) {
            bool any = false;
            for (size_t i = 0; i < B; ++i) {
                upstream.at(i, 0) = argmin[i] == k ? 1.0 : 0.0;
                any = any || argmin[i] == k;
            }
            if (!any) continue;
            mlp_forward(agent.q_nets[k], x, false, nullptr, qws);
            mlp_backward(agent.q_nets[k], x, upstream, qws, /*want_input_grad=*/true);
            for (size_t i = 0; i < B; ++i)
                if (argmin[i] == k)
                    for (size_t j = 0; j < ad; ++j)
                        dq_da.at(i, j) = qws.input_grad.at(i, agent.state_dim + j);
        }
    }

    // Gradients onto the actor head (mu, logstd).
    Mat upstream(B, 2 * ad);
    double actor_loss = 0.0, mean_neg_logp = 0.0;
    for (size_t i = 0; i < B; ++i) {
        actor_loss += alpha * pol.logp[i] - min_val[i];
        mean_neg_logp += -pol.logp[i];
        for (size_t j = 0; j < ad; ++j) {
            const double t = pol.t.at(i, j);
            const double dadz = scale * (1.0 - t * t);
            const double se = pol.sigma.at(i, j) * pol.eps.at(i, j);
            const double dlogp_dmu = 2.0 * t;
            const double dlogp_dlogstd = -1.0 + 2.0 * t * se;
            upstream.at(i, j) = (alpha * dlogp_dmu - dq_da.at(i, j) * dadz) / Bd;
            upstream.at(i, ad + j) = pol.in_range.at(i, j) *
                                     (alpha * dlogp_dlogstd - dq_da.at(i, j) * dadz * se) / Bd;
        }
    }
    actor_loss /= Bd;
    mean_neg_logp /= Bd;
    if (!std::isfinite(actor_loss)) throw TrainingError("actor_update: non-finite loss", agent.step);

    mlp_backward(agent.actor, states, upstream, actor_ws);
    adam_step(agent.actor_opt, agent.actor.weights, actor_ws.grad);

    // Temperature step on log(alpha): d/dlog_alpha of alpha*(-logp - target_H).
    const double dalpha = alpha * (mean_neg_logp - agent.cfg.target_entropy);
    double grad = dalpha;
    std::span<double> la(&agent.log_alpha, 1);
    adam_step(agent.alpha_opt, la, std::span<const double>(&grad, 1));

    ActorLosses out;
    out.actor_loss = actor_loss;
    out.alpha = agent.alpha();
    out.mean_entropy = mean_neg_logp;
    return out;
}

void soft_update(AgentState& agent, double rho) {
    if (rho <= 0.0 || rho > 1.0) throw InputError("soft_update: rho must be in (0,1]");
    // Delta form keeps src == dst an exact fixed point; rho == 1 is an exact
    // copy.
    const auto blend = [rho](const Mlp& src, Mlp& dst) {
        if (rho == 1.0) {
            dst.weights = src.weights;
            return;
        }
        for (size_t i = 0; i < src.weights.size(); ++i)
            dst.weights[i] += rho * (src.weights[i] - dst.weights[i]);
    };
    for (size_t k = 0; k < agent.q_nets.size(); ++k) blend(agent.q_nets[k], agent.q_targets[k]);
    blend(agent.v_net, agent.v_target);
    blend(agent.actor, agent.actor_target);
}

TrainLog train(AgentState& agent, const Dataset& data, const ClassifyContext& ctx, Rng& rng,
               const std::optional<EvalSetup>& eval) {
    require_context(agent, ctx);
    TrainLog log;
    if (agent.cfg.total_steps == 0) return log;

    MetricsRow acc;
    size_t acc_count = 0;
    double last_actor_loss = 0.0, last_alpha = agent.alpha();

    for (size_t step = 0; step < agent.cfg.total_steps; ++step) {
        TransitionBatch batch = sample_transition_batch(data, agent.cfg.batch, rng);
        const double v_loss = value_update(agent, batch, rng);
        const CriticLosses c = critic_update(agent, batch, ctx, rng);
        if ((step + 1) % agent.cfg.policy_update_freq == 0) {
            const ActorLosses a = actor_update(agent, batch.s, rng);
            last_actor_loss = a.actor_loss;
            last_alpha = a.alpha;
        }
        if ((step + 1) % agent.cfg.target_update_freq == 0) soft_update(agent, agent.cfg.rho);
        agent.step += 1;

        acc.v_loss += v_loss;
        acc.bellman += c.bellman;
        acc.penalty += c.penalty;
        acc.bonus += c.bonus;
        acc.frac_id += c.frac_id;
        acc.frac_beneficial += c.frac_beneficial;
        acc.frac_detrimental += c.frac_detrimental;
        ++acc_count;

        const bool last = step + 1 == agent.cfg.total_steps;
        if ((step + 1) % agent.cfg.log_interval == 0 || last) {
            MetricsRow row;
            const double n = static_cast<double>(acc_count);
            row.step = agent.step;
            row.v_loss = acc.v_loss / n;
            row.bellman = acc.bellman / n;
            row.penalty = acc.penalty / n;
            row.bonus = acc.bonus / n;
            row.actor_loss = last_actor_loss;
            row.alpha = last_alpha;
            row.frac_id = acc.frac_id / n;
            row.frac_beneficial = acc.frac_beneficial / n;
            row.frac_detrimental = acc.frac_detrimental / n;
            if (eval && eval->interval > 0 && ((step + 1) % eval->interval == 0 || last)) {
                const EvalResult er =
                    evaluate(agent, eval->env, eval->episodes, eval->seed, eval->anchors);
                row.eval_score = er.normalized;
            }
            log.rows.push_back(row);
            acc = MetricsRow{};
            acc_count = 0;
        }
    }
    return log;
}

EvalResult evaluate(const AgentState& agent, const NavEnv& env, size_t episodes, uint64_t seed,
                    const EvalAnchors& anchors) {
    const Rng base(seed);
    MlpWorkspace ws;
    Mat s_in(1, agent.state_dim);
    double total = 0.0;
    for (size_t e = 0; e < episodes; ++e) {
        Rng rng = base.split(e);
        double s = rng.uniform(env.state_lo, env.state_hi);
        double ret = 0.0;
        for (int t = 0; t < env.horizon; ++t) {
            s_in.at(0, 0) = s;
            const Mat& head = mlp_forward(agent.actor, s_in, false, nullptr, ws);
            const double a =
                agent.action_center() + agent.action_scale() * std::tanh(head.at(0, 0));
            const auto [sn, r] = nav_step(env, s, a);
            ret += r;
            s = sn;
        }
        total += ret;
    }
    EvalResult res;
    res.mean_return = total / static_cast<double>(episodes);
    res.normalized = normalized_score(res.mean_return, anchors);
    return res;
}

}  // namespace doser
