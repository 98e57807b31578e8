#pragma once

#include <optional>

#include "doser/adam.hpp"
#include "doser/diffusion.hpp"
#include "doser/dynamics.hpp"
#include "doser/mat.hpp"
#include "doser/mlp.hpp"
#include "doser/ood_detect.hpp"
#include "doser/toyworld.hpp"

namespace doser {

enum class BellmanTarget { kBehaviorSample, kVNet };
enum class AblationMode { kFull, kNoVc, kNoAcVc };
enum class OodClass { kInDistribution, kBeneficial, kDetrimental };

struct AgentConfig {
    double gamma = 0.99;
    double rho = 0.005;            // target update rate
    double beta = 0.001;           // detrimental penalty coefficient
    double lambda = 0.001;         // beneficial compensation coefficient
    double eta = 0.9;              // compensation target weight
    double expectile = 0.9;        // V-network expectile
    double q_min = -1000.0;        // R_min / (1 - gamma)
    size_t n_candidates = 10;      // behavior samples for the best-ID search
    size_t policy_update_freq = 2;
    size_t target_update_freq = 2;
    double lr = 3e-4;
    size_t batch = 256;
    size_t total_steps = 6000;
    size_t q_ensemble = 2;
    BellmanTarget bellman_target = BellmanTarget::kBehaviorSample;
    AblationMode ablation = AblationMode::kFull;
    size_t sampler_steps = 8;      // Heun steps for in-loop behavior draws
    size_t m_draws = 10;           // draws per reconstruction-error score
    bool gating = false;           // ensemble-guided uncertainty gate
    bool bootstrap_through_done = false;  // treat horizon ends as non-terminal
    double target_entropy = 0.0;   // 0 -> defaults to -action_dim
    size_t hidden = 64;
    size_t hidden_layers = 2;
    double logstd_min = -5.0;
    double logstd_max = 2.0;
    size_t log_interval = 200;
    double action_lo = -1.0;
    double action_hi = 1.0;
};

/// All learnable state: Q ensemble, V pair, tanh-Gaussian actor, target
/// copies, entropy temperature, optimizers, and step counter. The training
/// loop is the single mutator; a trained snapshot is safe to read from many
/// threads.
struct AgentState {
    AgentConfig cfg;
    size_t state_dim = 1, action_dim = 1;

    std::vector<Mlp> q_nets, q_targets;
    Mlp v_net, v_target;
    Mlp actor, actor_target;
    std::vector<AdamState> q_opts;
    AdamState v_opt, actor_opt, alpha_opt;
    double log_alpha = 0.0;
    size_t step = 0;

    double alpha() const;
    double action_scale() const { return 0.5 * (cfg.action_hi - cfg.action_lo); }
    double action_center() const { return 0.5 * (cfg.action_hi + cfg.action_lo); }
};

AgentState make_agent(size_t state_dim, size_t action_dim, AgentConfig cfg, uint64_t seed);

/// Pretrained components the critic consults when classifying policy actions.
struct ClassifyContext {
    const DenoiserModel* behavior = nullptr;
    const DenoiserModel* state_model = nullptr;
    const DynamicsModel* dynamics = nullptr;
    const OodThresholds* thresholds = nullptr;
    const EnsembleDetector* gate = nullptr;  // used only when cfg.gating
};

/// |tau - 1(u < 0)| * u^2
double expectile_loss(double u, double tau);

struct TransitionBatch {
    Mat s, a, s_next;
    std::vector<double> r, done;
};
TransitionBatch sample_transition_batch(const Dataset& data, size_t batch, Rng& rng);

/// argmax over n candidates drawn from the behavior model of the target-Q
/// ensemble minimum; ties broken by lowest candidate index.
struct BestIdResult {
    std::vector<double> action;
    double q_value = 0.0;
};
BestIdResult best_id_action(const AgentState& agent, const DenoiserModel& behavior,
                            std::span<const double> state, size_t n, Rng& rng);

/// Definition-1 classification of a single policy action, with the adaptive
/// bonus target value for beneficial actions.
struct ClassifyResult {
    OodClass cls = OodClass::kInDistribution;
    double delta_v = 0.0;       // defined for kBeneficial
    double bonus_target = 0.0;  // eta * (Q_target(s, a*_id) + delta_v)
};
ClassifyResult classify_action(AgentState& agent, const ClassifyContext& ctx,
                               std::span<const double> state, std::span<const double> action,
                               Rng& rng);

double value_update(AgentState& agent, const TransitionBatch& batch, Rng& rng);

struct CriticLosses {
    double bellman = 0.0;   // mean squared Bellman error
    double penalty = 0.0;   // beta-weighted detrimental term
    double bonus = 0.0;     // lambda-weighted beneficial term
    double frac_id = 0.0, frac_beneficial = 0.0, frac_detrimental = 0.0;
};
CriticLosses critic_update(AgentState& agent, const TransitionBatch& batch,
                           const ClassifyContext& ctx, Rng& rng);

struct ActorLosses {
    double actor_loss = 0.0;
    double alpha = 0.0;
    double mean_entropy = 0.0;
};
ActorLosses actor_update(AgentState& agent, const Mat& states, Rng& rng);

void soft_update(AgentState& agent, double rho);

struct MetricsRow {
    size_t step = 0;
    double v_loss = 0.0, bellman = 0.0, penalty = 0.0, bonus = 0.0;
    double actor_loss = 0.0, alpha = 0.0;
    double frac_id = 0.0, frac_beneficial = 0.0, frac_detrimental = 0.0;
    double eval_score = std::numeric_limits<double>::quiet_NaN();
};

struct TrainLog {
    std::vector<MetricsRow> rows;
};

struct EvalSetup {
    NavEnv env;
    EvalAnchors anchors;
    size_t episodes = 40;
    size_t interval = 0;  // 0 disables in-loop evaluation
    uint64_t seed = 0;
};

/// Algorithm loop: per step, value_update then critic_update; actor and
/// target updates on their own cadences. Logs averaged losses and class
/// proportions every cfg.log_interval steps.
TrainLog train(AgentState& agent, const Dataset& data, const ClassifyContext& ctx, Rng& rng,
               const std::optional<EvalSetup>& eval = std::nullopt);

struct EvalResult {
    double mean_return = 0.0;
    double normalized = 0.0;
};

/// Deterministic mean-action rollouts with per-episode seeds derived from
/// `seed`.
EvalResult evaluate(const AgentState& agent, const NavEnv& env, size_t episodes, uint64_t seed,
                    const EvalAnchors& anchors);

}  // namespace doser
