#include "doser/ood_detect.hpp"

#include <algorithm>
#include <cmath>

#include "doser/adam.hpp"
#include "doser/errors.hpp"
#include "doser/supervised.hpp"

namespace doser {

double nearest_rank_percentile(std::span<const double> sorted_values, double p) {
    if (sorted_values.empty()) throw InputError("nearest_rank_percentile: empty sample");
    if (p <= 0.0 || p > 100.0) throw InputError("nearest_rank_percentile: p must be in (0,100]");
    const size_t n = sorted_values.size();
    const size_t rank = static_cast<size_t>(
        std::ceil(p / 100.0 * static_cast<double>(n)));
    return sorted_values[std::min(std::max<size_t>(rank, 1), n) - 1];
}

OodThresholds fit_thresholds(const DenoiserModel& behavior, const DenoiserModel& state_model,
                             const Dataset& data, double percentile_a, double percentile_s,
                             size_t m_draws, uint64_t seed, size_t subsample) {
    if (data.rows() == 0) throw InputError("fit_thresholds: empty dataset");

    Mat states = dataset_states(data);
    Mat actions = dataset_actions(data);
    if (subsample > 0 && subsample < data.rows()) {
        Rng rng(seed);
        std::vector<size_t> idx(data.rows());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (size_t i = 0; i < subsample; ++i)
            std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
        idx.resize(subsample);
        states = gather_rows(states, idx);
        actions = gather_rows(actions, idx);
    }

    OodThresholds t;
    t.percentile_a = percentile_a;
    t.percentile_s = percentile_s;
    t.calibration_errors_a = recon_errors(behavior, actions, states, m_draws, splitmix64(seed));
    t.calibration_errors_s =
        recon_errors(state_model, states, Mat(), m_draws, splitmix64(seed + 1));
    std::sort(t.calibration_errors_a.begin(), t.calibration_errors_a.end());
    std::sort(t.calibration_errors_s.begin(), t.calibration_errors_s.end());
    t.tau_a = nearest_rank_percentile(t.calibration_errors_a, percentile_a);
    t.tau_s = nearest_rank_percentile(t.calibration_errors_s, percentile_s);
    return t;
}

bool is_ood_action(const OodThresholds& t, double error_a) {
    if (error_a < 0.0) throw InputError("is_ood_action: negative error");
    return error_a > t.tau_a;
}

bool is_ood_state(const OodThresholds& t, double error_s) {
    if (error_s < 0.0) throw InputError("is_ood_state: negative error");
    return error_s > t.tau_s;
}

EnsembleDetector train_ensemble(const Dataset& data, const EnsembleTrainConfig& cfg,
                                uint64_t seed) {
    if (cfg.members < 2) throw InputError("train_ensemble: need at least 2 members");
    if (data.rows() == 0) throw InputError("train_ensemble: empty dataset");

    EnsembleDetector det;
    det.state_dim = data.state_dim;
    det.action_dim = data.action_dim;

    const size_t n = data.rows();
    Mat x(n, data.state_dim + data.action_dim);
    Mat y(n, data.state_dim);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < data.state_dim; ++j) {
            x.at(i, j) = data.s[i * data.state_dim + j];
            y.at(i, j) = data.s_next[i * data.state_dim + j];
        }
        for (size_t j = 0; j < data.action_dim; ++j)
            x.at(i, data.state_dim + j) = data.a[i * data.action_dim + j];
    }

    std::vector<size_t> dims;
    dims.push_back(data.state_dim + data.action_dim);
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(data.state_dim);

    SupervisedConfig scfg;
    scfg.steps = cfg.steps;
    scfg.batch = cfg.batch;
    scfg.lr = cfg.lr;
    const Rng base(seed);
    for (size_t k = 0; k < cfg.members; ++k) {
        Rng rng = base.split(k);
        Mlp net = Mlp::make(dims, Activation::kRelu, Activation::kIdentity);
        net.init_glorot(rng);
        train_regression(net, x, y, scfg, rng);
        det.members.push_back(std::move(net));
    }
    return det;
}

double ensemble_score(const EnsembleDetector& det, std::span<const double> s,
                      std::span<const double> a) {
    if (!det.trained()) throw StateError("ensemble_score: detector not trained");
    const size_t K = det.members.size();
    const size_t d = det.state_dim;
    Mat x(1, det.state_dim + det.action_dim);
    std::copy(s.begin(), s.end(), x.row(0));
    std::copy(a.begin(), a.end(), x.row(0) + det.state_dim);

    Mat preds(K, d);
    for (size_t k = 0; k < K; ++k) {
        const Mat out = forward(det.members[k], x);
        std::copy(out.row(0), out.row(0) + d, preds.row(k));
    }
    std::vector<double> mean(d, 0.0);
    for (size_t k = 0; k < K; ++k)
        for (size_t j = 0; j < d; ++j) mean[j] += preds.at(k, j);
    for (size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(K);
    double var = 0.0;
    for (size_t k = 0; k < K; ++k)
        for (size_t j = 0; j < d; ++j) {
            const double diff = preds.at(k, j) - mean[j];
            var += diff * diff;
        }
    return var / static_cast<double>(K);
}

void calibrate_gate(EnsembleDetector& det, const Dataset& data, double percentile) {
    if (!det.trained()) throw StateError("calibrate_gate: detector not trained");
    std::vector<double> vars(data.rows());
    std::vector<double> s(det.state_dim), a(det.action_dim);
    for (size_t i = 0; i < data.rows(); ++i) {
        for (size_t j = 0; j < det.state_dim; ++j) s[j] = data.s[i * det.state_dim + j];
        for (size_t j = 0; j < det.action_dim; ++j) a[j] = data.a[i * det.action_dim + j];
        vars[i] = ensemble_score(det, s, a);
    }
    std::sort(vars.begin(), vars.end());
    det.variance_threshold = nearest_rank_percentile(vars, percentile);
}

GateDecision ensemble_gate(const EnsembleDetector& det, std::span<const double> s,
                           std::span<const double> a) {
    if (!det.calibrated()) throw StateError("ensemble_gate: gate not calibrated");
    return ensemble_score(det, s, a) > det.variance_threshold ? GateDecision::kUncertain
                                                              : GateDecision::kConfident;
}

double mc_dropout_score(const Mlp& q_net, std::span<const double> s, std::span<const double> a,
                        size_t passes, Rng& rng) {
    if (q_net.dropout_prob <= 0.0)
        throw InputError("mc_dropout_score: net must have dropout_prob > 0");
    if (passes < 2) throw InputError("mc_dropout_score: passes must be >= 2");
    Mat x(1, s.size() + a.size());
    std::copy(s.begin(), s.end(), x.row(0));
    std::copy(a.begin(), a.end(), x.row(0) + s.size());

    MlpWorkspace ws;
    std::vector<double> outs(passes);
    for (size_t p = 0; p < passes; ++p) {
        const Mat& out = mlp_forward(q_net, x, true, &rng, ws);
        outs[p] = out.at(0, 0);
    }
    double mean = 0.0;
    for (double v : outs) mean += v;
    mean /= static_cast<double>(passes);
    double var = 0.0;
    for (double v : outs) var += (v - mean) * (v - mean);
    return var / static_cast<double>(passes - 1);
}

Mlp train_dropout_q(const Dataset& data, const NavEnv& env, const Mat& q_table,
                    const DropoutQConfig& cfg, uint64_t seed) {
    if (cfg.dropout <= 0.0) throw InputError("train_dropout_q: dropout must be positive");
    if (data.rows() == 0) throw InputError("train_dropout_q: empty dataset");
    const size_t n = data.rows();
    Mat x(n, data.state_dim + data.action_dim);
    Mat y(n, 1);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < data.state_dim; ++j) x.at(i, j) = data.s[i * data.state_dim + j];
        for (size_t j = 0; j < data.action_dim; ++j)
            x.at(i, data.state_dim + j) = data.a[i * data.action_dim + j];
        y.at(i, 0) = q_lookup(env, q_table, data.s[i], data.a[i]);
    }
    std::vector<size_t> dims;
    dims.push_back(data.state_dim + data.action_dim);
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(1);
    Rng rng(seed);
    Mlp net = Mlp::make(dims, Activation::kRelu, Activation::kIdentity, cfg.dropout);
    net.init_glorot(rng);
    SupervisedConfig scfg;
    scfg.steps = cfg.steps;
    scfg.batch = cfg.batch;
    scfg.lr = cfg.lr;
    scfg.dropout_active = true;
    train_regression(net, x, y, scfg, rng);
    return net;
}

CvaeModel CvaeModel::make(size_t state_dim, size_t action_dim, size_t latent_dim,
                          std::vector<size_t> hidden_dims, Rng& rng) {
    CvaeModel m;
    m.state_dim = state_dim;
    m.action_dim = action_dim;
    m.latent_dim = latent_dim;

    std::vector<size_t> enc_dims;
    enc_dims.push_back(state_dim + action_dim);
    enc_dims.insert(enc_dims.end(), hidden_dims.begin(), hidden_dims.end());
    enc_dims.push_back(2 * latent_dim);
    m.encoder = Mlp::make(enc_dims, Activation::kRelu, Activation::kIdentity);
    m.encoder.init_glorot(rng);

    std::vector<size_t> dec_dims;
    dec_dims.push_back(state_dim + latent_dim);
    dec_dims.insert(dec_dims.end(), hidden_dims.begin(), hidden_dims.end());
    dec_dims.push_back(action_dim);
    m.decoder = Mlp::make(dec_dims, Activation::kRelu, Activation::kIdentity);
    m.decoder.init_glorot(rng);
    return m;
}

std::vector<double> train_cvae(CvaeModel& m, const Dataset& data, const CvaeTrainConfig& cfg,
                               Rng& rng) {
    if (data.rows() == 0) throw InputError("train_cvae: empty dataset");
    const size_t n = data.rows();
    const size_t sd = m.state_dim, ad = m.action_dim, ld = m.latent_dim;

    AdamState enc_opt = AdamState::make(m.encoder.weight_count(), cfg.lr, cfg.steps);
    AdamState dec_opt = AdamState::make(m.decoder.weight_count(), cfg.lr, cfg.steps);
    MlpWorkspace enc_ws, dec_ws;
    const size_t B = std::min(cfg.batch, n);

    Mat enc_in(B, sd + ad), dec_in(B, sd + ld);
    Mat eps(B, ld);
    Mat dec_up(B, ad), enc_up(B, 2 * ld);
    std::vector<double> trace;
    trace.reserve(cfg.steps);

    for (size_t step = 0; step < cfg.steps; ++step) {
        for (size_t r = 0; r < B; ++r) {
            const size_t idx = rng.index(n);
            for (size_t j = 0; j < sd; ++j) {
                enc_in.at(r, j) = data.s[idx * sd + j];
                dec_in.at(r, j) = data.s[idx * sd + j];
            }
            for (size_t j = 0; j < ad; ++j) enc_in.at(r, sd + j) = data.a[idx * ad + j];
        }
        const Mat& enc_out = mlp_forward(m.encoder, enc_in, false, nullptr, enc_ws);
        for (size_t r = 0; r < B; ++r)
            for (size_t j = 0; j < ld; ++j) {
                eps.at(r, j) = rng.normal();
                const double mu = enc_out.at(r, j);
                const double logvar = enc_out.at(r, ld + j);
                dec_in.at(r, sd + j) = mu + std::exp(0.5 * logvar) * eps.at(r, j);
            }
        const Mat& dec_out = mlp_forward(m.decoder, dec_in, false, nullptr, dec_ws);

        double loss = 0.0;
        for (size_t r = 0; r < B; ++r)
            for (size_t j = 0; j < ad; ++j) {
                const double diff = dec_out.at(r, j) - enc_in.at(r, sd + j);
                loss += diff * diff;
                dec_up.at(r, j) = 2.0 * diff / static_cast<double>(B);
            }
        // KL(q || N(0,I)) = -1/2 sum(1 + logvar - mu^2 - exp(logvar))
        for (size_t r = 0; r < B; ++r)
            for (size_t j = 0; j < ld; ++j) {
                const double mu = enc_out.at(r, j);
                const double logvar = enc_out.at(r, ld + j);
                loss += cfg.kl_weight * 0.5 * (mu * mu + std::exp(logvar) - 1.0 - logvar);
            }
        loss /= static_cast<double>(B);
        if (!std::isfinite(loss)) throw TrainingError("train_cvae: non-finite loss", step);
        trace.push_back(loss);

        mlp_backward(m.decoder, dec_in, dec_up, dec_ws, /*want_input_grad=*/true);
        // Chain decoder input grads into the encoder heads, then add KL grads.
        for (size_t r = 0; r < B; ++r)
            for (size_t j = 0; j < ld; ++j) {
                const double dz = dec_ws.input_grad.at(r, sd + j);
                const double mu = enc_out.at(r, j);
                const double logvar = enc_out.at(r, ld + j);
                const double sigma = std::exp(0.5 * logvar);
                enc_up.at(r, j) = dz + cfg.kl_weight * mu / static_cast<double>(B);
                enc_up.at(r, ld + j) =
                    dz * 0.5 * sigma * eps.at(r, j) +
                    cfg.kl_weight * 0.5 * (std::exp(logvar) - 1.0) / static_cast<double>(B);
            }
        mlp_backward(m.encoder, enc_in, enc_up, enc_ws);
        adam_step(dec_opt, m.decoder.weights, dec_ws.grad);
        adam_step(enc_opt, m.encoder.weights, enc_ws.grad);
    }
    return trace;
}

double cvae_score(const CvaeModel& m, std::span<const double> s, std::span<const double> a,
                  Rng* sample_rng) {
    Mat enc_in(1, m.state_dim + m.action_dim);
    std::copy(s.begin(), s.end(), enc_in.row(0));
    std::copy(a.begin(), a.end(), enc_in.row(0) + m.state_dim);
    const Mat enc_out = forward(m.encoder, enc_in);

    Mat dec_in(1, m.state_dim + m.latent_dim);
    std::copy(s.begin(), s.end(), dec_in.row(0));
    for (size_t j = 0; j < m.latent_dim; ++j) {
        double z = enc_out.at(0, j);
        if (sample_rng != nullptr)
            z += std::exp(0.5 * enc_out.at(0, m.latent_dim + j)) * sample_rng->normal();
        dec_in.at(0, m.state_dim + j) = z;
    }
    const Mat dec_out = forward(m.decoder, dec_in);
    double sq = 0.0;
    for (size_t j = 0; j < m.action_dim; ++j) {
        const double diff = a[j] - dec_out.at(0, j);
        sq += diff * diff;
    }
    return std::sqrt(sq);
}

}  // namespace doser
