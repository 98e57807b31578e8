#include "doser/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "doser/adam.hpp"
#include "doser/errors.hpp"

namespace doser {

Precond precondition(double sigma, double sigma_data) {
    NoiseSchedule sched;
    sched.sigma_data = sigma_data;
    return precondition(sigma, sched);
}

Precond precondition(double sigma, const NoiseSchedule& sched) {
    if (sigma <= 0.0) throw InputError("precondition: sigma must be positive");
    const double sd = sched.sigma_data;
    const double denom = sigma * sigma + sd * sd;
    Precond p;
    p.c_skip = sd * sd / denom;
    p.c_out = sigma * sd / std::sqrt(denom);
    p.c_in = sched.sqrt_cin ? 1.0 / std::sqrt(denom) : 1.0 / denom;
    p.c_noise = 0.25 * std::log(sigma);
    p.lambda = denom / (sigma * sd) / (sigma * sd);
    return p;
}

double sample_sigma(const NoiseSchedule& sched, Rng& rng) {
    const double u = rng.open_uniform();
    const double logit = std::log(u / (1.0 - u));
    const double s = std::exp(std::log(sched.sigma_data) + sched.scale * logit);
    return std::clamp(s, sched.sigma_min, sched.sigma_max);
}

DenoiserModel DenoiserModel::make(size_t target_dim, size_t condition_dim,
                                  std::vector<size_t> hidden_dims, const NoiseSchedule& sched,
                                  Rng& rng, NoiseEmbedding embedding) {
    if (target_dim == 0) throw InputError("DenoiserModel: target_dim must be positive");
    DenoiserModel m;
    m.schedule = sched;
    m.condition_dim = condition_dim;
    m.target_dim = target_dim;
    m.embedding = embedding;
    std::vector<size_t> dims;
    dims.push_back(m.feature_dim());
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(target_dim);
    m.net = Mlp::make(dims, Activation::kMish, Activation::kIdentity);
    m.net.init_glorot(rng);
    return m;
}

void noise_features(const DenoiserModel& m, double c_noise, double* out) {
    if (m.embedding == NoiseEmbedding::kScalar) {
        out[0] = c_noise;
        return;
    }
    const size_t half = m.embed_width / 2;
    for (size_t i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
        out[i] = std::sin(c_noise * freq);
        out[half + i] = std::cos(c_noise * freq);
    }
    if (m.embed_width % 2 == 1) out[m.embed_width - 1] = c_noise;
}

namespace {

void fill_feature_row(const DenoiserModel& m, const double* noisy, double sigma,
                      const double* condition, double* row) {
    const Precond p = precondition(sigma, m.schedule);
    for (size_t j = 0; j < m.target_dim; ++j) row[j] = p.c_in * noisy[j];
    noise_features(m, p.c_noise, row + m.target_dim);
    if (m.condition_dim > 0) {
        const size_t off = m.target_dim + m.noise_feature_dim();
        for (size_t j = 0; j < m.condition_dim; ++j) row[off + j] = condition[j];
    }
}

}  // namespace

std::vector<double> denoise(const DenoiserModel& m, std::span<const double> noisy, double sigma,
                            std::span<const double> condition) {
    if (noisy.size() != m.target_dim) throw InputError("denoise: target dimension mismatch");
    if (condition.size() != m.condition_dim) throw InputError("denoise: condition dimension mismatch");
    const Precond p = precondition(sigma, m.schedule);
    Mat x(1, m.feature_dim());
    fill_feature_row(m, noisy.data(), sigma, condition.data(), x.row(0));
    Mat f = forward(m.net, x);
    std::vector<double> out(m.target_dim);
    for (size_t j = 0; j < m.target_dim; ++j) out[j] = p.c_skip * noisy[j] + p.c_out * f.at(0, j);
    return out;
}

void denoise_batch(const DenoiserModel& m, const Mat& noisy, std::span<const double> sigmas,
                   const Mat& cond, Mat& out, MlpWorkspace& ws) {
    const size_t B = noisy.rows;
    if (noisy.cols != m.target_dim) throw InputError("denoise_batch: target dimension mismatch");
    if (sigmas.size() != B) throw InputError("denoise_batch: one sigma per row required");
    if (m.condition_dim > 0 && (cond.rows != B || cond.cols != m.condition_dim))
        throw InputError("denoise_batch: condition shape mismatch");

    Mat features(B, m.feature_dim());
    for (size_t r = 0; r < B; ++r)
        fill_feature_row(m, noisy.row(r), sigmas[r], m.condition_dim ? cond.row(r) : nullptr,
                         features.row(r));
    const Mat& f = mlp_forward(m.net, features, false, nullptr, ws);
    if (out.rows != B || out.cols != m.target_dim) out.resize(B, m.target_dim);
    for (size_t r = 0; r < B; ++r) {
        const Precond p = precondition(sigmas[r], m.schedule);
        for (size_t j = 0; j < m.target_dim; ++j)
            out.at(r, j) = p.c_skip * noisy.at(r, j) + p.c_out * f.at(r, j);
    }
}

TrainTraceResult train_denoiser(DenoiserModel& m, const Mat& targets, const Mat& conditions,
                                const DenoiserTrainConfig& cfg, Rng& rng) {
    if (targets.rows == 0) throw InputError("train_denoiser: empty dataset");
    if (targets.cols != m.target_dim) throw InputError("train_denoiser: target dim mismatch");
    if (m.condition_dim > 0 && conditions.rows != targets.rows)
        throw InputError("train_denoiser: conditions must pair with targets");

    AdamState opt = AdamState::make(m.net.weight_count(), cfg.lr, cfg.steps);
    MlpWorkspace ws;
    const size_t B = std::min(cfg.batch, targets.rows);
    const size_t d = m.target_dim;

    Mat features(B, m.feature_dim());
    Mat upstream(B, d);
    std::vector<double> sigmas(B);
    Mat x0(B, d), xt(B, d), target_f(B, d);

    TrainTraceResult out;
    out.loss_trace.reserve(cfg.steps);

    for (size_t step = 0; step < cfg.steps; ++step) {
        for (size_t r = 0; r < B; ++r) {
            const size_t idx = rng.index(targets.rows);
            std::copy(targets.row(idx), targets.row(idx) + d, x0.row(r));
            const double sigma = sample_sigma(m.schedule, rng);
            sigmas[r] = sigma;
            const Precond p = precondition(sigma, m.schedule);
            for (size_t j = 0; j < d; ++j) {
                xt.at(r, j) = x0.at(r, j) + sigma * rng.normal();
                target_f.at(r, j) = (x0.at(r, j) - p.c_skip * xt.at(r, j)) / p.c_out;
            }
            fill_feature_row(m, xt.row(r), sigma, m.condition_dim ? conditions.row(idx) : nullptr,
                             features.row(r));
        }
        const Mat& f = mlp_forward(m.net, features, true, &rng, ws);
        double loss = 0.0;
        for (size_t r = 0; r < B; ++r)
            for (size_t j = 0; j < d; ++j) {
                const double diff = f.at(r, j) - target_f.at(r, j);
                loss += diff * diff;
                upstream.at(r, j) = 2.0 * diff / static_cast<double>(B);
            }
        loss /= static_cast<double>(B);
        if (!std::isfinite(loss)) throw TrainingError("train_denoiser: non-finite loss", step);
        out.loss_trace.push_back(loss);

        mlp_backward(m.net, features, upstream, ws);
        adam_step(opt, m.net.weights, ws.grad);
    }
    return out;
}

std::vector<double> karras_grid(size_t steps, double sigma_min, double sigma_max, double rho) {
    if (steps < 1) throw InputError("karras_grid: steps must be >= 1");
    std::vector<double> grid(steps + 1);
    if (steps == 1) {
        grid[0] = sigma_max;
    } else {
        const double min_inv = std::pow(sigma_min, 1.0 / rho);
        const double max_inv = std::pow(sigma_max, 1.0 / rho);
        for (size_t i = 0; i < steps; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
            grid[i] = std::pow(max_inv + t * (min_inv - max_inv), rho);
        }
    }
    grid[steps] = 0.0;
    return grid;
}

Mat sample_denoiser(const DenoiserModel& m, const Mat& conditions, size_t rows_if_unconditional,
                    size_t steps, Rng& rng, double box_lo, double box_hi) {
    if (steps < 1) throw InputError("sample_denoiser: steps must be >= 1");
    const size_t B = m.condition_dim > 0 ? conditions.rows : rows_if_unconditional;
    const size_t d = m.target_dim;
    const std::vector<double> grid =
        karras_grid(steps, m.schedule.sigma_min, m.schedule.sigma_max, 7.0);

    Mat x(B, d);
    for (size_t r = 0; r < B; ++r)
        for (size_t j = 0; j < d; ++j) x.at(r, j) = grid[0] * rng.normal();

    MlpWorkspace ws;
    Mat den(B, d), x_next(B, d);
    std::vector<double> sig(B);
    for (size_t i = 0; i < steps; ++i) {
        const double t = grid[i], t_next = grid[i + 1];
        std::fill(sig.begin(), sig.end(), t);
        denoise_batch(m, x, sig, conditions, den, ws);
        // d_i = (x - D(x; t)) / t ; Euler proposal, then trapezoidal correction
        const double h = t_next - t;
        for (size_t k = 0; k < B * d; ++k) {
            const double di = (x.v[k] - den.v[k]) / t;
            x_next.v[k] = x.v[k] + h * di;
        }
        if (t_next > 0.0) {
            std::fill(sig.begin(), sig.end(), t_next);
            Mat den2(B, d);
            denoise_batch(m, x_next, sig, conditions, den2, ws);
            for (size_t k = 0; k < B * d; ++k) {
                const double di = (x.v[k] - den.v[k]) / t;
                const double di2 = (x_next.v[k] - den2.v[k]) / t_next;
                x.v[k] += h * 0.5 * (di + di2);
            }
        } else {
            x = x_next;
        }
    }
    for (double& xv : x.v) xv = std::clamp(xv, box_lo, box_hi);
    return x;
}

Mat sample_actions(const DenoiserModel& m, std::span<const double> state, size_t n, size_t steps,
                   Rng& rng, double box_lo, double box_hi) {
    if (n < 1) throw InputError("sample_actions: n must be >= 1");
    if (state.size() != m.condition_dim) throw InputError("sample_actions: state dim mismatch");
    Mat cond(n, m.condition_dim);
    for (size_t r = 0; r < n; ++r) std::copy(state.begin(), state.end(), cond.row(r));
    return sample_denoiser(m, cond, n, steps, rng, box_lo, box_hi);
}

double recon_error(const DenoiserModel& m, std::span<const double> target,
                   std::span<const double> condition, size_t m_draws, Rng& rng) {
    if (m_draws < 1) throw InputError("recon_error: m_draws must be >= 1");
    std::vector<double> noisy(m.target_dim);
    double total = 0.0;
    for (size_t k = 0; k < m_draws; ++k) {
        const double sigma = sample_sigma(m.schedule, rng);
        for (size_t j = 0; j < m.target_dim; ++j) noisy[j] = target[j] + sigma * rng.normal();
        const std::vector<double> den = denoise(m, noisy, sigma, condition);
        double sq = 0.0;
        for (size_t j = 0; j < m.target_dim; ++j) {
            const double diff = target[j] - den[j];
            sq += diff * diff;
        }
        total += std::sqrt(sq);
    }
    return total / static_cast<double>(m_draws);
}

double recon_error_action(const DenoiserModel& m, std::span<const double> state,
                          std::span<const double> action, size_t m_draws, Rng& rng) {
    return recon_error(m, action, state, m_draws, rng);
}

double recon_error_state(const DenoiserModel& m, std::span<const double> state, size_t m_draws,
                         Rng& rng) {
    return recon_error(m, state, {}, m_draws, rng);
}

std::vector<double> recon_errors(const DenoiserModel& m, const Mat& targets, const Mat& conditions,
                                 size_t m_draws, uint64_t seed) {
    const size_t n = targets.rows;
    const size_t d = m.target_dim;
    std::vector<double> errors(n, 0.0);
    const Rng base(seed);

    // Chunked so the stacked (rows x draws) forward stays cache-friendly.
    const size_t chunk = std::max<size_t>(1, 16384 / std::max<size_t>(1, m_draws));
    MlpWorkspace ws;
    Mat noisy, cond, den;
    std::vector<double> sigmas;
    for (size_t begin = 0; begin < n; begin += chunk) {
        const size_t end = std::min(n, begin + chunk);
        const size_t rows = (end - begin) * m_draws;
        noisy.resize(rows, d);
        den.resize(rows, d);
        sigmas.assign(rows, 0.0);
        if (m.condition_dim > 0) cond.resize(rows, m.condition_dim);
        for (size_t r = begin; r < end; ++r) {
            Rng row_rng = base.split(r);
            for (size_t k = 0; k < m_draws; ++k) {
                const size_t out_r = (r - begin) * m_draws + k;
                const double sigma = sample_sigma(m.schedule, row_rng);
                sigmas[out_r] = sigma;
                for (size_t j = 0; j < d; ++j)
                    noisy.at(out_r, j) = targets.at(r, j) + sigma * row_rng.normal();
                if (m.condition_dim > 0)
                    std::copy(conditions.row(r), conditions.row(r) + m.condition_dim,
                              cond.row(out_r));
            }
        }
        denoise_batch(m, noisy, sigmas, cond, den, ws);
        for (size_t r = begin; r < end; ++r) {
            double total = 0.0;
            for (size_t k = 0; k < m_draws; ++k) {
                const size_t out_r = (r - begin) * m_draws + k;
                double sq = 0.0;
                for (size_t j = 0; j < d; ++j) {
                    const double diff = targets.at(r, j) - den.at(out_r, j);
                    sq += diff * diff;
                }
                total += std::sqrt(sq);
            }
            errors[r] = total / static_cast<double>(m_draws);
        }
    }
    return errors;
}

}  // namespace doser
