#include "doser/dynamics.hpp"

#include <algorithm>

#include "doser/errors.hpp"
#include "doser/supervised.hpp"

namespace doser {

DynamicsModel DynamicsModel::make(size_t state_dim, size_t action_dim,
                                  std::vector<size_t> hidden_dims, double state_lo,
                                  double state_hi, Rng& rng) {
    DynamicsModel m;
    m.state_dim = state_dim;
    m.action_dim = action_dim;
    m.state_lo = state_lo;
    m.state_hi = state_hi;
    std::vector<size_t> dims;
    dims.push_back(state_dim + action_dim);
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(state_dim + 1);
    m.net = Mlp::make(dims, Activation::kRelu, Activation::kIdentity);
    m.net.init_glorot(rng);
    return m;
}

std::vector<double> train_dynamics(DynamicsModel& m, const Dataset& data,
                                   const DynamicsTrainConfig& cfg, Rng& rng) {
    if (data.rows() == 0) throw InputError("train_dynamics: empty dataset");
    const size_t n = data.rows();
    Mat x(n, m.state_dim + m.action_dim);
    Mat y(n, m.state_dim + 1);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < m.state_dim; ++j) {
            x.at(i, j) = data.s[i * m.state_dim + j];
            y.at(i, j) = data.s_next[i * m.state_dim + j];
        }
        for (size_t j = 0; j < m.action_dim; ++j)
            x.at(i, m.state_dim + j) = data.a[i * m.action_dim + j];
        y.at(i, m.state_dim) = data.r[i];
    }
    SupervisedConfig scfg;
    scfg.steps = cfg.steps;
    scfg.batch = cfg.batch;
    scfg.lr = cfg.lr;
    auto trace = train_regression(m.net, x, y, scfg, rng);
    m.training_steps_done += cfg.steps;
    return trace;
}

void predict(const DynamicsModel& m, std::span<const double> s, std::span<const double> a,
             std::span<double> s_next_out, double& r_out) {
    if (s.size() != m.state_dim || a.size() != m.action_dim || s_next_out.size() != m.state_dim)
        throw InputError("dynamics predict: dimension mismatch");
    Mat x(1, m.state_dim + m.action_dim);
    std::copy(s.begin(), s.end(), x.row(0));
    std::copy(a.begin(), a.end(), x.row(0) + m.state_dim);
    const Mat out = forward(m.net, x);
    for (size_t j = 0; j < m.state_dim; ++j)
        s_next_out[j] = std::clamp(out.at(0, j), m.state_lo, m.state_hi);
    r_out = out.at(0, m.state_dim);
}

void predict_batch(const DynamicsModel& m, const Mat& s, const Mat& a, Mat& s_next,
                   std::vector<double>& r, MlpWorkspace& ws) {
    const size_t B = s.rows;
    if (a.rows != B) throw InputError("dynamics predict_batch: row mismatch");
    Mat x(B, m.state_dim + m.action_dim);
    for (size_t i = 0; i < B; ++i) {
        std::copy(s.row(i), s.row(i) + m.state_dim, x.row(i));
        std::copy(a.row(i), a.row(i) + m.action_dim, x.row(i) + m.state_dim);
    }
    const Mat& out = mlp_forward(m.net, x, false, nullptr, ws);
    if (s_next.rows != B || s_next.cols != m.state_dim) s_next.resize(B, m.state_dim);
    r.assign(B, 0.0);
    for (size_t i = 0; i < B; ++i) {
        for (size_t j = 0; j < m.state_dim; ++j)
            s_next.at(i, j) = std::clamp(out.at(i, j), m.state_lo, m.state_hi);
        r[i] = out.at(i, m.state_dim);
    }
}

}  // namespace doser
