#include "doser/supervised.hpp"

#include <cmath>

#include "doser/errors.hpp"

namespace doser {

std::vector<double> train_regression(Mlp& net, const Mat& x, const Mat& y,
                                     const SupervisedConfig& cfg, Rng& rng) {
    if (x.rows == 0 || x.rows != y.rows) throw InputError("train_regression: bad dataset shapes");
    if (x.cols != net.input_dim() || y.cols != net.output_dim())
        throw InputError("train_regression: dims do not match net");

    AdamState opt = AdamState::make(net.weight_count(), cfg.lr, cfg.steps);
    MlpWorkspace ws;
    const size_t B = std::min(cfg.batch, x.rows);
    Mat xb(B, x.cols), yb(B, y.cols), upstream(B, y.cols);
    std::vector<double> trace;
    trace.reserve(cfg.steps);

    for (size_t step = 0; step < cfg.steps; ++step) {
        for (size_t r = 0; r < B; ++r) {
            const size_t idx = rng.index(x.rows);
            std::copy(x.row(idx), x.row(idx) + x.cols, xb.row(r));
            std::copy(y.row(idx), y.row(idx) + y.cols, yb.row(r));
        }
        const Mat& out = mlp_forward(net, xb, cfg.dropout_active, &rng, ws);
        double loss = 0.0;
        for (size_t i = 0; i < B * y.cols; ++i) {
            const double diff = out.v[i] - yb.v[i];
            loss += diff * diff;
            upstream.v[i] = 2.0 * diff / static_cast<double>(B);
        }
        loss /= static_cast<double>(B);
        if (!std::isfinite(loss)) throw TrainingError("train_regression: non-finite loss", step);
        trace.push_back(loss);
        mlp_backward(net, xb, upstream, ws);
        adam_step(opt, net.weights, ws.grad);
    }
    return trace;
}

double mse(const Mlp& net, const Mat& x, const Mat& y) {
    MlpWorkspace ws;
    const Mat& out = mlp_forward(net, x, false, nullptr, ws);
    double total = 0.0;
    for (size_t i = 0; i < out.v.size(); ++i) {
        const double diff = out.v[i] - y.v[i];
        total += diff * diff;
    }
    return total / static_cast<double>(x.rows);
}

}  // namespace doser
