#include "doser/mlp.hpp"

#include <cmath>

#include "doser/errors.hpp"

namespace doser {

Mlp Mlp::make(std::vector<size_t> layer_dims, Activation hidden, Activation output,
              double dropout) {
    if (layer_dims.size() < 2) throw InputError("Mlp: need at least input and output dims");
    for (size_t d : layer_dims)
        if (d == 0) throw InputError("Mlp: zero layer width");
    if (dropout < 0.0 || dropout >= 1.0) throw InputError("Mlp: dropout_prob must be in [0,1)");
    Mlp m;
    m.dims = std::move(layer_dims);
    m.acts.assign(m.dims.size() - 1, hidden);
    m.acts.back() = output;
    m.dropout_prob = dropout;
    m.weights.assign(m.weight_count(), 0.0);
    return m;
}

size_t Mlp::weight_count() const {
    size_t n = 0;
    for (size_t l = 0; l + 1 < dims.size(); ++l) n += (dims[l] + 1) * dims[l + 1];
    return n;
}

size_t Mlp::weight_offset(size_t layer) const {
    size_t off = 0;
    for (size_t l = 0; l < layer; ++l) off += (dims[l] + 1) * dims[l + 1];
    return off;
}

size_t Mlp::bias_offset(size_t layer) const {
    return weight_offset(layer) + dims[layer] * dims[layer + 1];
}

void Mlp::init_glorot(Rng& rng) {
    for (size_t l = 0; l < layer_count(); ++l) {
        const size_t fan_in = dims[l], fan_out = dims[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        double* w = weights.data() + weight_offset(l);
        for (size_t i = 0; i < fan_in * fan_out; ++i) w[i] = rng.uniform(-limit, limit);
        double* b = weights.data() + bias_offset(l);
        for (size_t i = 0; i < fan_out; ++i) b[i] = 0.0;
    }
}

namespace {

void ensure_workspace(const Mlp& m, size_t batch, MlpWorkspace& ws) {
    const size_t L = m.layer_count();
    if (ws.pre.size() != L) {
        ws.pre.resize(L);
        ws.post.resize(L);
        ws.mask.resize(L);
        ws.delta.resize(L);
    }
    for (size_t l = 0; l < L; ++l) {
        const size_t out = m.dims[l + 1];
        if (ws.pre[l].rows != batch || ws.pre[l].cols != out) {
            ws.pre[l].resize(batch, out);
            ws.post[l].resize(batch, out);
            ws.delta[l].resize(batch, out);
        }
    }
}

}  // namespace

const Mat& mlp_forward(const Mlp& m, const Mat& x, bool train_mode, Rng* rng, MlpWorkspace& ws) {
    if (x.cols != m.input_dim()) throw InputError("mlp_forward: batch width mismatch");
    const size_t L = m.layer_count();
    const size_t B = x.rows;
    ensure_workspace(m, B, ws);

    const bool use_dropout = train_mode && m.dropout_prob > 0.0;
    if (use_dropout && rng == nullptr) throw InputError("mlp_forward: dropout requires rng");

    const Mat* cur = &x;
    for (size_t l = 0; l < L; ++l) {
        const size_t in = m.dims[l], out = m.dims[l + 1];
        kernels::linear_forward(cur->v.data(), B, in, m.weights.data() + m.weight_offset(l),
                                m.weights.data() + m.bias_offset(l), out, ws.pre[l].v.data());
        kernels::activation_forward(m.acts[l], ws.pre[l].v.data(), ws.post[l].v.data(), B * out);
        if (use_dropout && l + 1 < L) {
            Mat& mask = ws.mask[l];
            if (mask.rows != B || mask.cols != out) mask.resize(B, out);
            const double keep = 1.0 - m.dropout_prob;
            const double scale = 1.0 / keep;
            for (size_t i = 0; i < B * out; ++i)
                mask.v[i] = (rng->uniform() < keep) ? scale : 0.0;
            for (size_t i = 0; i < B * out; ++i) ws.post[l].v[i] *= mask.v[i];
        } else if (!ws.mask[l].empty()) {
            ws.mask[l] = Mat();
        }
        cur = &ws.post[l];
    }
    return ws.post[L - 1];
}

void mlp_backward(const Mlp& m, const Mat& x, const Mat& upstream, MlpWorkspace& ws,
                  bool want_input_grad) {
    const size_t L = m.layer_count();
    const size_t B = x.rows;
    if (ws.pre.size() != L || ws.pre[0].rows != B)
        throw InputError("mlp_backward: workspace does not match a prior forward");
    if (upstream.rows != B || upstream.cols != m.output_dim())
        throw InputError("mlp_backward: upstream gradient shape mismatch");

    ws.grad.assign(m.weight_count(), 0.0);

    // dA for the top layer is the upstream gradient itself.
    const Mat* da = &upstream;
    for (size_t l = L; l-- > 0;) {
        const size_t in = m.dims[l], out = m.dims[l + 1];
        Mat& dz = ws.delta[l];
        if (!ws.mask[l].empty()) {
            // Dropout sits after the activation: scale dA by the saved mask.
            for (size_t i = 0; i < B * out; ++i) dz.v[i] = da->v[i] * ws.mask[l].v[i];
            kernels::activation_backward(m.acts[l], ws.pre[l].v.data(), dz.v.data(), dz.v.data(),
                                         B * out);
        } else {
            kernels::activation_backward(m.acts[l], ws.pre[l].v.data(), da->v.data(), dz.v.data(),
                                         B * out);
        }
        const Mat& layer_in = (l == 0) ? x : ws.post[l - 1];
        kernels::linear_backward_params(layer_in.v.data(), dz.v.data(), B, in, out,
                                        ws.grad.data() + m.weight_offset(l),
                                        ws.grad.data() + m.bias_offset(l));
        if (l > 0) {
            // delta[l-1] holds dA for layer l-1 from here on; the next
            // iteration overwrites it in place with dZ.
            Mat& dprev = ws.delta[l - 1];
            if (dprev.rows != B || dprev.cols != in) dprev.resize(B, in);
            kernels::linear_backward_input(dz.v.data(), B, out, m.weights.data() + m.weight_offset(l),
                                           in, dprev.v.data());
            da = &dprev;
        } else if (want_input_grad) {
            if (ws.input_grad.rows != B || ws.input_grad.cols != in) ws.input_grad.resize(B, in);
            kernels::linear_backward_input(dz.v.data(), B, out, m.weights.data() + m.weight_offset(l),
                                           in, ws.input_grad.v.data());
        }
    }
}

Mat forward(const Mlp& m, const Mat& x) {
    MlpWorkspace ws;
    return mlp_forward(m, x, false, nullptr, ws);
}

std::vector<double> backward(const Mlp& m, const Mat& x, const Mat& upstream) {
    MlpWorkspace ws;
    mlp_forward(m, x, false, nullptr, ws);
    mlp_backward(m, x, upstream, ws);
    return ws.grad;
}

std::vector<double> forward_one(const Mlp& m, std::span<const double> x) {
    Mat xm(1, x.size());
    std::copy(x.begin(), x.end(), xm.v.begin());
    Mat y = forward(m, xm);
    return y.v;
}

}  // namespace doser
