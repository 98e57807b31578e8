#include "doser/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace doser {

namespace {

/// tanh(softplus(z)) via tanh(ln y) = (y^2 - 1)/(y^2 + 1) with y = 1 + e^z:
/// one exp instead of exp + log1p + tanh. Saturates for |z| > 40 where the
/// exact value is indistinguishable from the limit in double precision.
inline double mish_gate(double z, double& sigmoid_out) {
    if (z > 40.0) {
        sigmoid_out = 1.0;
        return 1.0;
    }
    if (z < -40.0) {
        sigmoid_out = 0.0;
        return 0.0;
    }
    const double e = std::exp(z);
    sigmoid_out = e / (1.0 + e);
    const double u = e * e + 2.0 * e;  // y^2 - 1
    return u / (u + 2.0);
}

}  // namespace

double activation_value(Activation act, double z) {
    switch (act) {
        case Activation::kIdentity: return z;
        case Activation::kRelu: return z > 0.0 ? z : 0.0;
        case Activation::kTanh: return std::tanh(z);
        case Activation::kMish: {
            double sig;
            return z * mish_gate(z, sig);
        }
    }
    return z;
}

double activation_derivative(Activation act, double z) {
    switch (act) {
        case Activation::kIdentity: return 1.0;
        case Activation::kRelu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::kTanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::kMish: {
            double sig;
            const double t = mish_gate(z, sig);
            return t + z * (1.0 - t * t) * sig;
        }
    }
    return 1.0;
}

namespace kernels {

namespace {
std::atomic<bool> g_parallel{true};
}

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

namespace serial {

void linear_forward(const double* x, size_t batch, size_t in, const double* w, const double* b,
                    size_t out, double* y) {
    for (size_t r = 0; r < batch; ++r) {
        double* yr = y + r * out;
        std::copy(b, b + out, yr);
        const double* xr = x + r * in;
        for (size_t i = 0; i < in; ++i) {
            const double xi = xr[i];
            const double* wi = w + i * out;
            for (size_t o = 0; o < out; ++o) yr[o] += xi * wi[o];
        }
    }
}

void linear_backward_input(const double* dy, size_t batch, size_t out, const double* w, size_t in,
                           double* dx) {
    for (size_t r = 0; r < batch; ++r) {
        const double* dyr = dy + r * out;
        double* dxr = dx + r * in;
        for (size_t i = 0; i < in; ++i) {
            const double* wi = w + i * out;
            double acc = 0.0;
            for (size_t o = 0; o < out; ++o) acc += dyr[o] * wi[o];
            dxr[i] = acc;
        }
    }
}

void linear_backward_params(const double* x, const double* dy, size_t batch, size_t in, size_t out,
                            double* dw, double* db) {
    for (size_t i = 0; i < in; ++i) {
        double* dwi = dw + i * out;
        for (size_t r = 0; r < batch; ++r) {
            const double xi = x[r * in + i];
            const double* dyr = dy + r * out;
            for (size_t o = 0; o < out; ++o) dwi[o] += xi * dyr[o];
        }
    }
    for (size_t o = 0; o < out; ++o) {
        double acc = 0.0;
        for (size_t r = 0; r < batch; ++r) acc += dy[r * out + o];
        db[o] += acc;
    }
}

void activation_forward(Activation act, const double* z, double* a, size_t n) {
    for (size_t i = 0; i < n; ++i) a[i] = activation_value(act, z[i]);
}

void activation_backward(Activation act, const double* z, const double* da, double* dz, size_t n) {
    for (size_t i = 0; i < n; ++i) dz[i] = da[i] * activation_derivative(act, z[i]);
}

}  // namespace serial

namespace omp {

void linear_forward(const double* x, size_t batch, size_t in, const double* w, const double* b,
                    size_t out, double* y) {
#pragma omp parallel for schedule(static)
    for (long r = 0; r < static_cast<long>(batch); ++r) {
        double* yr = y + r * out;
        std::copy(b, b + out, yr);
        const double* xr = x + r * in;
        for (size_t i = 0; i < in; ++i) {
            const double xi = xr[i];
            const double* wi = w + i * out;
            for (size_t o = 0; o < out; ++o) yr[o] += xi * wi[o];
        }
    }
}

void linear_backward_input(const double* dy, size_t batch, size_t out, const double* w, size_t in,
                           double* dx) {
#pragma omp parallel for schedule(static)
    for (long r = 0; r < static_cast<long>(batch); ++r) {
        const double* dyr = dy + r * out;
        double* dxr = dx + r * in;
        for (size_t i = 0; i < in; ++i) {
            const double* wi = w + i * out;
            double acc = 0.0;
            for (size_t o = 0; o < out; ++o) acc += dyr[o] * wi[o];
            dxr[i] = acc;
        }
    }
}

void linear_backward_params(const double* x, const double* dy, size_t batch, size_t in, size_t out,
                            double* dw, double* db) {
    // Each thread owns full rows of dW; the per-row accumulation order over
    // the batch matches the serial kernel, so results are thread-count
    // independent.
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(in); ++i) {
        double* dwi = dw + i * out;
        for (size_t r = 0; r < batch; ++r) {
            const double xi = x[r * in + i];
            const double* dyr = dy + r * out;
            for (size_t o = 0; o < out; ++o) dwi[o] += xi * dyr[o];
        }
    }
#pragma omp parallel for schedule(static)
    for (long o = 0; o < static_cast<long>(out); ++o) {
        double acc = 0.0;
        for (size_t r = 0; r < batch; ++r) acc += dy[r * out + o];
        db[o] += acc;
    }
}

void activation_forward(Activation act, const double* z, double* a, size_t n) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) a[i] = activation_value(act, z[i]);
}

void activation_backward(Activation act, const double* z, const double* da, double* dz, size_t n) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) dz[i] = da[i] * activation_derivative(act, z[i]);
}

}  // namespace omp

void linear_forward(const double* x, size_t batch, size_t in, const double* w, const double* b,
                    size_t out, double* y) {
    if (parallel_enabled())
        omp::linear_forward(x, batch, in, w, b, out, y);
    else
        serial::linear_forward(x, batch, in, w, b, out, y);
}

void linear_backward_input(const double* dy, size_t batch, size_t out, const double* w, size_t in,
                           double* dx) {
    if (parallel_enabled())
        omp::linear_backward_input(dy, batch, out, w, in, dx);
    else
        serial::linear_backward_input(dy, batch, out, w, in, dx);
}

void linear_backward_params(const double* x, const double* dy, size_t batch, size_t in, size_t out,
                            double* dw, double* db) {
    if (parallel_enabled())
        omp::linear_backward_params(x, dy, batch, in, out, dw, db);
    else
        serial::linear_backward_params(x, dy, batch, in, out, dw, db);
}

void activation_forward(Activation act, const double* z, double* a, size_t n) {
    if (parallel_enabled())
        omp::activation_forward(act, z, a, n);
    else
        serial::activation_forward(act, z, a, n);
}

void activation_backward(Activation act, const double* z, const double* da, double* dz, size_t n) {
    if (parallel_enabled())
        omp::activation_backward(act, z, da, dz, n);
    else
        serial::activation_backward(act, z, da, dz, n);
}

}  // namespace kernels
}  // namespace doser
