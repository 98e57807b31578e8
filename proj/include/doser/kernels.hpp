#pragma once

#include <cstddef>

namespace doser {

enum class Activation { kIdentity, kRelu, kMish, kTanh };

/// Data-parallel inner loops for dense layers.
///
/// Every kernel exists twice: a plain serial reference in kernels::serial and
/// an OpenMP version in kernels::omp. The top-level functions dispatch on a
/// process-wide switch (OpenMP by default). Both variants accumulate in the
/// same order, so results are identical regardless of thread count: parallel
/// loops split only over independent output elements, never over reductions.
namespace kernels {

bool parallel_enabled();
void set_parallel(bool on);

namespace serial {

/// Y(B x out) = X(B x in) * W(in x out) + b(out)
void linear_forward(const double* x, size_t batch, size_t in, const double* w, const double* b,
                    size_t out, double* y);

/// dX(B x in) = dY(B x out) * W^T
void linear_backward_input(const double* dy, size_t batch, size_t out, const double* w, size_t in,
                           double* dx);

/// dW(in x out) += X^T * dY ; db(out) += column sums of dY
void linear_backward_params(const double* x, const double* dy, size_t batch, size_t in, size_t out,
                            double* dw, double* db);

/// A = f(Z), elementwise.
void activation_forward(Activation act, const double* z, double* a, size_t n);

/// dZ = dA .* f'(Z), elementwise.
void activation_backward(Activation act, const double* z, const double* da, double* dz, size_t n);

}  // namespace serial

namespace omp {

void linear_forward(const double* x, size_t batch, size_t in, const double* w, const double* b,
                    size_t out, double* y);
void linear_backward_input(const double* dy, size_t batch, size_t out, const double* w, size_t in,
                           double* dx);
void linear_backward_params(const double* x, const double* dy, size_t batch, size_t in, size_t out,
                            double* dw, double* db);
void activation_forward(Activation act, const double* z, double* a, size_t n);
void activation_backward(Activation act, const double* z, const double* da, double* dz, size_t n);

}  // namespace omp

void linear_forward(const double* x, size_t batch, size_t in, const double* w, const double* b,
                    size_t out, double* y);
void linear_backward_input(const double* dy, size_t batch, size_t out, const double* w, size_t in,
                           double* dx);
void linear_backward_params(const double* x, const double* dy, size_t batch, size_t in, size_t out,
                            double* dw, double* db);
void activation_forward(Activation act, const double* z, double* a, size_t n);
void activation_backward(Activation act, const double* z, const double* da, double* dz, size_t n);

}  // namespace kernels

double activation_value(Activation act, double z);
double activation_derivative(Activation act, double z);

}  // namespace doser
