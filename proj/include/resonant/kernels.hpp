#pragma once

#include <cstddef>
#include <span>

// Dense-layer and optimizer kernels. Weights are row-major [out][in]; batches
// are row-major [batch][features]. The default kernels split work across
// OpenMP threads by output element, and every element is reduced in a fixed
// order, so results do not depend on the thread count. `reference::` holds
// plain serial loops used as the test oracle and benchmark baseline.
namespace resonant::kernels {

struct AdamHyper {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Y = X W^T + b
void dense_forward(std::span<const double> weights, std::span<const double> bias, std::span<const double> x,
                   std::span<double> y, std::size_t batch, std::size_t in, std::size_t out);

// dX = dY W
void dense_backward_input(std::span<const double> weights, std::span<const double> dy, std::span<double> dx,
                          std::size_t batch, std::size_t in, std::size_t out);

// dW = dY^T X, db = column sums of dY
void dense_weight_grad(std::span<const double> dy, std::span<const double> x, std::span<double> dw,
                       std::span<double> db, std::size_t batch, std::size_t in, std::size_t out);

// One bias-corrected Adam update; `step` is the 1-based step count.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, const AdamHyper& hyper, long step);

// dense_weight_grad followed by adam_update on the weights, without
// materializing dW. Bitwise identical to the two-pass form.
void fused_weight_grad_adam(std::span<double> weights, std::span<double> m, std::span<double> v,
                            std::span<const double> dy, std::span<const double> x, std::size_t batch,
                            std::size_t in, std::size_t out, const AdamHyper& hyper, long step);

namespace reference {

void dense_forward(std::span<const double> weights, std::span<const double> bias, std::span<const double> x,
                   std::span<double> y, std::size_t batch, std::size_t in, std::size_t out);
void dense_backward_input(std::span<const double> weights, std::span<const double> dy, std::span<double> dx,
                          std::size_t batch, std::size_t in, std::size_t out);
void dense_weight_grad(std::span<const double> dy, std::span<const double> x, std::span<double> dw,
                       std::span<double> db, std::size_t batch, std::size_t in, std::size_t out);
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, const AdamHyper& hyper, long step);

}  // namespace reference

int max_threads();

}  // namespace resonant::kernels
