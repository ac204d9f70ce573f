#include "resonant/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <omp.h>

#include "resonant/errors.hpp"

namespace resonant::kernels {

namespace {

void check(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

// Eight independent partial sums let the compiler vectorize the reduction
// while keeping a fixed summation order.
double blocked_dot(const double* a, const double* b, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int k = 0; k < 8; ++k) acc[k] += a[i + k] * b[i + k];
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

struct AdamScale {
  double c1, c2;
};

AdamScale adam_scale(const AdamHyper& h, long step) {
  return {1.0 - std::pow(h.beta1, static_cast<double>(step)), 1.0 - std::pow(h.beta2, static_cast<double>(step))};
}

inline void adam_element(double& p, double& m, double& v, double g, const AdamHyper& h, const AdamScale& s) {
  m = h.beta1 * m + (1.0 - h.beta1) * g;
  v = h.beta2 * v + (1.0 - h.beta2) * (g * g);
  const double m_hat = m / s.c1;
  const double v_hat = v / s.c2;
  p -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
}

void check_dense(std::size_t w, std::size_t x, std::size_t y, std::size_t batch, std::size_t in,
                 std::size_t out) {
  check(w == in * out, "weight matrix does not match layer dimensions");
  check(x == batch * in, "input batch does not match layer input width");
  check(y == batch * out, "output batch does not match layer output width");
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }

void dense_forward(std::span<const double> weights, std::span<const double> bias, std::span<const double> x,
                   std::span<double> y, std::size_t batch, std::size_t in, std::size_t out) {
  check_dense(weights.size(), x.size(), y.size(), batch, in, out);
  check(bias.size() == out, "bias length mismatch");
  const double* W = weights.data();
  const double* X = x.data();
  double* Y = y.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(out); ++o) {
    const double* row = W + static_cast<std::size_t>(o) * in;
    for (std::size_t b = 0; b < batch; ++b) {
      Y[b * out + static_cast<std::size_t>(o)] = bias[static_cast<std::size_t>(o)] + blocked_dot(row, X + b * in, in);
    }
  }
}

void dense_backward_input(std::span<const double> weights, std::span<const double> dy, std::span<double> dx,
                          std::size_t batch, std::size_t in, std::size_t out) {
  check_dense(weights.size(), dx.size(), dy.size(), batch, in, out);
  const double* W = weights.data();
  const double* DY = dy.data();
  double* DX = dx.data();
  constexpr std::size_t kChunk = 512;
  const std::size_t chunks = (in + kChunk - 1) / kChunk;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
    const std::size_t hi = std::min(in, lo + kChunk);
    for (std::size_t b = 0; b < batch; ++b) std::fill(DX + b * in + lo, DX + b * in + hi, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = W + o * in;
      for (std::size_t b = 0; b < batch; ++b) {
        const double g = DY[b * out + o];
        double* dst = DX + b * in;
        for (std::size_t i = lo; i < hi; ++i) dst[i] += g * row[i];
      }
    }
  }
}

void dense_weight_grad(std::span<const double> dy, std::span<const double> x, std::span<double> dw,
                       std::span<double> db, std::size_t batch, std::size_t in, std::size_t out) {
  check_dense(dw.size(), x.size(), dy.size(), batch, in, out);
  check(db.size() == out, "bias gradient length mismatch");
  const double* DY = dy.data();
  const double* X = x.data();
  double* DW = dw.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(out); ++o) {
    const std::size_t oo = static_cast<std::size_t>(o);
    double* row = DW + oo * in;
    std::fill(row, row + in, 0.0);
    double bias_acc = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const double g = DY[b * out + oo];
      bias_acc += g;
      const double* xb = X + b * in;
      for (std::size_t i = 0; i < in; ++i) row[i] += g * xb[i];
    }
    db[oo] = bias_acc;
  }
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, const AdamHyper& hyper, long step) {
  check(grads.size() == params.size() && m.size() == params.size() && v.size() == params.size(),
        "Adam buffers must match parameter shape");
  const AdamScale s = adam_scale(hyper, step);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(params.size());
  double* P = params.data();
  const double* G = grads.data();
  double* M = m.data();
  double* V = v.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) adam_element(P[i], M[i], V[i], G[i], hyper, s);
}

void fused_weight_grad_adam(std::span<double> weights, std::span<double> m, std::span<double> v,
                            std::span<const double> dy, std::span<const double> x, std::size_t batch,
                            std::size_t in, std::size_t out, const AdamHyper& hyper, long step) {
  check_dense(weights.size(), x.size(), dy.size(), batch, in, out);
  check(m.size() == weights.size() && v.size() == weights.size(), "Adam buffers must match parameter shape");
  const AdamScale s = adam_scale(hyper, step);
  const double* DY = dy.data();
  const double* X = x.data();
  double* W = weights.data();
  double* M = m.data();
  double* V = v.data();
#pragma omp parallel
  {
    std::vector<double> grad(in);
#pragma omp for schedule(static)
    for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(out); ++o) {
      const std::size_t oo = static_cast<std::size_t>(o);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = 0; b < batch; ++b) {
        const double g = DY[b * out + oo];
        const double* xb = X + b * in;
        for (std::size_t i = 0; i < in; ++i) grad[i] += g * xb[i];
      }
      const std::size_t base = oo * in;
      for (std::size_t i = 0; i < in; ++i) adam_element(W[base + i], M[base + i], V[base + i], grad[i], hyper, s);
    }
  }
}

namespace reference {

void dense_forward(std::span<const double> weights, std::span<const double> bias, std::span<const double> x,
                   std::span<double> y, std::size_t batch, std::size_t in, std::size_t out) {
  check_dense(weights.size(), x.size(), y.size(), batch, in, out);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += weights[o * in + i] * x[b * in + i];
      y[b * out + o] = bias[o] + acc;
    }
  }
}

void dense_backward_input(std::span<const double> weights, std::span<const double> dy, std::span<double> dx,
                          std::size_t batch, std::size_t in, std::size_t out) {
  check_dense(weights.size(), dx.size(), dy.size(), batch, in, out);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < in; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) acc += dy[b * out + o] * weights[o * in + i];
      dx[b * in + i] = acc;
    }
  }
}

void dense_weight_grad(std::span<const double> dy, std::span<const double> x, std::span<double> dw,
                       std::span<double> db, std::size_t batch, std::size_t in, std::size_t out) {
  check_dense(dw.size(), x.size(), dy.size(), batch, in, out);
  for (std::size_t o = 0; o < out; ++o) {
    double bias_acc = 0.0;
    for (std::size_t b = 0; b < batch; ++b) bias_acc += dy[b * out + o];
    db[o] = bias_acc;
    for (std::size_t i = 0; i < in; ++i) {
      double acc = 0.0;
      for (std::size_t b = 0; b < batch; ++b) acc += dy[b * out + o] * x[b * in + i];
      dw[o * in + i] = acc;
    }
  }
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, const AdamHyper& hyper, long step) {
  check(grads.size() == params.size() && m.size() == params.size() && v.size() == params.size(),
        "Adam buffers must match parameter shape");
  const AdamScale s = adam_scale(hyper, step);
  for (std::size_t i = 0; i < params.size(); ++i) adam_element(params[i], m[i], v[i], grads[i], hyper, s);
}

}  // namespace reference

}  // namespace resonant::kernels
