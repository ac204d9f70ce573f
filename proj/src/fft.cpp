#include "resonant/fft.hpp"

#include <cmath>
#include <numbers>

#include "resonant/errors.hpp"

namespace resonant {

namespace {

std::vector<std::size_t> factorize(std::size_t n) {
  std::vector<std::size_t> factors;
  // Radix 4 first keeps the recursion shallow for power-of-two lengths.
  while (n % 4 == 0) {
    factors.push_back(4);
    n /= 4;
  }
  for (std::size_t p = 2; p * p <= n; ++p) {
    while (n % p == 0) {
      factors.push_back(p);
      n /= p;
    }
  }
  if (n > 1) factors.push_back(n);
  return factors;
}

}  // namespace

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (n == 0) throw ArgumentError("FFT length must be positive");
  factors_ = factorize(n);
  twiddles_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddles_[k] = Complex(std::cos(phase), std::sin(phase));
  }
}

void FftPlan::butterfly(Complex* out, std::size_t stride, std::size_t radix, std::size_t m) const {
  // out holds `radix` interleaved sub-transforms of length m. Combine them into
  // one transform of length radix * m.
  Complex scratch[64];
  std::vector<Complex> heap;
  Complex* t = scratch;
  if (radix > 64) {
    heap.resize(radix);
    t = heap.data();
  }
  const std::size_t twiddle_step = n_ / radix;  // e^{-2 pi i / radix}
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t j = 0; j < radix; ++j) {
      t[j] = j == 0 ? out[k] : out[k + j * m] * twiddles_[(j * k * stride) % n_];
    }
    for (std::size_t q = 0; q < radix; ++q) {
      Complex acc = t[0];
      std::size_t idx = 0;
      const std::size_t inc = (q * twiddle_step) % n_;
      for (std::size_t j = 1; j < radix; ++j) {
        idx += inc;
        if (idx >= n_) idx -= n_;
        acc += t[j] * twiddles_[idx];
      }
      out[k + q * m] = acc;
    }
  }
}

void FftPlan::work(Complex* out, const Complex* in, std::size_t stride, std::size_t level,
                   std::size_t remaining) const {
  const std::size_t radix = factors_[level];
  const std::size_t m = remaining / radix;
  if (m == 1) {
    for (std::size_t j = 0; j < radix; ++j) out[j] = in[j * stride];
  } else {
    for (std::size_t j = 0; j < radix; ++j) {
      work(out + j * m, in + j * stride, stride * radix, level + 1, m);
    }
  }
  butterfly(out, stride, radix, m);
}

void FftPlan::forward(std::span<const Complex> in, std::span<Complex> out) const {
  if (in.size() != n_ || out.size() != n_) throw ShapeError("FFT buffer length mismatch");
  if (n_ == 1) {
    out[0] = in[0];
    return;
  }
  if (in.data() == out.data()) {
    std::vector<Complex> copy(in.begin(), in.end());
    work(out.data(), copy.data(), 1, 0, n_);
  } else {
    work(out.data(), in.data(), 1, 0, n_);
  }
}

std::vector<Complex> FftPlan::forward(std::span<const Complex> in) const {
  std::vector<Complex> out(n_);
  forward(in, out);
  return out;
}

std::vector<Complex> FftPlan::forward_real(std::span<const double> in) const {
  std::vector<Complex> buf(n_);
  const std::size_t count = std::min(in.size(), n_);
  for (std::size_t i = 0; i < count; ++i) buf[i] = Complex(in[i], 0.0);
  return forward(buf);
}

}  // namespace resonant
