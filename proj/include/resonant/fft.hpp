#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace resonant {

using Complex = std::complex<double>;

// Mixed-radix decimation-in-time FFT for arbitrary length. Each prime factor p
// costs O(n * p), so lengths built from small primes (17640 = 2^3 3^2 5 7^2)
// are fast; a large prime length degrades toward a plain DFT.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const { return n_; }
  const std::vector<std::size_t>& factors() const { return factors_; }

  // Unnormalized forward transform, X[k] = sum_n x[n] e^{-2 pi i k n / N}.
  void forward(std::span<const Complex> in, std::span<Complex> out) const;
  std::vector<Complex> forward(std::span<const Complex> in) const;
  // Real input, zero-padded (or truncated) to the plan length.
  std::vector<Complex> forward_real(std::span<const double> in) const;

 private:
  void work(Complex* out, const Complex* in, std::size_t stride, std::size_t level,
            std::size_t remaining) const;
  void butterfly(Complex* out, std::size_t stride, std::size_t radix, std::size_t m) const;

  std::size_t n_;
  std::vector<std::size_t> factors_;
  std::vector<Complex> twiddles_;
};

}  // namespace resonant
