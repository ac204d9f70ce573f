#pragma once

#include <cstddef>
#include <vector>

#include "resonant/dsp.hpp"
#include "resonant/rng.hpp"

namespace resonant {

struct AugmentConfig {
  std::vector<double> coeffs{0.5, 0.8, 1.0, 1.2, 1.5};
  double noise_sigma = 0.002;
  std::size_t variants_per_coeff = 2;

  void validate() const;
  std::size_t output_count() const { return coeffs.size() * variants_per_coeff; }
};

// s_aug[n] = coeff * s_norm[n] + eta[n], eta ~ N(0, noise_sigma^2), for every
// coefficient and variant, in coefficient-major order.
std::vector<Segment> augment_segment(const Segment& normalized, const AugmentConfig& cfg, Rng& rng);

}  // namespace resonant
