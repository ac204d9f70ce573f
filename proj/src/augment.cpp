#include "resonant/augment.hpp"

#include <cmath>

#include "resonant/errors.hpp"

namespace resonant {

void AugmentConfig::validate() const {
  if (coeffs.empty()) throw ConfigError("augmentation needs at least one coefficient");
  for (double c : coeffs) {
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("augmentation coefficients must be positive");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("noise_sigma must be finite and non-negative");
  }
  if (variants_per_coeff == 0) throw ConfigError("variants_per_coeff must be at least 1");
}

std::vector<Segment> augment_segment(const Segment& normalized, const AugmentConfig& cfg, Rng& rng) {
  std::vector<Segment> out;
  out.reserve(cfg.output_count());
  for (double coeff : cfg.coeffs) {
    for (std::size_t v = 0; v < cfg.variants_per_coeff; ++v) {
      Segment seg;
      seg.sample_rate = normalized.sample_rate;
      seg.samples.resize(normalized.samples.size());
      for (std::size_t n = 0; n < seg.samples.size(); ++n) {
        const double noise = cfg.noise_sigma > 0.0 ? cfg.noise_sigma * rng.normal() : 0.0;
        seg.samples[n] = coeff * normalized.samples[n] + noise;
      }
      out.push_back(std::move(seg));
    }
  }
  return out;
}

}  // namespace resonant
