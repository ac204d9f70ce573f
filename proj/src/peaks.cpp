#include "resonant/peaks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "resonant/errors.hpp"

namespace resonant {

void MatchConfig::validate() const {
  if (!(w_f > 0.0) || !(w_a > 0.0)) throw ConfigError("peak distance weights must be positive");
  if (!(penalty_per_unmatched > 0.0)) throw ConfigError("penalty_per_unmatched must be positive");
  if (!(min_height_fraction > 0.0 && min_height_fraction <= 1.0)) {
    throw ConfigError("min_height_fraction must lie in (0, 1]");
  }
  if (min_separation_bins == 0) throw ConfigError("min_separation_bins must be positive");
  if (!(prominence_mad_factor > 0.0)) throw ConfigError("prominence_mad_factor must be positive");
  if (max_peaks == 0) throw ConfigError("max_peaks must be positive");
}

MatchConfig MatchConfig::for_width(std::size_t spectrum_width) const {
  MatchConfig out = *this;
  if (spectrum_width != kSpectrumLength) {
    const double scaled = static_cast<double>(min_separation_bins) * static_cast<double>(spectrum_width) /
                          static_cast<double>(kSpectrumLength);
    out.min_separation_bins = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(scaled)));
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("median of an empty sequence");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double mad(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("MAD of an empty sequence");
  const double center = median(std::vector<double>(values.begin(), values.end()));
  std::vector<double> dev(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) dev[i] = std::abs(values[i] - center);
  return median(std::move(dev));
}

double prominence(std::span<const double> bins, std::size_t index) {
  const double height = bins[index];
  // Walk outward until a strictly higher sample or the boundary; the lowest
  // point passed on each side is that side's valley.
  double left_min = height;
  for (std::size_t i = index; i-- > 0;) {
    if (bins[i] > height) break;
    left_min = std::min(left_min, bins[i]);
  }
  double right_min = height;
  for (std::size_t i = index + 1; i < bins.size(); ++i) {
    if (bins[i] > height) break;
    right_min = std::min(right_min, bins[i]);
  }
  return height - std::max(left_min, right_min);
}

PeakSet find_peaks(const Spectrum& sp, const MatchConfig& cfg) {
  const auto& x = sp.bins;
  PeakSet out;
  if (x.size() < 3) return out;
  const double top = *std::max_element(x.begin(), x.end());
  if (!(top > 0.0)) return out;
  const double min_height = cfg.min_height_fraction * top;
  const double min_prominence = cfg.prominence_mad_factor * mad(x);

  // Local maxima; a flat top counts once, at its middle sample.
  std::vector<std::size_t> candidates;
  std::size_t i = 1;
  const std::size_t last = x.size() - 1;
  while (i < last) {
    if (x[i - 1] < x[i]) {
      std::size_t ahead = i + 1;
      while (ahead < last && x[ahead] == x[i]) ++ahead;
      if (x[ahead] < x[i]) {
        const std::size_t mid = (i + ahead - 1) / 2;
        if (x[mid] >= min_height && prominence(x, mid) >= min_prominence) candidates.push_back(mid);
        i = ahead;
        continue;
      }
    }
    ++i;
  }

  // Strongest first; equal heights resolve to the lower bin.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t c : candidates) {
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](std::size_t k) {
      const std::size_t gap = c > k ? c - k : k - c;
      return gap >= cfg.min_separation_bins;
    });
    if (clear) kept.push_back(c);
    if (kept.size() == cfg.max_peaks) break;
  }

  for (std::size_t k : kept) {
    out.peaks.push_back({sp.frequency_of(k), x[k], k + 1});
  }
  return out;
}

double pair_distance(const Peak& p, const Peak& q, const MatchConfig& cfg) {
  const double df = p.freq_hz - q.freq_hz;
  const double da = p.amplitude - q.amplitude;
  return std::sqrt(cfg.w_f * df * df + cfg.w_a * da * da);
}

double set_distance(const PeakSet& original, const PeakSet& reconstructed, const MatchConfig& cfg) {
  double total = 0.0;
  if (!reconstructed.empty()) {
    for (const Peak& p : original.peaks) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_bin = 0;
      for (const Peak& q : reconstructed.peaks) {
        const double d = pair_distance(p, q, cfg);
        if (d < best || (d == best && q.bin < best_bin)) {
          best = d;
          best_bin = q.bin;
        }
      }
      total += best;
    }
  }
  const std::size_t a = original.size(), b = reconstructed.size();
  total += cfg.penalty_per_unmatched * static_cast<double>(a > b ? a - b : b - a);
  return total;
}

}  // namespace resonant
