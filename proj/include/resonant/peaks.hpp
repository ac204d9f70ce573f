#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "resonant/dsp.hpp"

namespace resonant {

struct Peak {
  double freq_hz = 0.0;
  double amplitude = 0.0;
  std::size_t bin = 0;  // FFT bin number; freq_hz == bin * bin_hz
};

struct PeakSet {
  std::vector<Peak> peaks;  // descending amplitude, at most max_peaks

  std::size_t size() const { return peaks.size(); }
  bool empty() const { return peaks.empty(); }
};

struct MatchConfig {
  double w_f = 2.0;
  double w_a = 0.5;
  double penalty_per_unmatched = 100.0;
  double min_height_fraction = 0.15;
  std::size_t min_separation_bins = 150;
  double prominence_mad_factor = 5.0;
  std::size_t max_peaks = 10;

  void validate() const;
  // Separation expressed in full-resolution bins, rescaled for a pooled
  // spectrum of the given width.
  MatchConfig for_width(std::size_t spectrum_width) const;
};

double median(std::vector<double> values);
double mad(std::span<const double> values);

// Topographic prominence of the sample at `index`; array ends act as valleys.
double prominence(std::span<const double> bins, std::size_t index);

PeakSet find_peaks(const Spectrum& sp, const MatchConfig& cfg);

double pair_distance(const Peak& p, const Peak& q, const MatchConfig& cfg);
double set_distance(const PeakSet& original, const PeakSet& reconstructed, const MatchConfig& cfg);

}  // namespace resonant
