#include "resonant/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "resonant/errors.hpp"
#include "resonant/fft.hpp"

namespace resonant {

void PreprocessConfig::validate() const {
  if (!(onset_fraction > 0.0 && onset_fraction < 1.0)) {
    throw ConfigError("onset_fraction must lie in (0, 1)");
  }
  if (!(shift_seconds >= 0.0)) throw ConfigError("shift_seconds must be non-negative");
  if (!(target_rms > 0.0)) throw ConfigError("target_rms must be positive");
  if (segment_len < 2) throw ConfigError("segment_len must be at least 2");
  if (spectrum_width < 16 || spectrum_width > segment_len) {
    throw ConfigError("spectrum_width must lie in [16, segment_len]");
  }
}

std::size_t detect_onset(const AudioClip& clip, const PreprocessConfig& cfg) {
  if (clip.samples.empty()) throw EmptyError("cannot detect onset in an empty clip");
  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::abs(s));
  if (peak <= 0.0) throw NoOnsetError("clip is silent; no onset found");
  const double threshold = cfg.onset_fraction * peak;
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    if (std::abs(clip.samples[i]) >= threshold) return i;
  }
  throw NoOnsetError("no sample reaches the onset threshold");
}

Segment extract_segment(const AudioClip& clip, std::size_t onset, const PreprocessConfig& cfg) {
  if (onset >= clip.samples.size()) throw ArgumentError("onset beyond end of clip");
  const auto shift = static_cast<std::size_t>(std::llround(cfg.shift_seconds * clip.sample_rate));
  Segment seg;
  seg.sample_rate = clip.sample_rate;
  seg.samples.assign(cfg.segment_len, 0.0);
  const std::size_t start = onset + shift;
  for (std::size_t i = 0; i < cfg.segment_len && start + i < clip.samples.size(); ++i) {
    seg.samples[i] = clip.samples[start + i];
  }
  return seg;
}

double rms(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

Segment normalize_rms(const Segment& seg, const PreprocessConfig& cfg) {
  const double level = rms(seg);
  if (level <= kSilenceEpsilon) throw SilentSegmentError("segment RMS is zero; nothing to normalize");
  const double gain = cfg.target_rms / level;
  Segment out = seg;
  for (double& s : out.samples) s *= gain;
  return out;
}

std::vector<double> hamming_window(std::size_t n) {
  if (n < 2) throw ArgumentError("Hamming window needs at least 2 points");
  std::vector<double> w(n);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    // Mirror the upper half so the window is exactly symmetric.
    const std::size_t j = std::min(k, n - 1 - k);
    w[k] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(j) / denom);
  }
  return w;
}

Spectrum magnitude_spectrum(const Segment& seg) {
  const std::size_t n = seg.samples.size();
  if (n < 2) throw ArgumentError("segment too short for a spectrum");
  static thread_local std::vector<double> window_cache;
  static thread_local std::unique_ptr<FftPlan> plan;
  if (window_cache.size() != n) window_cache = hamming_window(n);
  if (!plan || plan->size() != 2 * n) plan = std::make_unique<FftPlan>(2 * n);

  std::vector<double> windowed(n);
  for (std::size_t i = 0; i < n; ++i) windowed[i] = seg.samples[i] * window_cache[i];
  const auto coeffs = plan->forward_real(windowed);

  Spectrum sp;
  sp.bin_hz = static_cast<double>(seg.sample_rate) / static_cast<double>(2 * n);
  sp.bins.resize(n);
  for (std::size_t k = 1; k <= n; ++k) sp.bins[k - 1] = std::abs(coeffs[k]);
  return sp;
}

Spectrum normalize_spectrum(const Spectrum& sp) {
  Spectrum out = sp;
  const double peak = out.bins.empty() ? 0.0 : *std::max_element(out.bins.begin(), out.bins.end());
  if (peak > 0.0) {
    for (double& b : out.bins) b /= peak;
  }
  return out;
}

Spectrum pool_spectrum(const Spectrum& sp, std::size_t width) {
  const std::size_t n = sp.bins.size();
  if (width == 0 || width > n) throw ArgumentError("pooled width must lie in [1, bins]");
  if (width == n) return sp;
  Spectrum out;
  out.bin_hz = sp.bin_hz * static_cast<double>(n) / static_cast<double>(width);
  out.bins.resize(width);
  for (std::size_t g = 0; g < width; ++g) {
    const std::size_t lo = g * n / width;
    const std::size_t hi = (g + 1) * n / width;
    out.bins[g] = *std::max_element(sp.bins.begin() + static_cast<std::ptrdiff_t>(lo),
                                    sp.bins.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return out;
}

Segment preprocess_clip(const AudioClip& clip, const PreprocessConfig& cfg) {
  if (clip.sample_rate != kCanonicalSampleRate) {
    throw UnsupportedError("sample rate " + std::to_string(clip.sample_rate) + " Hz is not supported (expected " +
                           std::to_string(kCanonicalSampleRate) + " Hz)");
  }
  const std::size_t onset = detect_onset(clip, cfg);
  return normalize_rms(extract_segment(clip, onset, cfg), cfg);
}

Spectrum segment_to_spectrum(const Segment& seg, const PreprocessConfig& cfg) {
  return normalize_spectrum(pool_spectrum(magnitude_spectrum(seg), cfg.spectrum_width));
}

Spectrum clip_to_spectrum(const AudioClip& clip, const PreprocessConfig& cfg) {
  return segment_to_spectrum(preprocess_clip(clip, cfg), cfg);
}

Spectrogram spectrogram(const AudioClip& clip, std::size_t frame, std::size_t hop) {
  if (frame < 2) throw ArgumentError("spectrogram frame must be at least 2 samples");
  if (hop == 0) throw ArgumentError("spectrogram hop must be positive");
  if (frame > clip.samples.size()) throw ArgumentError("spectrogram frame longer than clip");
  if (clip.sample_rate <= 0) throw ArgumentError("sample rate must be positive");

  const auto window = hamming_window(frame);
  const FftPlan plan(frame);
  const std::size_t bins = frame / 2 + 1;
  Spectrogram out;
  for (std::size_t k = 0; k < bins; ++k) {
    out.freqs_hz.push_back(static_cast<double>(k) * clip.sample_rate / static_cast<double>(frame));
  }
  std::vector<double> buf(frame);
  for (std::size_t start = 0; start + frame <= clip.samples.size(); start += hop) {
    for (std::size_t i = 0; i < frame; ++i) buf[i] = clip.samples[start + i] * window[i];
    const auto coeffs = plan.forward_real(buf);
    std::vector<double> mags(bins);
    for (std::size_t k = 0; k < bins; ++k) mags[k] = std::abs(coeffs[k]);
    out.frames.push_back(std::move(mags));
    out.times_s.push_back(static_cast<double>(start) / clip.sample_rate);
  }
  return out;
}

double spectral_flatness(std::span<const double> magnitudes) {
  if (magnitudes.empty()) return 0.0;
  double log_sum = 0.0, sum = 0.0;
  constexpr double kFloor = 1e-300;
  for (double m : magnitudes) {
    log_sum += std::log(std::max(m, kFloor));
    sum += m;
  }
  const double n = static_cast<double>(magnitudes.size());
  if (sum <= 0.0) return 0.0;
  return std::exp(log_sum / n) / (sum / n);
}

}  // namespace resonant
