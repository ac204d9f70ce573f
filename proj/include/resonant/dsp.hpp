#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "resonant/audio_io.hpp"

namespace resonant {

inline constexpr std::size_t kSegmentLength = 8820;
inline constexpr std::size_t kSpectrumLength = 8820;
inline constexpr std::size_t kFftLength = 2 * kSegmentLength;

struct PreprocessConfig {
  double onset_fraction = 0.10;
  double shift_seconds = 0.08;
  std::size_t segment_len = kSegmentLength;
  double target_rms = 0.1;
  // Spectrum bins fed to the models. Values below 8820 max-pool the full
  // spectrum down to this width (reduced-size runs, not paper-conformant).
  std::size_t spectrum_width = kSpectrumLength;

  void validate() const;
  bool conformant() const { return spectrum_width == kSpectrumLength && segment_len == kSegmentLength; }
};

struct Segment {
  std::vector<double> samples;
  int sample_rate = kCanonicalSampleRate;
};

// bins[i] holds FFT bin i + 1 (DC dropped), so bin i sits at (i + 1) * bin_hz.
struct Spectrum {
  std::vector<double> bins;
  double bin_hz = 0.0;

  double frequency_of(std::size_t index) const { return static_cast<double>(index + 1) * bin_hz; }
};

std::size_t detect_onset(const AudioClip& clip, const PreprocessConfig& cfg);
Segment extract_segment(const AudioClip& clip, std::size_t onset, const PreprocessConfig& cfg);

double rms(std::span<const double> samples);
inline double rms(const Segment& seg) { return rms(seg.samples); }

inline constexpr double kSilenceEpsilon = 1e-8;
Segment normalize_rms(const Segment& seg, const PreprocessConfig& cfg);

std::vector<double> hamming_window(std::size_t n);

// Hamming-windowed, zero-padded to twice the segment length, one-sided
// magnitudes at bins 1..segment_len.
Spectrum magnitude_spectrum(const Segment& seg);
Spectrum normalize_spectrum(const Spectrum& sp);
// Max-pools bins into `width` groups; bin_hz scales so the top bin keeps its
// frequency.
Spectrum pool_spectrum(const Spectrum& sp, std::size_t width);

// Onset, segment, RMS normalization. Rejects non-canonical sample rates.
Segment preprocess_clip(const AudioClip& clip, const PreprocessConfig& cfg);
// Window, FFT, pooling to cfg.spectrum_width and max normalization.
Spectrum segment_to_spectrum(const Segment& seg, const PreprocessConfig& cfg);
// Full chain from raw clip to model input.
Spectrum clip_to_spectrum(const AudioClip& clip, const PreprocessConfig& cfg);

struct Spectrogram {
  std::vector<std::vector<double>> frames;  // [time][frequency] magnitudes
  std::vector<double> times_s;              // frame start times
  std::vector<double> freqs_hz;             // bins 0..frame/2
};

Spectrogram spectrogram(const AudioClip& clip, std::size_t frame, std::size_t hop);

// Geometric over arithmetic mean of a spectrum; 1 for white noise, near 0 for
// tonal content.
double spectral_flatness(std::span<const double> magnitudes);

}  // namespace resonant
