#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "resonant/augment.hpp"
#include "resonant/dsp.hpp"
#include "resonant/nn.hpp"
#include "resonant/peaks.hpp"
#include "resonant/synth.hpp"

namespace resonant {

// Every tunable of the workflow. Text form is INI-like:
//
//   [general]       seed
//   [preprocess]    onset_fraction, shift_seconds, segment_len, target_rms, spectrum_width
//   [match]         w_f, w_a, penalty_per_unmatched, min_height_fraction,
//                   min_separation_bins, prominence_mad_factor, max_peaks
//   [augment]       coeffs (comma list), noise_sigma, variants_per_coeff
//   [autoencoder]   epochs, batch_size, shuffle, learning_rate, beta1, beta2, epsilon
//   [classifier]    same keys as [autoencoder]
//   [synth]         train_per_class, test, counterfeit, unknown, min_prefix_s,
//                   max_prefix_s, genuine_profiles (comma list), unknown_profile
//   [profile.NAME]  modes (freq/dB/tau list), freq_jitter_hz, amp_jitter_db,
//                   noise_floor, mode_amplitude, strike_duration_s, strike_amplitude,
//                   counterfeit_shift_fraction, counterfeit_amp_sigma_db, mode_drop_prob
//
// '#' and ';' start comments. Unknown sections or keys are errors.
struct PipelineConfig {
  std::uint64_t seed = 7;
  PreprocessConfig preprocess;
  MatchConfig match;
  AugmentConfig augment;
  nn::TrainConfig autoencoder;
  nn::TrainConfig classifier;

  std::map<std::string, ProfileEntry> profiles;  // built-ins plus [profile.*] sections
  std::vector<std::string> genuine_profiles{"kangaroo", "owl"};
  std::string unknown_profile = "vienna";
  CorpusCounts counts;
  double min_prefix_s = 0.1;
  double max_prefix_s = 0.4;

  PipelineConfig();

  void validate() const;
  CorpusSpec corpus_spec() const;
  // Peak-matching settings adjusted for the configured spectrum width.
  MatchConfig effective_match() const { return match.for_width(preprocess.spectrum_width); }
};

// Applies `text` on top of `base`.
PipelineConfig parse_config(const std::string& text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});
// Applies one "section.key=value" override (the CLI --set form).
void apply_override(PipelineConfig& cfg, const std::string& assignment);
std::string format_config(const PipelineConfig& cfg);

// Canonical text of the settings a trained model depends on (preprocessing
// and peak matching) and its 64-bit FNV-1a hash.
std::string model_config_text(const PreprocessConfig& pre, const MatchConfig& match);
std::uint64_t fnv1a64(const std::string& text);
std::uint64_t model_config_hash(const PreprocessConfig& pre, const MatchConfig& match);

// Parses the [preprocess]/[match] sections written by model_config_text.
void parse_model_config(const std::string& text, PreprocessConfig& pre, MatchConfig& match);

}  // namespace resonant
