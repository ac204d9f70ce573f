#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "resonant/audio_io.hpp"
#include "resonant/rng.hpp"

namespace resonant {

struct ResonanceMode {
  double freq_hz = 0.0;
  double rel_amp_db = 0.0;  // relative to the dominant mode
  double decay_tau_s = 0.3;
};

struct StrikeModel {
  double duration_s = 0.010;  // decaying white-noise burst
  double amplitude = 0.6;
};

struct CoinProfile {
  std::string name;
  std::vector<ResonanceMode> modes;
  StrikeModel strike;
  double noise_floor = 5e-4;  // per-sample Gaussian sigma, full scale = 1
  double mode_amplitude = 0.3;  // linear amplitude of a 0 dB mode

  void validate(int sample_rate = kCanonicalSampleRate) const;
  std::size_t dominant_mode() const;
};

struct PerturbModel {
  std::vector<double> freq_jitter_sigma_hz;  // per mode; missing entries are 0
  std::vector<double> amp_jitter_sigma_db;
  double counterfeit_shift_fraction = 0.08;
  double counterfeit_amp_sigma_db = 6.0;
  double mode_drop_prob = 0.2;

  void validate() const;
};

// Default decay: 0.30 s below 5 kHz, 0.15 s above.
double default_decay_tau(double freq_hz);

// Australian Kangaroo 1 oz resonance table, dominant mode first.
CoinProfile kangaroo_profile();
// Per-mode specimen spread for the kangaroo table: frequency sigma from the
// three-specimen measurements, no amplitude jitter.
PerturbModel kangaroo_perturb();
// Second trainable class: kangaroo modes scaled by 0.8 with its own amplitude
// pattern. Synthetic stand-in, not a measured coin.
CoinProfile owl_profile();
// Class the models never see: kangaroo modes scaled by 1.25.
CoinProfile vienna_profile();
// Perturbation for a profile whose modes are `freq_scale` times the kangaroo's.
PerturbModel scaled_perturb(const PerturbModel& base, double freq_scale);

struct GroundTruth {
  std::vector<double> mode_freqs_hz;
  std::vector<double> mode_amps_db;
  std::size_t strike_index = 0;
};

struct SynthResult {
  AudioClip clip;
  GroundTruth truth;
};

struct SynthOptions {
  double silence_prefix_s = 0.25;
  double ring_seconds = 0.6;  // signal length after the strike
  int sample_rate = kCanonicalSampleRate;
  bool include_strike = true;
};

SynthResult synthesize(const CoinProfile& profile, const PerturbModel& jitter, Rng& rng,
                       const SynthOptions& options = {});

// Tungsten-core style fake: every mode moves by 0.5..1.0 x shift fraction
// (random sign), amplitudes shift by N(0, counterfeit_amp_sigma_db), and each
// non-dominant mode disappears with mode_drop_prob.
CoinProfile counterfeit_of(const CoinProfile& profile, const PerturbModel& perturb, Rng& rng);

struct CorpusCounts {
  std::size_t train_per_class = 20;
  std::size_t test = 10;          // genuine held-out, split across classes
  std::size_t counterfeit = 10;   // fakes of the trained classes
  std::size_t unknown = 10;       // genuine coins of an untrained class
};

struct ProfileEntry {
  CoinProfile profile;
  PerturbModel perturb;
};

struct CorpusSpec {
  std::vector<ProfileEntry> genuine;  // trained classes, at least 2
  ProfileEntry unknown;
  CorpusCounts counts;
  double min_prefix_s = 0.1;
  double max_prefix_s = 0.4;
};

CorpusSpec default_corpus_spec();

struct CorpusItem {
  std::string file_name;
  std::string label;
  bool genuine = true;
  Role role = Role::kUnspecified;
  SynthResult synth;
};

// Deterministic for a given seed regardless of thread count: each file draws
// from its own stream forked up front.
std::vector<CorpusItem> generate_corpus(const CorpusSpec& spec, std::uint64_t seed);

// Writes WAVs, manifest.json and ground_truth.json under `dir`.
DatasetManifest build_corpus(const CorpusSpec& spec, std::uint64_t seed, const std::filesystem::path& dir);

}  // namespace resonant
