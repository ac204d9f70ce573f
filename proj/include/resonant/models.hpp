#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "resonant/audio_io.hpp"
#include "resonant/config.hpp"
#include "resonant/dsp.hpp"
#include "resonant/nn.hpp"
#include "resonant/peaks.hpp"

namespace resonant {

// Layer widths for a spectrum of the given width. At 8820 this is
// 8820-1024-512-128-512-1024-8820; narrower spectra scale every hidden width
// by width / 8820.
struct AutoencoderDims {
  std::size_t input = kSpectrumLength;
  std::size_t hidden1 = 1024;
  std::size_t hidden2 = 512;
  std::size_t latent = 128;

  static AutoencoderDims for_width(std::size_t width);
};

inline constexpr double kAutoencoderDropout = 0.1;
inline constexpr std::size_t kClassifierHidden = 64;

struct Autoencoder {
  nn::Network net;
  std::size_t encoder_layers = 3;

  std::size_t input_dim() const { return net.input_dim(); }
  std::size_t latent_dim() const { return net.layers()[encoder_layers - 1].out; }
};

Autoencoder make_autoencoder(const AutoencoderDims& dims, Rng& rng);

struct Classifier {
  nn::Network net;
  std::vector<std::string> labels;
};

Classifier make_classifier(std::size_t latent_dim, std::vector<std::string> labels, Rng& rng);

struct ThresholdModel {
  double mu_d = 0.0;
  double sigma_d = 0.0;  // population standard deviation
  double threshold = 0.0;  // mu_d + 3 sigma_d

  static ThresholdModel from_distances(std::span<const double> distances);
  bool accepts(double distance) const { return distance <= threshold; }
};

struct AutoencoderTraining {
  Autoencoder ae;
  nn::TrainHistory history;
};

// Spectra must all come from genuine coins and share one width.
AutoencoderTraining train_autoencoder(const std::vector<Spectrum>& spectra, const nn::TrainConfig& cfg, Rng& rng);

// Eval-mode reconstruction, clamped at zero.
Spectrum reconstruct(const Autoencoder& ae, const Spectrum& sp);
std::vector<double> encode(const Autoencoder& ae, const Spectrum& sp);
std::vector<std::vector<double>> encode_all(const Autoencoder& ae, const std::vector<Spectrum>& spectra);

struct ReconstructionMatch {
  Spectrum original;
  Spectrum reconstructed;  // clamped and re-normalized to a unit maximum
  PeakSet original_peaks;
  PeakSet reconstructed_peaks;
  double distance = 0.0;
};

ReconstructionMatch match_reconstruction(const Autoencoder& ae, const Spectrum& sp, const MatchConfig& match);

struct Calibration {
  ThresholdModel threshold;
  std::vector<double> distances;
};

Calibration calibrate_threshold(const Autoencoder& ae, const std::vector<Spectrum>& spectra, const MatchConfig& match);

struct ClassifierTraining {
  Classifier classifier;
  nn::TrainHistory history;
};

// Trains on frozen-encoder latents. `labels[i]` indexes `label_names`.
ClassifierTraining train_classifier(const Autoencoder& ae, const std::vector<Spectrum>& spectra,
                                    const std::vector<std::size_t>& labels, std::vector<std::string> label_names,
                                    const nn::TrainConfig& cfg, Rng& rng);

struct Prediction {
  std::size_t index = 0;
  std::string label;
  double confidence = 0.0;
};

Prediction classify(const Classifier& clf, std::span<const double> latent);

struct ModelBundle {
  static constexpr std::uint16_t kFormatVersion = 1;

  Autoencoder ae;
  Classifier classifier;
  ThresholdModel threshold;
  PreprocessConfig preprocess;
  MatchConfig match;  // already adjusted for preprocess.spectrum_width

  std::uint64_t config_hash() const { return model_config_hash(preprocess, match); }
  bool conformant() const { return preprocess.conformant(); }
};

// Throws CompatibilityError if the caller's settings hash differently from the
// ones the bundle was trained with.
void check_compatible(const ModelBundle& bundle, const PreprocessConfig& pre, const MatchConfig& match);

std::vector<std::uint8_t> serialize_bundle(const ModelBundle& bundle);
ModelBundle deserialize_bundle(const std::vector<std::uint8_t>& bytes);
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

struct VerificationReport {
  double distance = 0.0;
  double threshold = 0.0;
  bool authentic = false;
  std::optional<std::string> label;
  std::optional<double> confidence;
  PeakSet original_peaks;
  PeakSet reconstructed_peaks;
  std::size_t spectrum_width = kSpectrumLength;

  std::string to_json(const std::string& file = {}) const;
  std::string to_text(const std::string& file = {}) const;
};

VerificationReport verify_spectrum(const Spectrum& sp, const ModelBundle& bundle);
VerificationReport verify(const AudioClip& clip, const ModelBundle& bundle);

// Everything the training stage produces besides the bundle itself.
struct TrainingArtifacts {
  ModelBundle bundle;
  nn::TrainHistory autoencoder_history;
  nn::TrainHistory classifier_history;
  std::vector<double> calibration_distances;
  std::size_t training_spectra = 0;
};

struct LabeledClip {
  AudioClip clip;
  std::string label;
};

// Preprocess -> augment -> spectra -> autoencoder -> threshold -> classifier.
// Clips must be genuine; labels become the classifier's classes in order of
// first appearance.
TrainingArtifacts train_bundle(const std::vector<LabeledClip>& clips, const PipelineConfig& cfg);

// Augmented training spectra for one clip (deterministic given rng).
std::vector<Spectrum> augmented_spectra(const AudioClip& clip, const PipelineConfig& cfg, Rng& rng);

}  // namespace resonant
