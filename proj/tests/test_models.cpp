#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "oracles.hpp"
#include "resonant/config.hpp"
#include "resonant/errors.hpp"
#include "resonant/models.hpp"
#include "resonant/synth.hpp"

using namespace resonant;

namespace {

ModelBundle tiny_bundle(std::uint64_t seed = 1, std::size_t width = 64) {
  Rng rng(seed);
  ModelBundle b;
  b.preprocess.spectrum_width = width;
  b.match = MatchConfig{}.for_width(width);
  b.ae = make_autoencoder(AutoencoderDims::for_width(width), rng);
  b.classifier = make_classifier(b.ae.latent_dim(), {"kangaroo", "owl"}, rng);
  b.threshold = ThresholdModel::from_distances(std::vector<double>{10.0, 20.0, 30.0});
  return b;
}

Spectrum two_peaks(std::size_t width, std::size_t a, std::size_t b) {
  Spectrum sp;
  sp.bin_hz = 2.5 * 8820.0 / static_cast<double>(width);
  sp.bins.assign(width, 0.01);
  sp.bins[a] = 1.0;
  sp.bins[b] = 0.6;
  return sp;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("resonant_models_" + name);
}

PipelineConfig small_pipeline() {
  PipelineConfig cfg;
  cfg.preprocess.spectrum_width = 128;
  cfg.augment.coeffs = {0.8, 1.2};
  cfg.augment.variants_per_coeff = 2;
  cfg.autoencoder.epochs = 4;
  cfg.classifier.epochs = 10;
  return cfg;
}

std::vector<LabeledClip> small_clips() {
  std::vector<LabeledClip> clips;
  Rng rng(17);
  const auto kangaroo = kangaroo_profile();
  const auto owl = owl_profile();
  const auto perturb = kangaroo_perturb();
  for (int i = 0; i < 2; ++i) {
    clips.push_back({synthesize(kangaroo, perturb, rng).clip, "kangaroo"});
    clips.push_back({synthesize(owl, scaled_perturb(perturb, 0.8), rng).clip, "owl"});
  }
  return clips;
}

}  // namespace

TEST_CASE("threshold is mean plus three population sigmas") {
  const auto t = ThresholdModel::from_distances(std::vector<double>{1.0, 2.0, 3.0});
  CHECK(t.mu_d == doctest::Approx(2.0));
  CHECK(t.sigma_d == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(t.threshold == doctest::Approx(4.449489742783178));

  Rng rng(3);
  std::vector<double> d(500);
  for (double& v : d) v = rng.uniform(0.0, 50.0);
  const auto r = ThresholdModel::from_distances(d);
  CHECK(r.mu_d == doctest::Approx(oracle::mean(d)).epsilon(1e-12));
  CHECK(r.sigma_d == doctest::Approx(oracle::population_sd(d)).epsilon(1e-12));

  const auto c = ThresholdModel::from_distances(std::vector<double>{5.0, 5.0, 5.0});
  CHECK(c.sigma_d == 0.0);
  CHECK(c.accepts(5.0));
  CHECK_FALSE(c.accepts(std::nextafter(5.0, 6.0)));
  CHECK_THROWS_AS(ThresholdModel::from_distances(std::vector<double>{1.0}), ArgumentError);
}

TEST_CASE("autoencoder dimensions") {
  const auto full = AutoencoderDims::for_width(8820);
  CHECK(full.hidden1 == 1024);
  CHECK(full.hidden2 == 512);
  CHECK(full.latent == 128);
  const auto small = AutoencoderDims::for_width(1024);
  CHECK(small.input == 1024);
  CHECK(small.hidden1 == 119);
  CHECK(small.hidden2 == 59);
  CHECK(small.latent == 15);

  Rng rng(1);
  const auto ae = make_autoencoder(AutoencoderDims::for_width(64), rng);
  const auto& layers = ae.net.layers();
  REQUIRE(layers.size() == 6);
  CHECK(layers.front().dropout_p == kAutoencoderDropout);
  CHECK(layers[4].dropout_p == kAutoencoderDropout);
  CHECK(layers.back().activation == nn::Activation::kLinear);
  CHECK(layers.back().out == 64);
  CHECK(ae.latent_dim() == layers[2].out);
  CHECK(encode(ae, two_peaks(64, 3, 30)).size() == ae.latent_dim());
}

TEST_CASE("classifier needs two classes") {
  Rng rng(1);
  CHECK_THROWS_AS(make_classifier(4, {"only"}, rng), ArgumentError);
  const auto clf = make_classifier(4, {"a", "b", "c"}, rng);
  const auto p = classify(clf, std::vector<double>{0.1, 0.2, 0.3, 0.4});
  CHECK(p.index < 3);
  CHECK(p.label == clf.labels[p.index]);
  CHECK(p.confidence >= 1.0 / 3.0);
  CHECK(p.confidence <= 1.0);
}

TEST_CASE("reconstruction is clamped and the match uses re-normalized spectra") {
  const auto b = tiny_bundle();
  const auto sp = two_peaks(64, 5, 40);
  const auto rec = reconstruct(b.ae, sp);
  REQUIRE(rec.bins.size() == 64);
  for (double v : rec.bins) CHECK(v >= 0.0);
  const auto m = match_reconstruction(b.ae, sp, b.match);
  const double top = *std::max_element(m.reconstructed.bins.begin(), m.reconstructed.bins.end());
  if (top > 0.0) CHECK(top == doctest::Approx(1.0));
  CHECK(m.distance == doctest::Approx(set_distance(m.original_peaks, m.reconstructed_peaks, b.match)));
  CHECK(m.original_peaks.size() == 2);
}

TEST_CASE("verification decision follows the threshold") {
  auto b = tiny_bundle();
  const auto sp = two_peaks(64, 5, 40);
  const auto m = match_reconstruction(b.ae, sp, b.match);

  b.threshold.threshold = m.distance;
  auto r = verify_spectrum(sp, b);
  CHECK(r.authentic);
  CHECK(r.label.has_value());
  CHECK(r.confidence.has_value());

  b.threshold.threshold = std::nextafter(m.distance, 0.0);
  r = verify_spectrum(sp, b);
  CHECK_FALSE(r.authentic);
  CHECK_FALSE(r.label.has_value());
}

TEST_CASE("report rendering") {
  VerificationReport r;
  r.distance = 12.5;
  r.threshold = 40.0;
  r.authentic = true;
  r.label = "kangaroo";
  r.confidence = 0.93;
  r.spectrum_width = 1024;
  r.original_peaks.peaks.push_back({3770.0, 1.0, 1508});

  const auto j = nlohmann::json::parse(r.to_json("a.wav"));
  CHECK(j["file"] == "a.wav");
  CHECK(j["distance"] == 12.5);
  CHECK(j["threshold"] == 40.0);
  CHECK(j["authentic"] == true);
  CHECK(j["label"] == "kangaroo");
  CHECK(j["confidence"] == 0.93);
  CHECK(j["spectrum_width"] == 1024);
  CHECK_FALSE(nlohmann::json::parse(r.to_json()).contains("file"));

  const auto text = r.to_text("a.wav");
  CHECK(text.find("authentic (kangaroo") != std::string::npos);
  CHECK(text.find("reduced spectrum width 1024") != std::string::npos);
  CHECK(text.find("3770 Hz") != std::string::npos);

  r.authentic = false;
  r.label.reset();
  r.confidence.reset();
  r.spectrum_width = 8820;
  const auto fake = nlohmann::json::parse(r.to_json());
  CHECK(fake["label"].is_null());
  CHECK(fake["confidence"].is_null());
  CHECK(r.to_text().find("counterfeit (unrecognized)") == 0);
  CHECK(r.to_text().find("reduced") == std::string::npos);
}

TEST_CASE("bundle round trip is exact") {
  const auto b = tiny_bundle(5);
  const auto bytes = serialize_bundle(b);
  REQUIRE(bytes.size() > 12);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CRNG");
  CHECK(std::string(bytes.end() - 4, bytes.end()) == "END!");

  const auto back = deserialize_bundle(bytes);
  CHECK(back.classifier.labels == b.classifier.labels);
  CHECK(back.threshold.threshold == b.threshold.threshold);
  CHECK(back.threshold.mu_d == b.threshold.mu_d);
  CHECK(back.preprocess.spectrum_width == 64);
  CHECK(back.match.min_separation_bins == b.match.min_separation_bins);
  CHECK(back.config_hash() == b.config_hash());
  REQUIRE(back.ae.net.layers().size() == b.ae.net.layers().size());
  for (std::size_t l = 0; l < b.ae.net.layers().size(); ++l) {
    CHECK(back.ae.net.layers()[l].weights == b.ae.net.layers()[l].weights);
    CHECK(back.ae.net.layers()[l].dropout_p == b.ae.net.layers()[l].dropout_p);
  }
  CHECK(serialize_bundle(back) == bytes);

  const auto sp = two_peaks(64, 5, 40);
  CHECK(verify_spectrum(sp, back).distance == verify_spectrum(sp, b).distance);

  const auto path = temp_path("roundtrip.bin");
  save_bundle(b, path);
  CHECK(serialize_bundle(load_bundle(path)) == bytes);
  std::filesystem::remove(path);
}

TEST_CASE("damaged bundles raise FormatError") {
  const auto bytes = serialize_bundle(tiny_bundle());
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    CHECK_THROWS_AS(deserialize_bundle(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + cut)), FormatError);
  }
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_bundle(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_AS(deserialize_bundle(bad_version), FormatError);
  auto bad_hash = bytes;
  bad_hash[6] ^= 0xFF;
  CHECK_THROWS_AS(deserialize_bundle(bad_hash), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(deserialize_bundle(trailing), FormatError);

  const auto path = temp_path("truncated.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size() / 3));
  }
  try {
    load_bundle(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find(path.string()) != std::string::npos);
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_bundle(temp_path("does_not_exist.bin")), IoError);
}

TEST_CASE("compatibility check compares config hashes") {
  const auto b = tiny_bundle();
  CHECK_NOTHROW(check_compatible(b, b.preprocess, b.match));
  auto pre = b.preprocess;
  pre.spectrum_width = 128;
  CHECK_THROWS_AS(check_compatible(b, pre, b.match), CompatibilityError);
  auto match = b.match;
  match.w_f = 3.0;
  CHECK_THROWS_AS(check_compatible(b, b.preprocess, match), CompatibilityError);
}

TEST_CASE("end-to-end training on a handful of clips") {
  const auto cfg = small_pipeline();
  const auto clips = small_clips();
  const auto art = train_bundle(clips, cfg);
  const auto& b = art.bundle;
  CHECK(b.classifier.labels == std::vector<std::string>{"kangaroo", "owl"});
  CHECK(art.training_spectra == clips.size() * cfg.augment.output_count());
  CHECK(art.calibration_distances.size() == art.training_spectra);
  CHECK(art.autoencoder_history.loss.size() == cfg.autoencoder.epochs);
  CHECK(art.classifier_history.accuracy.size() == cfg.classifier.epochs);
  CHECK(b.threshold.threshold ==
        doctest::Approx(ThresholdModel::from_distances(art.calibration_distances).threshold));
  CHECK(b.preprocess.spectrum_width == 128);
  CHECK(b.match.min_separation_bins == 2);
  CHECK_FALSE(b.conformant());

  const auto again = train_bundle(clips, cfg);
  CHECK(serialize_bundle(again.bundle) == serialize_bundle(b));

  const auto report = verify(clips[0].clip, b);
  CHECK(report.spectrum_width == 128);
  CHECK(report.distance >= 0.0);

  std::vector<LabeledClip> one_class{clips[0], clips[2]};
  CHECK_THROWS_AS(train_bundle(one_class, cfg), ArgumentError);
  CHECK_THROWS_AS(train_bundle({}, cfg), ArgumentError);
}

TEST_CASE("verify names the preprocessing step on silent input") {
  const auto b = tiny_bundle(1, 8820 / 2);
  AudioClip silent;
  silent.samples.assign(44100, 0.0);
  try {
    verify(silent, b);
    FAIL("expected NoOnsetError");
  } catch (const NoOnsetError& e) {
    CHECK(std::string(e.what()).find("preprocessing") != std::string::npos);
  }
}
