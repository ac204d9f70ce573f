#include "resonant/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "resonant/augment.hpp"
#include "resonant/errors.hpp"

namespace resonant {

namespace {

constexpr char kMagic[4] = {'C', 'R', 'N', 'G'};
constexpr char kTrailer[4] = {'E', 'N', 'D', '!'};
constexpr std::size_t kInferenceChunk = 16;

std::size_t scaled(std::size_t full, double factor, std::size_t floor) {
  return std::max<std::size_t>(floor, static_cast<std::size_t>(std::llround(static_cast<double>(full) * factor)));
}

nn::Matrix stack(const std::vector<Spectrum>& spectra, std::size_t first, std::size_t count) {
  const std::size_t width = spectra[first].bins.size();
  nn::Matrix m(count, width);
  for (std::size_t r = 0; r < count; ++r) {
    const auto& bins = spectra[first + r].bins;
    if (bins.size() != width) throw ShapeError("spectra differ in width");
    std::copy(bins.begin(), bins.end(), m.row(r).begin());
  }
  return m;
}

Spectrum to_spectrum(std::span<const double> values, double bin_hz) {
  Spectrum sp;
  sp.bin_hz = bin_hz;
  sp.bins.assign(values.begin(), values.end());
  for (double& v : sp.bins) v = std::max(v, 0.0);
  return sp;
}

ReconstructionMatch finish_match(const Spectrum& original, Spectrum reconstructed, const MatchConfig& match) {
  ReconstructionMatch r;
  r.original = original;
  r.reconstructed = normalize_spectrum(reconstructed);
  r.original_peaks = find_peaks(r.original, match);
  r.reconstructed_peaks = find_peaks(r.reconstructed, match);
  r.distance = set_distance(r.original_peaks, r.reconstructed_peaks, match);
  return r;
}

// Little-endian byte writer/reader for the bundle file.
class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  const std::uint8_t* bytes(std::size_t n) {
    if (n > in_.size() - pos_) throw FormatError("model bundle is truncated");
    const auto* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename T>
  T uint() {
    const auto* p = bytes(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(p[i]) << (8 * i));
    return v;
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::string str() {
    const auto n = uint<std::uint32_t>();
    const auto* p = bytes(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

void write_network(Writer& w, const nn::Network& net) {
  w.uint(static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& layer : net.layers()) {
    w.uint(static_cast<std::uint32_t>(layer.in));
    w.uint(static_cast<std::uint32_t>(layer.out));
    w.uint(static_cast<std::uint8_t>(layer.activation));
    w.f64(layer.dropout_p);
    for (double v : layer.weights) w.f64(v);
    for (double v : layer.biases) w.f64(v);
  }
}

nn::Network read_network(Reader& r) {
  const auto count = r.uint<std::uint32_t>();
  if (count == 0 || count > 64) throw FormatError("implausible layer count in model bundle");
  std::vector<nn::DenseLayer> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    const auto in = r.uint<std::uint32_t>();
    const auto out = r.uint<std::uint32_t>();
    const auto act = r.uint<std::uint8_t>();
    const double dropout = r.f64();
    if (act > 1) throw FormatError("unknown activation in model bundle");
    if (in == 0 || out == 0 || in > (1u << 20) || out > (1u << 20)) throw FormatError("implausible layer size");
    nn::DenseLayer layer(in, out, static_cast<nn::Activation>(act), dropout);
    for (double& v : layer.weights) v = r.f64();
    for (double& v : layer.biases) v = r.f64();
    layers.push_back(std::move(layer));
  }
  try {
    return nn::Network(std::move(layers));
  } catch (const ShapeError& e) {
    throw FormatError(std::string("model bundle: ") + e.what());
  }
}

std::string fmt_number(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace

AutoencoderDims AutoencoderDims::for_width(std::size_t width) {
  AutoencoderDims d;
  d.input = width;
  if (width != kSpectrumLength) {
    const double f = static_cast<double>(width) / static_cast<double>(kSpectrumLength);
    d.hidden1 = scaled(1024, f, 8);
    d.hidden2 = scaled(512, f, 8);
    d.latent = scaled(128, f, 4);
  }
  return d;
}

Autoencoder make_autoencoder(const AutoencoderDims& d, Rng& rng) {
  using nn::Activation;
  const nn::LayerSpec specs[] = {
      {d.hidden1, Activation::kRelu, kAutoencoderDropout},
      {d.hidden2, Activation::kRelu, 0.0},
      {d.latent, Activation::kRelu, 0.0},
      {d.hidden2, Activation::kRelu, 0.0},
      {d.hidden1, Activation::kRelu, kAutoencoderDropout},
      {d.input, Activation::kLinear, 0.0},
  };
  return Autoencoder{nn::Network::build(d.input, specs, rng), 3};
}

Classifier make_classifier(std::size_t latent_dim, std::vector<std::string> labels, Rng& rng) {
  if (labels.size() < 2) throw ArgumentError("classifier needs at least two classes");
  const nn::LayerSpec specs[] = {
      {kClassifierHidden, nn::Activation::kRelu, 0.0},
      {labels.size(), nn::Activation::kLinear, 0.0},
  };
  return Classifier{nn::Network::build(latent_dim, specs, rng), std::move(labels)};
}

ThresholdModel ThresholdModel::from_distances(std::span<const double> distances) {
  if (distances.size() < 2) throw ArgumentError("threshold calibration needs at least two distances");
  ThresholdModel t;
  double sum = 0.0;
  for (double d : distances) sum += d;
  t.mu_d = sum / static_cast<double>(distances.size());
  double sq = 0.0;
  for (double d : distances) sq += (d - t.mu_d) * (d - t.mu_d);
  t.sigma_d = std::sqrt(sq / static_cast<double>(distances.size()));
  t.threshold = t.mu_d + 3.0 * t.sigma_d;
  return t;
}

AutoencoderTraining train_autoencoder(const std::vector<Spectrum>& spectra, const nn::TrainConfig& cfg, Rng& rng) {
  if (spectra.empty()) throw ArgumentError("autoencoder training needs at least one spectrum");
  const std::size_t width = spectra.front().bins.size();
  nn::Dataset data;
  data.inputs.reserve(spectra.size());
  for (const auto& sp : spectra) {
    if (sp.bins.size() != width) throw ShapeError("training spectra differ in width");
    data.inputs.push_back(sp.bins);
  }
  AutoencoderTraining out;
  out.ae = make_autoencoder(AutoencoderDims::for_width(width), rng);
  out.history = nn::train(out.ae.net, data, nn::LossKind::kMse, cfg, rng);
  return out;
}

Spectrum reconstruct(const Autoencoder& ae, const Spectrum& sp) {
  return to_spectrum(nn::predict(ae.net, sp.bins), sp.bin_hz);
}

std::vector<double> encode(const Autoencoder& ae, const Spectrum& sp) {
  if (sp.bins.size() != ae.input_dim()) throw ShapeError("spectrum width does not match the autoencoder");
  return nn::predict_layers(ae.net, nn::Matrix::from_row(sp.bins), 0, ae.encoder_layers).data;
}

std::vector<std::vector<double>> encode_all(const Autoencoder& ae, const std::vector<Spectrum>& spectra) {
  std::vector<std::vector<double>> out;
  out.reserve(spectra.size());
  for (std::size_t first = 0; first < spectra.size(); first += kInferenceChunk) {
    const std::size_t count = std::min(kInferenceChunk, spectra.size() - first);
    const auto latents = nn::predict_layers(ae.net, stack(spectra, first, count), 0, ae.encoder_layers);
    for (std::size_t r = 0; r < count; ++r) {
      const auto row = latents.row(r);
      out.emplace_back(row.begin(), row.end());
    }
  }
  return out;
}

ReconstructionMatch match_reconstruction(const Autoencoder& ae, const Spectrum& sp, const MatchConfig& match) {
  return finish_match(sp, reconstruct(ae, sp), match);
}

Calibration calibrate_threshold(const Autoencoder& ae, const std::vector<Spectrum>& spectra, const MatchConfig& match) {
  if (spectra.size() < 2) throw ArgumentError("threshold calibration needs at least two spectra");
  Calibration cal;
  cal.distances.resize(spectra.size());
  for (std::size_t first = 0; first < spectra.size(); first += kInferenceChunk) {
    const std::size_t count = std::min(kInferenceChunk, spectra.size() - first);
    const auto recon = nn::predict(ae.net, stack(spectra, first, count));
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(count); ++r) {
      const std::size_t i = first + static_cast<std::size_t>(r);
      cal.distances[i] =
          finish_match(spectra[i], to_spectrum(recon.row(static_cast<std::size_t>(r)), spectra[i].bin_hz), match)
              .distance;
    }
  }
  cal.threshold = ThresholdModel::from_distances(cal.distances);
  return cal;
}

ClassifierTraining train_classifier(const Autoencoder& ae, const std::vector<Spectrum>& spectra,
                                    const std::vector<std::size_t>& labels, std::vector<std::string> label_names,
                                    const nn::TrainConfig& cfg, Rng& rng) {
  if (spectra.size() != labels.size()) throw ShapeError("one label per spectrum required");
  if (spectra.empty()) throw ArgumentError("classifier training needs data");
  std::vector<bool> present(label_names.size(), false);
  for (std::size_t l : labels) {
    if (l >= label_names.size()) throw ArgumentError("label index out of range");
    present[l] = true;
  }
  if (std::count(present.begin(), present.end(), true) < 2) {
    throw ArgumentError("classifier training needs at least two classes in the data");
  }
  nn::Dataset data;
  data.inputs = encode_all(ae, spectra);
  data.labels = labels;
  ClassifierTraining out;
  out.classifier = make_classifier(ae.latent_dim(), std::move(label_names), rng);
  out.history = nn::train(out.classifier.net, data, nn::LossKind::kSoftmaxCrossEntropy, cfg, rng);
  return out;
}

Prediction classify(const Classifier& clf, std::span<const double> latent) {
  const auto probs = nn::softmax(nn::predict(clf.net, latent));
  Prediction p;
  p.index = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  p.label = clf.labels.at(p.index);
  p.confidence = probs[p.index];
  return p;
}

void check_compatible(const ModelBundle& bundle, const PreprocessConfig& pre, const MatchConfig& match) {
  const auto expected = bundle.config_hash();
  const auto actual = model_config_hash(pre, match);
  if (expected != actual) {
    std::ostringstream msg;
    msg << "settings do not match the model bundle (bundle config hash " << std::hex << expected << ", requested "
        << actual << ")";
    throw CompatibilityError(msg.str());
  }
}

std::vector<std::uint8_t> serialize_bundle(const ModelBundle& bundle) {
  Writer w;
  w.bytes(kMagic, 4);
  w.uint(ModelBundle::kFormatVersion);
  const std::string text = model_config_text(bundle.preprocess, bundle.match);
  w.uint(fnv1a64(text));
  w.str(text);
  w.uint(static_cast<std::uint32_t>(bundle.classifier.labels.size()));
  for (const auto& label : bundle.classifier.labels) w.str(label);
  w.f64(bundle.threshold.mu_d);
  w.f64(bundle.threshold.sigma_d);
  w.f64(bundle.threshold.threshold);
  w.uint(static_cast<std::uint32_t>(bundle.ae.encoder_layers));
  write_network(w, bundle.ae.net);
  write_network(w, bundle.classifier.net);
  w.bytes(kTrailer, 4);
  return w.take();
}

ModelBundle deserialize_bundle(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(r.bytes(4), kMagic, 4) != 0) throw FormatError("not a model bundle (bad magic)");
  const auto version = r.uint<std::uint16_t>();
  if (version != ModelBundle::kFormatVersion) {
    throw FormatError("unsupported model bundle version " + std::to_string(version));
  }
  const auto stored_hash = r.uint<std::uint64_t>();
  const std::string text = r.str();
  if (fnv1a64(text) != stored_hash) throw FormatError("model bundle config snapshot is corrupt (hash mismatch)");

  ModelBundle bundle;
  try {
    parse_model_config(text, bundle.preprocess, bundle.match);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("model bundle config: ") + e.what());
  }
  const auto label_count = r.uint<std::uint32_t>();
  if (label_count > 4096) throw FormatError("implausible label count in model bundle");
  for (std::uint32_t i = 0; i < label_count; ++i) bundle.classifier.labels.push_back(r.str());
  bundle.threshold.mu_d = r.f64();
  bundle.threshold.sigma_d = r.f64();
  bundle.threshold.threshold = r.f64();
  bundle.ae.encoder_layers = r.uint<std::uint32_t>();
  bundle.ae.net = read_network(r);
  bundle.classifier.net = read_network(r);
  if (std::memcmp(r.bytes(4), kTrailer, 4) != 0 || !r.done()) throw FormatError("model bundle has a bad trailer");

  const auto& ae_layers = bundle.ae.net.layers();
  if (bundle.ae.encoder_layers == 0 || bundle.ae.encoder_layers >= ae_layers.size()) {
    throw FormatError("model bundle encoder split is invalid");
  }
  if (bundle.ae.input_dim() != bundle.preprocess.spectrum_width ||
      bundle.ae.net.output_dim() != bundle.preprocess.spectrum_width) {
    throw FormatError("autoencoder width does not match the stored spectrum width");
  }
  if (bundle.classifier.net.input_dim() != bundle.ae.latent_dim() ||
      bundle.classifier.net.output_dim() != bundle.classifier.labels.size()) {
    throw FormatError("classifier shape does not match the autoencoder or label table");
  }
  return bundle;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  const auto bytes = serialize_bundle(bundle);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model bundle " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_bundle(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string VerificationReport::to_json(const std::string& file) const {
  nlohmann::ordered_json j;
  if (!file.empty()) j["file"] = file;
  j["distance"] = distance;
  j["threshold"] = threshold;
  j["authentic"] = authentic;
  j["label"] = label ? nlohmann::ordered_json(*label) : nlohmann::ordered_json(nullptr);
  j["confidence"] = confidence ? nlohmann::ordered_json(*confidence) : nlohmann::ordered_json(nullptr);
  j["spectrum_width"] = spectrum_width;
  return j.dump();
}

std::string VerificationReport::to_text(const std::string& file) const {
  std::ostringstream out;
  if (!file.empty()) out << file << ": ";
  if (authentic) {
    out << "authentic";
    if (label) out << " (" << *label << ", confidence " << fmt_number(confidence.value_or(0.0)) << ")";
    out << "  distance " << fmt_number(distance) << " <= threshold " << fmt_number(threshold);
  } else {
    out << "counterfeit (unrecognized)  distance " << fmt_number(distance) << " > threshold " << fmt_number(threshold);
  }
  if (spectrum_width != kSpectrumLength) out << "  [reduced spectrum width " << spectrum_width << "]";
  out << '\n';
  auto table = [&](const char* title, const PeakSet& set) {
    out << "  " << title << ":";
    if (set.empty()) out << " none";
    for (const auto& p : set.peaks) out << "  " << fmt_number(p.freq_hz) << " Hz @ " << fmt_number(p.amplitude);
    out << '\n';
  };
  table("original peaks", original_peaks);
  table("reconstructed peaks", reconstructed_peaks);
  return out.str();
}

VerificationReport verify_spectrum(const Spectrum& sp, const ModelBundle& bundle) {
  const auto m = match_reconstruction(bundle.ae, sp, bundle.match);
  VerificationReport report;
  report.distance = m.distance;
  report.threshold = bundle.threshold.threshold;
  report.authentic = bundle.threshold.accepts(m.distance);
  report.original_peaks = m.original_peaks;
  report.reconstructed_peaks = m.reconstructed_peaks;
  report.spectrum_width = bundle.preprocess.spectrum_width;
  if (report.authentic) {
    const auto pred = classify(bundle.classifier, encode(bundle.ae, sp));
    report.label = pred.label;
    report.confidence = pred.confidence;
  }
  return report;
}

VerificationReport verify(const AudioClip& clip, const ModelBundle& bundle) {
  Spectrum sp;
  try {
    sp = clip_to_spectrum(clip, bundle.preprocess);
  } catch (const SilentSegmentError& e) {
    throw SilentSegmentError(std::string("verification preprocessing: ") + e.what());
  } catch (const NoOnsetError& e) {
    throw NoOnsetError(std::string("verification preprocessing: ") + e.what());
  }
  return verify_spectrum(sp, bundle);
}

std::vector<Spectrum> augmented_spectra(const AudioClip& clip, const PipelineConfig& cfg, Rng& rng) {
  const Segment seg = preprocess_clip(clip, cfg.preprocess);
  std::vector<Spectrum> out;
  for (const auto& variant : augment_segment(seg, cfg.augment, rng)) {
    out.push_back(segment_to_spectrum(variant, cfg.preprocess));
  }
  return out;
}

TrainingArtifacts train_bundle(const std::vector<LabeledClip>& clips, const PipelineConfig& cfg) {
  cfg.validate();
  if (clips.empty()) throw ArgumentError("no training clips");
  std::vector<std::string> names;
  std::vector<std::size_t> clip_labels;
  for (const auto& c : clips) {
    auto it = std::find(names.begin(), names.end(), c.label);
    if (it == names.end()) it = names.insert(names.end(), c.label);
    clip_labels.push_back(static_cast<std::size_t>(it - names.begin()));
  }

  Rng root(cfg.seed);
  Rng augment_root = root.fork();
  Rng ae_rng = root.fork();
  Rng clf_rng = root.fork();

  std::vector<std::uint64_t> seeds(clips.size());
  for (auto& s : seeds) s = augment_root.next_u64();
  std::vector<std::vector<Spectrum>> per_clip(clips.size());
  std::vector<std::string> errors(clips.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(clips.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      Rng rng(seeds[k]);
      per_clip[k] = augmented_spectra(clips[k].clip, cfg, rng);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  for (std::size_t k = 0; k < clips.size(); ++k) {
    if (!errors[k].empty()) throw ArgumentError("training clip " + std::to_string(k) + ": " + errors[k]);
  }

  std::vector<Spectrum> spectra;
  std::vector<std::size_t> labels;
  for (std::size_t k = 0; k < clips.size(); ++k) {
    for (auto& sp : per_clip[k]) {
      spectra.push_back(std::move(sp));
      labels.push_back(clip_labels[k]);
    }
  }

  TrainingArtifacts out;
  out.training_spectra = spectra.size();
  auto ae = train_autoencoder(spectra, cfg.autoencoder, ae_rng);
  out.autoencoder_history = std::move(ae.history);
  out.bundle.preprocess = cfg.preprocess;
  out.bundle.match = cfg.effective_match();
  auto cal = calibrate_threshold(ae.ae, spectra, out.bundle.match);
  out.bundle.threshold = cal.threshold;
  out.calibration_distances = std::move(cal.distances);
  auto clf = train_classifier(ae.ae, spectra, labels, names, cfg.classifier, clf_rng);
  out.classifier_history = std::move(clf.history);
  out.bundle.ae = std::move(ae.ae);
  out.bundle.classifier = std::move(clf.classifier);
  return out;
}

}  // namespace resonant
