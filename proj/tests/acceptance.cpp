// Acceptance gate: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails.
//
//   acceptance                      all criteria, end-to-end suite at full width
//   acceptance --width 1024         CI variant of the end-to-end suite
//   acceptance --only 4,5,6         a subset

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "resonant/analysis.hpp"
#include "resonant/augment.hpp"
#include "resonant/config.hpp"
#include "resonant/dsp.hpp"
#include "resonant/fft.hpp"
#include "resonant/models.hpp"
#include "resonant/nn.hpp"
#include "resonant/peaks.hpp"
#include "resonant/synth.hpp"

using namespace resonant;

namespace {

// Tolerances and budgets.
constexpr double kFftRelTol = 1e-6;
constexpr double kGradRelTol = 1e-4;
constexpr double kEigenTol = 1e-8;
constexpr double kRmsTol = 1e-9;
constexpr double kPairTol = 1e-9;
constexpr double kThresholdTol = 1e-12;
constexpr double kPeakTolHz = 2.5;
constexpr double kAcceptRate = 0.90;
constexpr double kMedianRatio = 10.0;
constexpr double kClassifierAccuracy = 0.95;
constexpr double kFullWidthBudgetS = 600.0;
constexpr double kCiBudgetS = 60.0;
constexpr double kKernelBudgetS = 60.0;
constexpr double kDeterminismBudgetS = 60.0;
constexpr std::size_t kAugmentVariants = 1000;
constexpr double kAugmentZ = 4.0;  // allowed deviation in standard errors

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

double median_of(std::vector<double> v) { return v.empty() ? std::numeric_limits<double>::quiet_NaN() : median(v); }

// Criterion 1

Outcome numeric_kernels() {
  const auto t0 = Clock::now();
  Rng rng(2024);

  double fft_err = 0.0;
  const FftPlan plan(kSegmentLength);
  for (int s = 0; s < 20; ++s) {
    std::vector<double> seg(kSegmentLength);
    for (double& v : seg) v = rng.normal();
    const auto fast = plan.forward_real(seg);
    const auto slow = oracle::dft_real(seg, kSegmentLength);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < slow.size(); ++k) {
      num += std::norm(fast[k] - slow[k]);
      den += std::norm(slow[k]);
    }
    fft_err = std::max(fft_err, std::sqrt(num / den));
  }

  // Central differences on a 20-8-4-8-20 autoencoder with MSE loss.
  const nn::LayerSpec specs[] = {{8, nn::Activation::kRelu}, {4, nn::Activation::kRelu}, {8, nn::Activation::kRelu},
                                 {20, nn::Activation::kLinear}};
  auto net = nn::Network::build(20, specs, rng);
  for (auto& layer : net.mutable_layers()) {
    for (double& b : layer.biases) b = rng.uniform(0.05, 0.2);
  }
  nn::Matrix x(3, 20);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  auto fwd = nn::forward(net, x, nn::Mode::kEval);
  const auto grads = nn::backward(net, fwd.cache, nn::mse_loss(x, fwd.output).grad);
  double grad_err = 0.0;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    for (int which = 0; which < 2; ++which) {
      const std::size_t count = which == 0 ? net.layers()[l].weights.size() : net.layers()[l].biases.size();
      for (std::size_t i = 0; i < count; ++i) {
        auto& layer = net.mutable_layers()[l];
        double& p = which == 0 ? layer.weights[i] : layer.biases[i];
        const double numeric =
            oracle::central_difference([&] { return nn::mse_loss(x, nn::predict(net, x)).loss; }, p, 1e-6);
        const double analytic = which == 0 ? grads.layers[l].weights[i] : grads.layers[l].biases[i];
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-7});
        grad_err = std::max(grad_err, std::abs(numeric - analytic) / scale);
      }
    }
  }

  double eig_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::array<double, 9> a{};
    for (int i = 0; i < 3; ++i) {
      for (int j = i; j < 3; ++j) a[i * 3 + j] = a[j * 3 + i] = rng.uniform(-1.0, 1.0);
    }
    auto expected = oracle::eigenvalues_3x3(a);
    std::reverse(expected.begin(), expected.end());
    const auto eig = jacobi_eigen(std::vector<double>(a.begin(), a.end()), 3);
    for (int k = 0; k < 3; ++k) eig_err = std::max(eig_err, std::abs(eig.values[k] - expected[k]));
  }

  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = fft_err < kFftRelTol && grad_err < kGradRelTol && eig_err < kEigenTol && elapsed < kKernelBudgetS;
  o.detail = fmt("fft rel err %.2e (< %.0e), backprop max rel err %.2e (< %.0e), jacobi max err %.2e (< %.0e), %.1f s",
                 fft_err, kFftRelTol, grad_err, kGradRelTol, eig_err, kEigenTol, elapsed);
  return o;
}

// Criterion 2

Outcome formula_identities() {
  Rng rng(77);
  PreprocessConfig pre;
  double rms_err = 0.0;
  for (int s = 0; s < 20; ++s) {
    Segment seg;
    seg.samples.resize(kSegmentLength);
    const double scale = std::pow(10.0, rng.uniform(-4.0, 0.0));
    for (double& v : seg.samples) v = scale * rng.normal();
    rms_err = std::max(rms_err, std::abs(rms(normalize_rms(seg, pre)) - 0.1));
  }
  MatchConfig match;
  const double pair = pair_distance({1000.0, 0.9, 400}, {1010.0, 0.7, 404}, match);
  const double pair_err = std::abs(pair - std::sqrt(200.02));
  const auto t = ThresholdModel::from_distances(std::vector<double>{1.0, 2.0, 3.0});
  const double expected = 2.0 + 3.0 * std::sqrt(2.0 / 3.0);
  const double thr_err = std::abs(t.threshold - expected);

  Outcome o;
  o.pass = rms_err <= kRmsTol && pair_err <= kPairTol && thr_err <= kThresholdTol;
  o.detail = fmt("post-RMS max |rms - 0.1| %.1e, pair distance %.12f vs sqrt(200.02) (err %.1e), threshold %.12f "
                 "(err %.1e)",
                 rms_err, pair, pair_err, t.threshold, thr_err);
  return o;
}

// Criterion 3

Outcome peak_fidelity() {
  auto profile = kangaroo_profile();
  profile.noise_floor = 0.0;
  Rng rng(3);
  SynthOptions opt;
  opt.include_strike = false;
  const auto clip = synthesize(profile, PerturbModel{}, rng, opt).clip;
  const auto sp = clip_to_spectrum(clip, PreprocessConfig{});
  const auto peaks = find_peaks(sp, MatchConfig{});

  auto nearest = [](const PeakSet& set, double f) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : set.peaks) best = std::min(best, std::abs(p.freq_hz - f));
    return best;
  };
  std::ostringstream detail;
  bool pass = true;
  for (double f : {3770.00, 8648.75, 15258.12}) {
    const double err = nearest(peaks, f);
    const bool ok = err <= kPeakTolHz;
    pass &= ok;
    if (std::isinf(err)) {
      detail << f << " Hz not found; ";
    } else {
      detail << f << " Hz " << (ok ? "within" : "off by") << ' ' << err << " Hz; ";
    }
  }
  // Merge outcome pinned: 3505.62 Hz sits 106 bins from 3770 Hz and is suppressed.
  const bool merged = nearest(peaks, 3505.62) > kPeakTolHz;
  pass &= merged;
  detail << "3505.62 Hz " << (merged ? "merged into 3770 Hz (pinned)" : "NOT merged (regression)");

  // Information only: where the 15258.12 Hz mode sits relative to the gate.
  MatchConfig relaxed;
  relaxed.min_height_fraction = 0.03;
  const double relaxed_err = nearest(find_peaks(sp, relaxed), 15258.12);
  const auto idx = static_cast<std::size_t>(std::llround(15258.12 / sp.bin_hz)) - 1;
  double local = 0.0;
  for (std::size_t i = idx - 2; i <= idx + 2; ++i) local = std::max(local, sp.bins[i]);
  detail << "  [info: 15258.12 Hz peak height " << local << " of max vs gate " << MatchConfig{}.min_height_fraction
         << "; a 3% gate finds it " << (relaxed_err <= kPeakTolHz ? "within one bin" : "no closer than ")
         << (relaxed_err <= kPeakTolHz ? "" : std::to_string(relaxed_err) + " Hz") << "]";
  return {pass, detail.str()};
}

// Criterion 4, 5, 6

struct EndToEnd {
  std::size_t width = kSpectrumLength;
  double train_seconds = 0.0;
  double total_seconds = 0.0;
  TrainingArtifacts art;
  std::vector<double> genuine_d, counterfeit_d, unknown_d;
  std::size_t genuine_accepted = 0, counterfeit_rejected = 0, unknown_rejected = 0;
  std::size_t test_correct = 0, test_total = 0;
  std::vector<std::vector<double>> train_latents;
  std::vector<std::string> train_labels;
};

EndToEnd run_end_to_end(std::size_t width) {
  const auto t0 = Clock::now();
  EndToEnd e;
  e.width = width;
  PipelineConfig cfg;  // seed 7, 2 x 20 train, 10 test, 10 counterfeit, 10 unknown, 30 epochs, batch 4, lr 0.0005
  cfg.preprocess.spectrum_width = width;
  cfg.validate();
  const auto items = generate_corpus(cfg.corpus_spec(), cfg.seed);
  std::vector<LabeledClip> train;
  for (const auto& it : items) {
    if (it.role == Role::kTrain) train.push_back({it.synth.clip, it.label});
  }
  const auto tt = Clock::now();
  e.art = train_bundle(train, cfg);
  e.train_seconds = seconds_since(tt);
  const auto& bundle = e.art.bundle;

  for (const auto& it : items) {
    if (it.role == Role::kTrain) {
      e.train_latents.push_back(encode(bundle.ae, clip_to_spectrum(it.synth.clip, bundle.preprocess)));
      e.train_labels.push_back(it.label);
      continue;
    }
    const auto sp = clip_to_spectrum(it.synth.clip, bundle.preprocess);
    const auto report = verify_spectrum(sp, bundle);
    switch (it.role) {
      case Role::kTest: {
        e.genuine_d.push_back(report.distance);
        e.genuine_accepted += report.authentic;
        ++e.test_total;
        e.test_correct += classify(bundle.classifier, encode(bundle.ae, sp)).label == it.label;
        break;
      }
      case Role::kCounterfeit:
        e.counterfeit_d.push_back(report.distance);
        e.counterfeit_rejected += !report.authentic;
        break;
      case Role::kUnknown:
        e.unknown_d.push_back(report.distance);
        e.unknown_rejected += !report.authentic;
        break;
      default:
        break;
    }
  }
  e.total_seconds = seconds_since(t0);
  return e;
}

double rate(std::size_t k, std::size_t n) { return n == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(n); }

Outcome separation(const EndToEnd& e) {
  const double g = rate(e.genuine_accepted, e.genuine_d.size());
  const double c = rate(e.counterfeit_rejected, e.counterfeit_d.size());
  const double u = rate(e.unknown_rejected, e.unknown_d.size());
  const double mg = median_of(e.genuine_d), mc = median_of(e.counterfeit_d);
  const double ratio = mc / mg;
  const double budget = e.width == kSpectrumLength ? kFullWidthBudgetS : kCiBudgetS;
  Outcome o;
  o.pass = g >= kAcceptRate && c >= kAcceptRate && u >= kAcceptRate && ratio > kMedianRatio &&
           e.total_seconds < budget;
  o.detail = fmt("genuine accepted %zu/%zu, counterfeits rejected %zu/%zu, unknown rejected %zu/%zu (each >= %.0f%%); "
                 "median distance counterfeit %.3g / genuine %.3g = %.2fx (> %.0fx); threshold %.4g; %.0f s (< %.0f s)",
                 e.genuine_accepted, e.genuine_d.size(), e.counterfeit_rejected, e.counterfeit_d.size(),
                 e.unknown_rejected, e.unknown_d.size(), 100 * kAcceptRate, mc, mg, ratio, kMedianRatio,
                 e.art.bundle.threshold.threshold, e.total_seconds, budget);
  return o;
}

Outcome training_curves_ok(const EndToEnd& e) {
  const auto& loss = e.art.autoencoder_history.loss;
  bool finite = !loss.empty();
  for (double v : loss) finite &= std::isfinite(v);
  for (double v : e.art.classifier_history.loss) finite &= std::isfinite(v);
  const bool decreasing = loss.size() >= 2 && loss.back() < loss.front();
  const double acc = rate(e.test_correct, e.test_total);
  Outcome o;
  o.pass = finite && decreasing && acc >= kClassifierAccuracy;
  o.detail = fmt("autoencoder loss epoch 1 %.4g -> epoch %zu %.4g, %s; classifier held-out accuracy %zu/%zu = %.2f "
                 "(>= %.2f)",
                 loss.empty() ? NAN : loss.front(), loss.size(), loss.empty() ? NAN : loss.back(),
                 finite ? "all finite" : "NON-FINITE values", e.test_correct, e.test_total, acc, kClassifierAccuracy);
  return o;
}

Outcome pca_separation(const EndToEnd& e) {
  const auto pca = pca_2d(e.train_latents, e.train_labels);
  std::vector<std::string> classes;
  for (const auto& l : pca.labels) {
    if (std::find(classes.begin(), classes.end(), l) == classes.end()) classes.push_back(l);
  }
  std::vector<std::array<double, 2>> centroid(classes.size(), {0.0, 0.0});
  std::vector<std::size_t> count(classes.size(), 0);
  auto cls = [&](const std::string& l) {
    return static_cast<std::size_t>(std::find(classes.begin(), classes.end(), l) - classes.begin());
  };
  for (std::size_t i = 0; i < pca.projected.size(); ++i) {
    const auto c = cls(pca.labels[i]);
    centroid[c][0] += pca.projected[i][0];
    centroid[c][1] += pca.projected[i][1];
    ++count[c];
  }
  for (std::size_t c = 0; c < classes.size(); ++c) {
    centroid[c][0] /= static_cast<double>(count[c]);
    centroid[c][1] /= static_cast<double>(count[c]);
  }
  // Within-class spread: mean distance of a point to its class centroid.
  double spread = 0.0;
  for (std::size_t i = 0; i < pca.projected.size(); ++i) {
    const auto& ce = centroid[cls(pca.labels[i])];
    spread += std::hypot(pca.projected[i][0] - ce[0], pca.projected[i][1] - ce[1]);
  }
  spread /= static_cast<double>(pca.projected.size());
  const double between =
      classes.size() == 2 ? std::hypot(centroid[0][0] - centroid[1][0], centroid[0][1] - centroid[1][1]) : 0.0;
  Outcome o;
  o.pass = classes.size() == 2 && between > spread;
  o.detail = fmt("centroid distance %.4g vs mean within-class spread %.4g over %zu latents (explained variance %.2f, "
                 "%.2f)",
                 between, spread, pca.projected.size(), pca.explained_variance[0], pca.explained_variance[1]);
  return o;
}

// Criterion 7

Outcome determinism() {
  const auto t0 = Clock::now();
  PipelineConfig cfg;
  cfg.preprocess.spectrum_width = 1024;
  cfg.counts = {5, 10, 0, 0};
  const auto items = generate_corpus(cfg.corpus_spec(), cfg.seed);
  std::vector<LabeledClip> train;
  std::vector<AudioClip> fixed;
  for (const auto& it : items) {
    if (it.role == Role::kTrain) train.push_back({it.synth.clip, it.label});
    if (it.role == Role::kTest) fixed.push_back(it.synth.clip);
  }
  const auto a = train_bundle(train, cfg);
  const auto b = train_bundle(train, cfg);
  const bool identical = serialize_bundle(a.bundle) == serialize_bundle(b.bundle);

  const auto path = std::filesystem::temp_directory_path() / "resonant_acceptance_bundle.bin";
  save_bundle(a.bundle, path);
  const auto loaded = load_bundle(path);
  std::filesystem::remove(path);
  std::size_t same = 0;
  for (const auto& clip : fixed) {
    const auto x = verify(clip, a.bundle);
    const auto y = verify(clip, loaded);
    same += x.distance == y.distance && x.authentic == y.authentic && x.label == y.label &&
            x.confidence == y.confidence && x.to_json() == y.to_json();
  }
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = identical && same == fixed.size() && fixed.size() == 10 && elapsed < kDeterminismBudgetS;
  o.detail = fmt("two trainings with seed %llu %s; save->load->verify identical on %zu/%zu clips; %.1f s (< %.0f s)",
                 static_cast<unsigned long long>(cfg.seed), identical ? "byte-identical" : "DIFFER", same,
                 fixed.size(), elapsed, kDeterminismBudgetS);
  return o;
}

// Criterion 8

Outcome augmentation_stats() {
  Rng rng(8);
  Segment seg;
  seg.samples.resize(kSegmentLength);
  for (double& v : seg.samples) v = rng.normal();
  seg = normalize_rms(seg, PreprocessConfig{});
  AugmentConfig cfg;
  cfg.coeffs = {1.0};
  cfg.variants_per_coeff = kAugmentVariants;
  const auto variants = augment_segment(seg, cfg, rng);
  std::vector<double> residual;
  residual.reserve(variants.size() * kSegmentLength);
  for (const auto& v : variants) {
    for (std::size_t i = 0; i < kSegmentLength; ++i) residual.push_back(v.samples[i] - seg.samples[i]);
  }
  const double n = static_cast<double>(residual.size());
  const double sigma = cfg.noise_sigma;
  const double m = oracle::mean(residual);
  const double sd = oracle::population_sd(residual);
  const double var_ratio = sd * sd / (sigma * sigma);
  // Standard errors: sigma / sqrt(n) for the mean, sqrt(2 / n) for the variance ratio.
  const double mean_tol = kAugmentZ * sigma / std::sqrt(n);
  const double var_tol = kAugmentZ * std::sqrt(2.0 / n);
  Outcome o;
  o.pass = variants.size() == kAugmentVariants && std::abs(m) < mean_tol && std::abs(var_ratio - 1.0) < var_tol;
  o.detail = fmt("%zu variants, residual mean %.3e (|.| < %.3e), variance / sigma^2 %.5f (|.-1| < %.5f)",
                 variants.size(), m, mean_tol, var_ratio, var_tol);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::size_t width = kSpectrumLength;
  std::vector<int> only;
  app.add_option("--width", width, "spectrum width for the end-to-end suite (8820 or 1024)")
      ->check(CLI::IsMember({std::size_t{8820}, std::size_t{1024}}));
  app.add_option("--only", only, "criteria to run")->delimiter(',')->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8}
                                              : std::set<int>(only.begin(), only.end());

  bool all = true;
  auto report = [&](int id, const std::string& title, const Outcome& o) {
    all &= o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str());
    std::fflush(stdout);
  };
  auto run = [&](int id, const std::string& title, const std::function<Outcome()>& f) {
    if (!selected.count(id)) return;
    try {
      report(id, title, f());
    } catch (const std::exception& e) {
      report(id, title, {false, std::string("exception: ") + e.what()});
    }
  };

  run(1, "numeric kernels vs oracles", numeric_kernels);
  run(2, "formula identities", formula_identities);
  run(3, "peak extraction fidelity", peak_fidelity);
  if (selected.count(4) || selected.count(5) || selected.count(6)) {
    const std::string tag = width == kSpectrumLength ? "full width" : "width " + std::to_string(width);
    try {
      const auto e = run_end_to_end(width);
      run(4, "end-to-end separation, " + tag, [&] { return separation(e); });
      run(5, "training curves, " + tag, [&] { return training_curves_ok(e); });
      run(6, "PCA separation, " + tag, [&] { return pca_separation(e); });
    } catch (const std::exception& ex) {
      for (int id : {4, 5, 6}) {
        if (selected.count(id)) report(id, tag, {false, std::string("exception: ") + ex.what()});
      }
    }
  }
  run(7, "determinism and persistence", determinism);
  run(8, "augmentation statistics", augmentation_stats);
  return all ? 0 : 1;
}
