#include "resonant/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "resonant/errors.hpp"

namespace resonant {

namespace fs = std::filesystem;

namespace {

double at(const std::vector<double>& v, std::size_t i) { return i < v.size() ? v[i] : 0.0; }

std::string format_hz(double f) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f Hz", f);
  return buf;
}

}  // namespace

void CoinProfile::validate(int sample_rate) const {
  if (modes.empty()) throw ArgumentError("profile '" + name + "' has no modes");
  const double nyquist = sample_rate / 2.0;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const auto& m = modes[k];
    if (!(m.freq_hz > 0.0) || !(m.freq_hz < nyquist)) {
      throw ArgumentError("profile '" + name + "' mode " + std::to_string(k + 1) + " at " + format_hz(m.freq_hz) +
                          " is outside (0, " + format_hz(nyquist) + ")");
    }
    if (!(m.decay_tau_s > 0.0)) {
      throw ArgumentError("profile '" + name + "' mode " + std::to_string(k + 1) + " needs a positive decay");
    }
    if (!std::isfinite(m.rel_amp_db)) throw ArgumentError("profile '" + name + "' has a non-finite amplitude");
  }
  if (!(noise_floor >= 0.0) || !(strike.duration_s >= 0.0) || !(strike.amplitude >= 0.0) ||
      !(mode_amplitude > 0.0)) {
    throw ArgumentError("profile '" + name + "' has a negative level or duration");
  }
}

std::size_t CoinProfile::dominant_mode() const {
  std::size_t best = 0;
  for (std::size_t k = 1; k < modes.size(); ++k) {
    if (modes[k].rel_amp_db > modes[best].rel_amp_db) best = k;
  }
  return best;
}

void PerturbModel::validate() const {
  for (double s : freq_jitter_sigma_hz) {
    if (!(s >= 0.0)) throw ArgumentError("frequency jitter must be non-negative");
  }
  for (double s : amp_jitter_sigma_db) {
    if (!(s >= 0.0)) throw ArgumentError("amplitude jitter must be non-negative");
  }
  if (!(counterfeit_shift_fraction >= 0.0 && counterfeit_shift_fraction < 1.0)) {
    throw ArgumentError("counterfeit_shift_fraction must lie in [0, 1)");
  }
  if (!(counterfeit_amp_sigma_db >= 0.0)) throw ArgumentError("counterfeit_amp_sigma_db must be non-negative");
  if (!(mode_drop_prob >= 0.0 && mode_drop_prob <= 1.0)) throw ArgumentError("mode_drop_prob must lie in [0, 1]");
}

double default_decay_tau(double freq_hz) { return freq_hz < 5000.0 ? 0.30 : 0.15; }

CoinProfile kangaroo_profile() {
  CoinProfile p;
  p.name = "kangaroo";
  for (auto [f, db] : {std::pair{3770.00, 0.00}, {3505.62, -0.36}, {8648.75, -6.78}, {15258.12, -22.18}}) {
    p.modes.push_back({f, db, default_decay_tau(f)});
  }
  return p;
}

PerturbModel kangaroo_perturb() {
  PerturbModel m;
  // Modes in table order (3770, 3505, 8649, 15258); the spread measurements
  // list the two low modes in ascending frequency, hence the swap.
  m.freq_jitter_sigma_hz = {47.28, 55.07, 5.62, 7.33};
  // Amplitude spread is left to augmentation; any per-specimen jitter makes
  // the near-equal 3770/3505 pair trade places at random.
  m.amp_jitter_sigma_db = {0.0, 0.0, 0.0, 0.0};
  return m;
}

CoinProfile owl_profile() {
  CoinProfile p;
  p.name = "owl";
  const auto base = kangaroo_profile();
  const double amps[] = {-4.0, 0.0, -3.0, -20.0};
  for (std::size_t k = 0; k < base.modes.size(); ++k) {
    const double f = base.modes[k].freq_hz * 0.8;
    p.modes.push_back({f, amps[k], default_decay_tau(f)});
  }
  return p;
}

CoinProfile vienna_profile() {
  CoinProfile p = kangaroo_profile();
  p.name = "vienna";
  for (auto& m : p.modes) {
    m.freq_hz *= 1.25;
    m.decay_tau_s = default_decay_tau(m.freq_hz);
  }
  return p;
}

PerturbModel scaled_perturb(const PerturbModel& base, double freq_scale) {
  PerturbModel m = base;
  for (double& s : m.freq_jitter_sigma_hz) s *= freq_scale;
  return m;
}

SynthResult synthesize(const CoinProfile& profile, const PerturbModel& jitter, Rng& rng, const SynthOptions& options) {
  profile.validate(options.sample_rate);
  jitter.validate();
  if (!(options.silence_prefix_s >= 0.0) || !(options.ring_seconds > 0.0)) {
    throw ArgumentError("synthesis durations must be non-negative");
  }
  const double fs = options.sample_rate;
  const double nyquist = fs / 2.0;

  SynthResult result;
  auto& truth = result.truth;
  struct Oscillator {
    double amp, freq, tau, phase;
  };
  std::vector<Oscillator> osc;
  for (std::size_t k = 0; k < profile.modes.size(); ++k) {
    const auto& m = profile.modes[k];
    double f = m.freq_hz + at(jitter.freq_jitter_sigma_hz, k) * rng.normal();
    f = std::clamp(f, 1.0, nyquist - 1.0);
    const double db = m.rel_amp_db + at(jitter.amp_jitter_sigma_db, k) * rng.normal();
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    osc.push_back({profile.mode_amplitude * std::pow(10.0, db / 20.0), f, m.decay_tau_s, phase});
    truth.mode_freqs_hz.push_back(f);
    truth.mode_amps_db.push_back(db);
  }

  const auto prefix = static_cast<std::size_t>(std::llround(options.silence_prefix_s * fs));
  const auto ring = static_cast<std::size_t>(std::llround(options.ring_seconds * fs));
  truth.strike_index = prefix;

  auto& clip = result.clip;
  clip.sample_rate = options.sample_rate;
  clip.samples.assign(prefix + ring, 0.0);
  const double strike_len = profile.strike.duration_s * fs;
  const double strike_decay = std::max(strike_len / 4.0, 1.0);
  for (std::size_t n = 0; n < clip.samples.size(); ++n) {
    double s = profile.noise_floor > 0.0 ? profile.noise_floor * rng.normal() : 0.0;
    if (n >= prefix) {
      const double i = static_cast<double>(n - prefix);
      const double t = i / fs;
      if (options.include_strike && i < strike_len) {
        s += profile.strike.amplitude / 3.0 * std::exp(-i / strike_decay) * rng.normal();
      }
      for (const auto& o : osc) {
        s += o.amp * std::exp(-t / o.tau) * std::sin(2.0 * std::numbers::pi * o.freq * t + o.phase);
      }
    }
    clip.samples[n] = s;
  }
  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.95) {
    const double g = 0.95 / peak;
    for (double& s : clip.samples) s *= g;
  }
  return result;
}

CoinProfile counterfeit_of(const CoinProfile& profile, const PerturbModel& perturb, Rng& rng) {
  perturb.validate();
  CoinProfile fake = profile;
  fake.name = profile.name + "-counterfeit";
  fake.modes.clear();
  const std::size_t dominant = profile.dominant_mode();
  const double nyquist = kCanonicalSampleRate / 2.0;
  for (std::size_t k = 0; k < profile.modes.size(); ++k) {
    ResonanceMode m = profile.modes[k];
    const double u = rng.uniform(0.5, 1.0) * perturb.counterfeit_shift_fraction;
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    m.freq_hz *= 1.0 + sign * u;
    m.rel_amp_db += perturb.counterfeit_amp_sigma_db * rng.normal();
    const bool drop = k != dominant && rng.bernoulli(perturb.mode_drop_prob);
    if (drop || m.freq_hz >= nyquist) continue;
    fake.modes.push_back(m);
  }
  return fake;
}

CorpusSpec default_corpus_spec() {
  CorpusSpec spec;
  const auto base = kangaroo_perturb();
  spec.genuine.push_back({kangaroo_profile(), base});
  spec.genuine.push_back({owl_profile(), scaled_perturb(base, 0.8)});
  spec.unknown = {vienna_profile(), scaled_perturb(base, 1.25)};
  return spec;
}

std::vector<CorpusItem> generate_corpus(const CorpusSpec& spec, std::uint64_t seed) {
  if (spec.genuine.size() < 2) throw ArgumentError("corpus needs at least two genuine classes");
  for (const auto& g : spec.genuine) g.profile.validate();
  spec.unknown.profile.validate();

  struct Job {
    CorpusItem item;
    const ProfileEntry* source;
    bool fake;
  };
  std::vector<Job> jobs;
  auto add = [&](const ProfileEntry& src, Role role, bool genuine, bool fake, std::size_t index) {
    CorpusItem item;
    item.label = src.profile.name;
    item.genuine = genuine;
    item.role = role;
    char name[128];
    std::snprintf(name, sizeof name, "%s_%s_%03zu.wav", role_name(role).c_str(), src.profile.name.c_str(), index);
    item.file_name = name;
    jobs.push_back({std::move(item), &src, fake});
  };
  const std::size_t classes = spec.genuine.size();
  for (const auto& g : spec.genuine) {
    for (std::size_t i = 0; i < spec.counts.train_per_class; ++i) add(g, Role::kTrain, true, false, i);
  }
  for (std::size_t i = 0; i < spec.counts.test; ++i) add(spec.genuine[i % classes], Role::kTest, true, false, i);
  for (std::size_t i = 0; i < spec.counts.counterfeit; ++i) {
    add(spec.genuine[i % classes], Role::kCounterfeit, false, true, i);
  }
  for (std::size_t i = 0; i < spec.counts.unknown; ++i) add(spec.unknown, Role::kUnknown, true, false, i);

  Rng root(seed);
  std::vector<std::uint64_t> seeds(jobs.size());
  for (auto& s : seeds) s = root.next_u64();

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(jobs.size()); ++j) {
    auto& job = jobs[static_cast<std::size_t>(j)];
    Rng rng(seeds[static_cast<std::size_t>(j)]);
    SynthOptions options;
    options.silence_prefix_s = rng.uniform(spec.min_prefix_s, spec.max_prefix_s);
    const CoinProfile profile = job.fake ? counterfeit_of(job.source->profile, job.source->perturb, rng)
                                         : job.source->profile;
    job.item.synth = synthesize(profile, job.source->perturb, rng, options);
  }

  std::vector<CorpusItem> items;
  items.reserve(jobs.size());
  for (auto& job : jobs) items.push_back(std::move(job.item));
  return items;
}

DatasetManifest build_corpus(const CorpusSpec& spec, std::uint64_t seed, const fs::path& dir) {
  const auto items = generate_corpus(spec, seed);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.seed = seed;
  for (const auto& g : spec.genuine) manifest.labels.push_back(g.profile.name);
  manifest.labels.push_back(spec.unknown.profile.name);

  nlohmann::ordered_json truth = nlohmann::ordered_json::object();
  truth["seed"] = seed;
  truth["files"] = nlohmann::ordered_json::array();
  for (const auto& item : items) {
    const fs::path path = dir / item.file_name;
    save_wav(item.synth.clip, path);
    manifest.entries.push_back({path, item.label, item.genuine, item.role});
    nlohmann::ordered_json rec;
    rec["path"] = item.file_name;
    rec["label"] = item.label;
    rec["genuine"] = item.genuine;
    rec["role"] = role_name(item.role);
    rec["strike_index"] = item.synth.truth.strike_index;
    rec["mode_freqs_hz"] = item.synth.truth.mode_freqs_hz;
    rec["mode_amps_db"] = item.synth.truth.mode_amps_db;
    truth["files"].push_back(std::move(rec));
  }
  save_manifest(manifest, dir / "manifest.json");
  std::ofstream out(dir / "ground_truth.json");
  if (!out) throw IoError("cannot write ground truth sidecar in " + dir.string());
  out << truth.dump(2) << '\n';
  return manifest;
}

}  // namespace resonant
