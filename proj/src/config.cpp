#include "resonant/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "resonant/errors.hpp"

namespace resonant {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + fmt(values[i]);
  return out;
}

double to_double(const std::string& where, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError(where + ": '" + v + "' is not a number");
  return out;
}

std::uint64_t to_u64(const std::string& where, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigError(where + ": '" + v + "' is not a non-negative integer");
  }
  return out;
}

bool to_bool(const std::string& where, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(where + ": '" + v + "' is not a boolean");
}

std::vector<double> to_list(const std::string& where, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(where, item));
  return out;
}

void set_train(nn::TrainConfig& t, const std::string& key, const std::string& where, const std::string& v) {
  if (key == "epochs") t.epochs = to_u64(where, v);
  else if (key == "batch_size") t.batch_size = to_u64(where, v);
  else if (key == "shuffle") t.shuffle = to_bool(where, v);
  else if (key == "learning_rate") t.adam.lr = to_double(where, v);
  else if (key == "beta1") t.adam.beta1 = to_double(where, v);
  else if (key == "beta2") t.adam.beta2 = to_double(where, v);
  else if (key == "epsilon") t.adam.eps = to_double(where, v);
  else throw ConfigError(where + ": unknown key");
}

void set_preprocess(PreprocessConfig& p, const std::string& key, const std::string& where, const std::string& v) {
  if (key == "onset_fraction") p.onset_fraction = to_double(where, v);
  else if (key == "shift_seconds") p.shift_seconds = to_double(where, v);
  else if (key == "segment_len") p.segment_len = to_u64(where, v);
  else if (key == "target_rms") p.target_rms = to_double(where, v);
  else if (key == "spectrum_width") p.spectrum_width = to_u64(where, v);
  else throw ConfigError(where + ": unknown key");
}

void set_match(MatchConfig& m, const std::string& key, const std::string& where, const std::string& v) {
  if (key == "w_f") m.w_f = to_double(where, v);
  else if (key == "w_a") m.w_a = to_double(where, v);
  else if (key == "penalty_per_unmatched") m.penalty_per_unmatched = to_double(where, v);
  else if (key == "min_height_fraction") m.min_height_fraction = to_double(where, v);
  else if (key == "min_separation_bins") m.min_separation_bins = to_u64(where, v);
  else if (key == "prominence_mad_factor") m.prominence_mad_factor = to_double(where, v);
  else if (key == "max_peaks") m.max_peaks = to_u64(where, v);
  else throw ConfigError(where + ": unknown key");
}

void set_profile(ProfileEntry& e, const std::string& key, const std::string& where, const std::string& v) {
  auto& p = e.profile;
  auto& j = e.perturb;
  if (key == "modes") {
    p.modes.clear();
    for (const auto& item : split(v, ',')) {
      const auto parts = split(item, '/');
      if (parts.size() < 2 || parts.size() > 3) throw ConfigError(where + ": modes are freq/dB[/tau]");
      ResonanceMode m;
      m.freq_hz = to_double(where, parts[0]);
      m.rel_amp_db = to_double(where, parts[1]);
      m.decay_tau_s = parts.size() == 3 ? to_double(where, parts[2]) : default_decay_tau(m.freq_hz);
      p.modes.push_back(m);
    }
  } else if (key == "freq_jitter_hz") j.freq_jitter_sigma_hz = to_list(where, v);
  else if (key == "amp_jitter_db") j.amp_jitter_sigma_db = to_list(where, v);
  else if (key == "noise_floor") p.noise_floor = to_double(where, v);
  else if (key == "mode_amplitude") p.mode_amplitude = to_double(where, v);
  else if (key == "strike_duration_s") p.strike.duration_s = to_double(where, v);
  else if (key == "strike_amplitude") p.strike.amplitude = to_double(where, v);
  else if (key == "counterfeit_shift_fraction") j.counterfeit_shift_fraction = to_double(where, v);
  else if (key == "counterfeit_amp_sigma_db") j.counterfeit_amp_sigma_db = to_double(where, v);
  else if (key == "mode_drop_prob") j.mode_drop_prob = to_double(where, v);
  else throw ConfigError(where + ": unknown key");
}

void assign(PipelineConfig& cfg, const std::string& section, const std::string& key, const std::string& value) {
  const std::string where = "[" + section + "] " + key;
  if (section == "general") {
    if (key == "seed") cfg.seed = to_u64(where, value);
    else throw ConfigError(where + ": unknown key");
  } else if (section == "preprocess") {
    set_preprocess(cfg.preprocess, key, where, value);
  } else if (section == "match") {
    set_match(cfg.match, key, where, value);
  } else if (section == "augment") {
    if (key == "coeffs") cfg.augment.coeffs = to_list(where, value);
    else if (key == "noise_sigma") cfg.augment.noise_sigma = to_double(where, value);
    else if (key == "variants_per_coeff") cfg.augment.variants_per_coeff = to_u64(where, value);
    else throw ConfigError(where + ": unknown key");
  } else if (section == "autoencoder") {
    set_train(cfg.autoencoder, key, where, value);
  } else if (section == "classifier") {
    set_train(cfg.classifier, key, where, value);
  } else if (section == "synth") {
    if (key == "train_per_class") cfg.counts.train_per_class = to_u64(where, value);
    else if (key == "test") cfg.counts.test = to_u64(where, value);
    else if (key == "counterfeit") cfg.counts.counterfeit = to_u64(where, value);
    else if (key == "unknown") cfg.counts.unknown = to_u64(where, value);
    else if (key == "min_prefix_s") cfg.min_prefix_s = to_double(where, value);
    else if (key == "max_prefix_s") cfg.max_prefix_s = to_double(where, value);
    else if (key == "genuine_profiles") cfg.genuine_profiles = split(value, ',');
    else if (key == "unknown_profile") cfg.unknown_profile = value;
    else throw ConfigError(where + ": unknown key");
  } else if (section.rfind("profile.", 0) == 0 && section.size() > 8) {
    const std::string name = section.substr(8);
    auto [it, inserted] = cfg.profiles.try_emplace(name);
    if (inserted) it->second.profile.name = name;
    set_profile(it->second, key, where, value);
  } else {
    throw ConfigError("unknown section [" + section + "]");
  }
}

void emit_train(std::ostringstream& out, const nn::TrainConfig& t) {
  out << "epochs = " << t.epochs << "\nbatch_size = " << t.batch_size << "\nshuffle = "
      << (t.shuffle ? "true" : "false") << "\nlearning_rate = " << fmt(t.adam.lr) << "\nbeta1 = "
      << fmt(t.adam.beta1) << "\nbeta2 = " << fmt(t.adam.beta2) << "\nepsilon = " << fmt(t.adam.eps) << "\n";
}

}  // namespace

PipelineConfig::PipelineConfig() {
  const auto spec = default_corpus_spec();
  for (const auto& g : spec.genuine) profiles[g.profile.name] = g;
  profiles[spec.unknown.profile.name] = spec.unknown;
}

void PipelineConfig::validate() const {
  preprocess.validate();
  match.validate();
  augment.validate();
  autoencoder.validate();
  classifier.validate();
  if (genuine_profiles.size() < 2) throw ConfigError("[synth] genuine_profiles needs at least two entries");
  auto check_profile = [&](const std::string& name) {
    const auto it = profiles.find(name);
    if (it == profiles.end()) throw ConfigError("profile '" + name + "' is not defined");
    try {
      it->second.profile.validate();
      it->second.perturb.validate();
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
    }
  };
  for (const auto& n : genuine_profiles) check_profile(n);
  check_profile(unknown_profile);
  if (!(min_prefix_s >= 0.0) || !(max_prefix_s >= min_prefix_s)) {
    throw ConfigError("[synth] prefix range must satisfy 0 <= min_prefix_s <= max_prefix_s");
  }
}

CorpusSpec PipelineConfig::corpus_spec() const {
  validate();
  CorpusSpec spec;
  for (const auto& n : genuine_profiles) spec.genuine.push_back(profiles.at(n));
  spec.unknown = profiles.at(unknown_profile);
  spec.counts = counts;
  spec.min_prefix_s = min_prefix_s;
  spec.max_prefix_s = max_prefix_s;
  return spec;
}

PipelineConfig parse_config(const std::string& text, PipelineConfig base) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    if (section.empty()) throw ConfigError("line " + std::to_string(line_no) + ": key outside of a section");
    assign(base, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void apply_override(PipelineConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const std::string lhs = trim(assignment.substr(0, eq));
  const auto dot = lhs.rfind('.');
  if (eq == std::string::npos || dot == std::string::npos) {
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  }
  assign(cfg, lhs.substr(0, dot), lhs.substr(dot + 1), trim(assignment.substr(eq + 1)));
}

std::string model_config_text(const PreprocessConfig& p, const MatchConfig& m) {
  std::ostringstream out;
  out << "[preprocess]\nonset_fraction = " << fmt(p.onset_fraction) << "\nshift_seconds = " << fmt(p.shift_seconds)
      << "\nsegment_len = " << p.segment_len << "\ntarget_rms = " << fmt(p.target_rms)
      << "\nspectrum_width = " << p.spectrum_width << "\n\n[match]\nw_f = " << fmt(m.w_f) << "\nw_a = " << fmt(m.w_a)
      << "\npenalty_per_unmatched = " << fmt(m.penalty_per_unmatched)
      << "\nmin_height_fraction = " << fmt(m.min_height_fraction)
      << "\nmin_separation_bins = " << m.min_separation_bins
      << "\nprominence_mad_factor = " << fmt(m.prominence_mad_factor) << "\nmax_peaks = " << m.max_peaks << "\n";
  return out.str();
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t model_config_hash(const PreprocessConfig& pre, const MatchConfig& match) {
  return fnv1a64(model_config_text(pre, match));
}

void parse_model_config(const std::string& text, PreprocessConfig& pre, MatchConfig& match) {
  const PipelineConfig parsed = parse_config(text);
  pre = parsed.preprocess;
  match = parsed.match;
}

std::string format_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  out << "[general]\nseed = " << cfg.seed << "\n\n";
  out << model_config_text(cfg.preprocess, cfg.match) << "\n";
  out << "[augment]\ncoeffs = " << fmt_list(cfg.augment.coeffs) << "\nnoise_sigma = " << fmt(cfg.augment.noise_sigma)
      << "\nvariants_per_coeff = " << cfg.augment.variants_per_coeff << "\n\n";
  out << "[autoencoder]\n";
  emit_train(out, cfg.autoencoder);
  out << "\n[classifier]\n";
  emit_train(out, cfg.classifier);
  out << "\n[synth]\ntrain_per_class = " << cfg.counts.train_per_class << "\ntest = " << cfg.counts.test
      << "\ncounterfeit = " << cfg.counts.counterfeit << "\nunknown = " << cfg.counts.unknown
      << "\nmin_prefix_s = " << fmt(cfg.min_prefix_s) << "\nmax_prefix_s = " << fmt(cfg.max_prefix_s)
      << "\ngenuine_profiles = ";
  for (std::size_t i = 0; i < cfg.genuine_profiles.size(); ++i) out << (i ? ", " : "") << cfg.genuine_profiles[i];
  out << "\nunknown_profile = " << cfg.unknown_profile << "\n";
  for (const auto& [name, e] : cfg.profiles) {
    out << "\n[profile." << name << "]\nmodes = ";
    for (std::size_t k = 0; k < e.profile.modes.size(); ++k) {
      const auto& m = e.profile.modes[k];
      out << (k ? ", " : "") << fmt(m.freq_hz) << "/" << fmt(m.rel_amp_db) << "/" << fmt(m.decay_tau_s);
    }
    out << "\nfreq_jitter_hz = " << fmt_list(e.perturb.freq_jitter_sigma_hz)
        << "\namp_jitter_db = " << fmt_list(e.perturb.amp_jitter_sigma_db)
        << "\nnoise_floor = " << fmt(e.profile.noise_floor) << "\nmode_amplitude = " << fmt(e.profile.mode_amplitude)
        << "\nstrike_duration_s = " << fmt(e.profile.strike.duration_s)
        << "\nstrike_amplitude = " << fmt(e.profile.strike.amplitude)
        << "\ncounterfeit_shift_fraction = " << fmt(e.perturb.counterfeit_shift_fraction)
        << "\ncounterfeit_amp_sigma_db = " << fmt(e.perturb.counterfeit_amp_sigma_db)
        << "\nmode_drop_prob = " << fmt(e.perturb.mode_drop_prob) << "\n";
  }
  return out.str();
}

}  // namespace resonant
