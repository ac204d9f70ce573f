#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "resonant/analysis.hpp"
#include "resonant/audio_io.hpp"
#include "resonant/config.hpp"
#include "resonant/errors.hpp"
#include "resonant/models.hpp"
#include "resonant/synth.hpp"

namespace fs = std::filesystem;
using namespace resonant;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 2;
constexpr int kExitCounterfeit = 3;

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> spectrum_width;
  bool json = false;

  // True when the caller asked for specific preprocessing/matching settings,
  // which must then agree with a loaded bundle.
  bool pins_model_settings() const { return !config_path.empty() || !overrides.empty() || spectrum_width; }
};

PipelineConfig resolve_config(const GlobalOptions& g) {
  PipelineConfig cfg;
  if (!g.config_path.empty()) cfg = load_config(g.config_path);
  for (const auto& o : g.overrides) apply_override(cfg, o);
  if (const char* env = std::getenv("RESONANT_AUTH_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      cfg.seed = std::stoull(env, &used);
      if (env[used] != '\0') throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("RESONANT_AUTH_SEED is not an unsigned integer: ") + env);
    }
  }
  if (g.seed) cfg.seed = *g.seed;
  if (g.spectrum_width) cfg.preprocess.spectrum_width = *g.spectrum_width;
  cfg.validate();
  return cfg;
}

void note_width(const PreprocessConfig& pre) {
  if (!pre.conformant()) {
    std::cerr << "note: spectrum width " << pre.spectrum_width
              << " is a reduced, non-paper-conformant configuration\n";
  }
}

AudioClip load_entry(const ManifestEntry& e) {
  try {
    return load_wav(e.path);
  } catch (const Error& err) {
    throw IoError(e.path.string() + ": " + err.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

double median_of(std::vector<double> v) { return v.empty() ? 0.0 : median(std::move(v)); }

std::string csv_number(double v) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s.precision(10);
  s << v;
  return s.str();
}

// ---- synth ----------------------------------------------------------------

int cmd_synth(const GlobalOptions& g, const fs::path& out) {
  const auto cfg = resolve_config(g);
  const auto manifest = build_corpus(cfg.corpus_spec(), cfg.seed, out);
  std::map<std::string, std::size_t> by_role;
  for (const auto& e : manifest.entries) ++by_role[role_name(e.role)];
  if (g.json) {
    nlohmann::ordered_json j;
    j["out"] = out.string();
    j["files"] = manifest.entries.size();
    j["seed"] = cfg.seed;
    j["roles"] = by_role;
    std::cout << j.dump() << '\n';
  } else {
    std::cout << "wrote " << manifest.entries.size() << " files to " << out.string() << " (seed " << cfg.seed << ")\n";
    for (const auto& [role, n] : by_role) std::cout << "  " << role << ": " << n << '\n';
  }
  return kExitOk;
}

// ---- train ----------------------------------------------------------------

int cmd_train(const GlobalOptions& g, const fs::path& manifest_path, const fs::path& out,
              const std::vector<std::string>& roles, std::string curves_dir) {
  const auto cfg = resolve_config(g);
  note_width(cfg.preprocess);
  const auto manifest = load_manifest(manifest_path);
  std::vector<Role> wanted;
  for (const auto& r : roles) wanted.push_back(parse_role(r));

  std::vector<LabeledClip> clips;
  for (const auto& e : manifest.entries) {
    if (!e.genuine) continue;
    if (std::find(wanted.begin(), wanted.end(), e.role) == wanted.end()) continue;
    clips.push_back({load_entry(e), e.label});
  }
  if (clips.empty()) throw ManifestError(manifest_path.string() + ": no genuine entries with the selected roles");

  const auto art = train_bundle(clips, cfg);
  save_bundle(art.bundle, out);

  const fs::path dir = curves_dir.empty() ? out.parent_path() : fs::path(curves_dir);
  if (!dir.empty()) fs::create_directories(dir);
  const std::string stem = out.stem().string();
  export_csv(training_curves(art.autoencoder_history, "Autoencoder loss"), dir / (stem + "_autoencoder_loss.csv"));
  export_csv(training_curves(art.classifier_history, "Classifier training"), dir / (stem + "_classifier_curves.csv"));

  const auto& t = art.bundle.threshold;
  if (g.json) {
    nlohmann::ordered_json j;
    j["bundle"] = out.string();
    j["clips"] = clips.size();
    j["training_spectra"] = art.training_spectra;
    j["labels"] = art.bundle.classifier.labels;
    j["mu_d"] = t.mu_d;
    j["sigma_d"] = t.sigma_d;
    j["threshold"] = t.threshold;
    j["autoencoder_final_loss"] = art.autoencoder_history.loss.back();
    j["classifier_final_accuracy"] = art.classifier_history.accuracy.back();
    j["spectrum_width"] = cfg.preprocess.spectrum_width;
    j["conformant"] = cfg.preprocess.conformant();
    std::cout << j.dump() << '\n';
  } else {
    std::cout << "trained on " << clips.size() << " clips (" << art.training_spectra << " augmented spectra)\n"
              << "  classes: ";
    for (std::size_t i = 0; i < art.bundle.classifier.labels.size(); ++i) {
      std::cout << (i ? ", " : "") << art.bundle.classifier.labels[i];
    }
    std::cout << "\n  autoencoder loss " << art.autoencoder_history.loss.front() << " -> "
              << art.autoencoder_history.loss.back() << "\n  classifier accuracy "
              << art.classifier_history.accuracy.back() << "\n  threshold " << t.threshold << " (mu " << t.mu_d
              << ", sigma " << t.sigma_d << ")\n  bundle " << out.string() << '\n';
  }
  return kExitOk;
}

// ---- verify ---------------------------------------------------------------

ModelBundle load_checked_bundle(const GlobalOptions& g, const fs::path& path) {
  auto bundle = load_bundle(path);
  if (g.pins_model_settings()) {
    const auto cfg = resolve_config(g);
    check_compatible(bundle, cfg.preprocess, cfg.effective_match());
  }
  note_width(bundle.preprocess);
  return bundle;
}

std::vector<fs::path> collect_wavs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      for (const auto& e : fs::directory_iterator(p)) {
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (e.is_regular_file() && ext == ".wav") files.push_back(e.path());
      }
    } else {
      files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_verify(const GlobalOptions& g, const std::vector<std::string>& inputs, const fs::path& bundle_path) {
  const auto bundle = load_checked_bundle(g, bundle_path);
  const auto files = collect_wavs(inputs);
  if (files.empty()) throw IoError("no WAV files to verify");

  std::vector<std::optional<VerificationReport>> reports(files.size());
  std::vector<std::string> errors(files.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(files.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      reports[k] = verify(load_wav(files[k]), bundle);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }

  bool any_error = false, any_counterfeit = false;
  for (std::size_t k = 0; k < files.size(); ++k) {
    const std::string name = files[k].string();
    if (!reports[k]) {
      any_error = true;
      if (g.json) {
        nlohmann::ordered_json j;
        j["file"] = name;
        j["error"] = errors[k];
        std::cout << j.dump() << '\n';
      }
      std::cerr << "error: " << name << ": " << errors[k] << '\n';
      continue;
    }
    any_counterfeit |= !reports[k]->authentic;
    std::cout << (g.json ? reports[k]->to_json(name) + "\n" : reports[k]->to_text(name));
  }
  if (any_error) return kExitError;
  return any_counterfeit ? kExitCounterfeit : kExitOk;
}

// ---- eval -----------------------------------------------------------------

struct RoleStats {
  std::size_t count = 0;
  std::size_t accepted = 0;
  std::vector<double> distances;
};

int cmd_eval(const GlobalOptions& g, const fs::path& manifest_path, const fs::path& bundle_path,
             const std::string& out_dir) {
  const auto bundle = load_checked_bundle(g, bundle_path);
  const auto manifest = load_manifest(manifest_path);

  std::vector<const ManifestEntry*> entries;
  for (const auto& e : manifest.entries) {
    if (e.role == Role::kUnspecified) {
      throw ManifestError(manifest_path.string() + ": entry " + e.path.filename().string() + " has no role");
    }
    if (e.role != Role::kTrain) entries.push_back(&e);
  }
  auto count_role = [&](Role r) {
    return std::count_if(entries.begin(), entries.end(), [&](const ManifestEntry* e) { return e->role == r; });
  };
  if (count_role(Role::kTest) == 0) throw ManifestError(manifest_path.string() + ": no entries with role 'test'");
  if (count_role(Role::kCounterfeit) + count_role(Role::kUnknown) == 0) {
    throw ManifestError(manifest_path.string() + ": no entries with role 'counterfeit' or 'unknown'");
  }

  std::vector<VerificationReport> reports(entries.size());
  std::vector<std::optional<Prediction>> predictions(entries.size());
  std::vector<std::string> errors(entries.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(entries.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      const auto sp = clip_to_spectrum(load_wav(entries[k]->path), bundle.preprocess);
      reports[k] = verify_spectrum(sp, bundle);
      if (entries[k]->role == Role::kTest) predictions[k] = classify(bundle.classifier, encode(bundle.ae, sp));
    } catch (const std::exception& e) {
      errors[k] = entries[k]->path.string() + ": " + e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw IoError(e);
  }

  const Role order[] = {Role::kTest, Role::kCounterfeit, Role::kUnknown};
  std::map<Role, RoleStats> stats;
  std::size_t correct = 0, classified = 0;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto& s = stats[entries[k]->role];
    ++s.count;
    s.accepted += reports[k].authentic;
    s.distances.push_back(reports[k].distance);
    if (predictions[k]) {
      ++classified;
      correct += predictions[k]->label == entries[k]->label;
    }
  }
  const auto& test = stats[Role::kTest];
  const double frr = 1.0 - static_cast<double>(test.accepted) / static_cast<double>(test.count);
  std::size_t impostors = 0, impostors_accepted = 0;
  for (Role r : {Role::kCounterfeit, Role::kUnknown}) {
    impostors += stats[r].count;
    impostors_accepted += stats[r].accepted;
  }
  const double far = static_cast<double>(impostors_accepted) / static_cast<double>(impostors);
  const double accuracy = classified ? static_cast<double>(correct) / static_cast<double>(classified) : 0.0;

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ostringstream metrics;
    metrics << "role,count,accepted,rejected,acceptance_rate,median_distance,min_distance,max_distance\n";
    for (Role r : order) {
      const auto& s = stats[r];
      if (s.count == 0) continue;
      metrics << role_name(r) << ',' << s.count << ',' << s.accepted << ',' << s.count - s.accepted << ','
              << csv_number(static_cast<double>(s.accepted) / static_cast<double>(s.count)) << ','
              << csv_number(median_of(s.distances)) << ','
              << csv_number(*std::min_element(s.distances.begin(), s.distances.end())) << ','
              << csv_number(*std::max_element(s.distances.begin(), s.distances.end())) << '\n';
    }
    write_text(fs::path(out_dir) / "metrics.csv", metrics.str());
    std::ostringstream dist;
    dist << "file,role,label,genuine,distance,threshold,authentic,predicted_label\n";
    for (std::size_t k = 0; k < entries.size(); ++k) {
      dist << entries[k]->path.filename().string() << ',' << role_name(entries[k]->role) << ','
           << entries[k]->label << ',' << (entries[k]->genuine ? "true" : "false") << ','
           << csv_number(reports[k].distance) << ',' << csv_number(reports[k].threshold) << ','
           << (reports[k].authentic ? "true" : "false") << ',' << reports[k].label.value_or("") << '\n';
    }
    write_text(fs::path(out_dir) / "distances.csv", dist.str());
  }

  if (g.json) {
    nlohmann::ordered_json j;
    j["threshold"] = bundle.threshold.threshold;
    j["false_reject_rate"] = frr;
    j["false_accept_rate"] = far;
    j["classifier_accuracy"] = accuracy;
    for (Role r : order) {
      const auto& s = stats[r];
      if (s.count == 0) continue;
      j["roles"][role_name(r)] = {{"count", s.count},
                                  {"accepted", s.accepted},
                                  {"median_distance", median_of(s.distances)}};
    }
    j["spectrum_width"] = bundle.preprocess.spectrum_width;
    j["conformant"] = bundle.conformant();
    std::cout << j.dump() << '\n';
  } else {
    std::cout << "threshold " << bundle.threshold.threshold << '\n';
    std::printf("%-12s %6s %9s %9s %16s\n", "role", "count", "accepted", "rejected", "median distance");
    for (Role r : order) {
      const auto& s = stats[r];
      if (s.count == 0) continue;
      std::printf("%-12s %6zu %9zu %9zu %16.4f\n", role_name(r).c_str(), s.count, s.accepted, s.count - s.accepted,
                  median_of(s.distances));
    }
    std::printf("false reject rate   %.4f\nfalse accept rate   %.4f\nclassifier accuracy %.4f\n", frr, far, accuracy);
  }
  return kExitOk;
}

// ---- export-plot ----------------------------------------------------------

struct PlotArgs {
  std::string kind;
  std::string input;
  std::string bundle;
  std::string manifest;
  std::string out;
  std::size_t frame = 1024;
  std::size_t hop = 256;
};

nn::TrainHistory read_curves(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header, line;
  std::getline(in, header);
  const bool with_accuracy = header.find("accuracy") != std::string::npos;
  nn::TrainHistory h;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    row.imbue(std::locale::classic());
    double epoch = 0, loss = 0, acc = 0;
    char comma = 0;
    row >> epoch >> comma >> loss;
    if (with_accuracy) row >> comma >> acc;
    if (row.fail()) throw FormatError(path.string() + ": malformed row '" + line + "'");
    h.loss.push_back(loss);
    if (with_accuracy) h.accuracy.push_back(acc);
  }
  if (h.loss.empty()) throw FormatError(path.string() + ": no data rows");
  return h;
}

int cmd_export_plot(const GlobalOptions& g, const PlotArgs& a) {
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  auto with_ext = [&](const std::string& suffix) { return fs::path(out.string() + suffix); };
  auto need = [&](const std::string& value, const char* flag) {
    if (value.empty()) throw ArgumentError("export-plot " + a.kind + " requires " + flag);
  };
  std::vector<fs::path> written;

  if (a.kind == "spectrum") {
    need(a.input, "--input");
    need(a.bundle, "--bundle");
    const auto bundle = load_checked_bundle(g, a.bundle);
    const auto sp = clip_to_spectrum(load_wav(a.input), bundle.preprocess);
    const auto m = match_reconstruction(bundle.ae, sp, bundle.match);
    const auto plot = spectrum_overlay(m.original, m.reconstructed);
    export_csv(plot, with_ext(".csv"));
    export_svg(plot, with_ext(".svg"));
    export_peaks_csv(m.original_peaks, m.reconstructed_peaks, with_ext("_peaks.csv"));
    written = {with_ext(".csv"), with_ext(".svg"), with_ext("_peaks.csv")};
  } else if (a.kind == "spectrogram") {
    need(a.input, "--input");
    const auto sg = spectrogram(load_wav(a.input), a.frame, a.hop);
    export_spectrogram_csv(sg, with_ext(".csv"));
    export_spectrogram_svg(sg, with_ext(".svg"));
    written = {with_ext(".csv"), with_ext(".svg")};
  } else if (a.kind == "pca") {
    need(a.bundle, "--bundle");
    need(a.manifest, "--manifest");
    const auto bundle = load_checked_bundle(g, a.bundle);
    const auto manifest = load_manifest(a.manifest);
    std::vector<Spectrum> spectra;
    std::vector<std::string> labels;
    for (const auto& e : manifest.entries) {
      if (!e.genuine || e.role == Role::kUnknown) continue;
      spectra.push_back(clip_to_spectrum(load_entry(e), bundle.preprocess));
      labels.push_back(e.label);
    }
    const auto pca = pca_2d(encode_all(bundle.ae, spectra), labels);
    const auto plot = pca_scatter(pca);
    export_csv(plot, with_ext(".csv"));
    export_svg(plot, with_ext(".svg"));
    written = {with_ext(".csv"), with_ext(".svg")};
    if (!g.json) {
      std::cout << "explained variance " << pca.explained_variance[0] << ", " << pca.explained_variance[1] << '\n';
    }
  } else if (a.kind == "curves") {
    need(a.input, "--input");
    const auto h = read_curves(a.input);
    const auto plot = training_curves(h, fs::path(a.input).stem().string());
    export_csv(plot, with_ext(".csv"));
    export_svg(plot, with_ext(".svg"));
    written = {with_ext(".csv"), with_ext(".svg")};
  }

  if (g.json) {
    nlohmann::ordered_json j;
    j["kind"] = a.kind;
    j["files"] = nlohmann::json::array();
    for (const auto& p : written) j["files"].push_back(p.string());
    std::cout << j.dump() << '\n';
  } else {
    for (const auto& p : written) std::cout << "wrote " << p.string() << '\n';
  }
  return kExitOk;
}

int cmd_config(const GlobalOptions& g) {
  std::cout << format_config(resolve_config(g));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acoustic coin authentication: synthesize, train, verify, evaluate, plot"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("-c,--config", g.config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "override one setting, section.key=value (repeatable)");
  app.add_option("--seed", g.seed, "random seed (falls back to RESONANT_AUTH_SEED, then the config)");
  app.add_option("--spectrum-width", g.spectrum_width, "reduced spectrum width for fast runs (not paper-conformant)");
  app.add_flag("--json", g.json, "one JSON object per line on stdout");

  std::string out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  synth->add_option("-o,--out", out, "output directory")->required();

  std::string manifest, bundle, curves_dir;
  std::vector<std::string> roles{"train"};
  auto* train = app.add_subcommand("train", "train a model bundle on the genuine entries of a manifest");
  train->add_option("-m,--manifest", manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--out", out, "bundle path to write")->required();
  train->add_option("--roles", roles, "manifest roles used for training")->delimiter(',')->capture_default_str();
  train->add_option("--curves-dir", curves_dir, "where loss/accuracy CSVs go (default: next to the bundle)");

  std::vector<std::string> inputs;
  auto* verify = app.add_subcommand("verify", "authenticate WAV files (or every .wav in a directory)");
  verify->add_option("inputs", inputs, "WAV files or directories")->required();
  verify->add_option("-b,--bundle", bundle, "model bundle")->required();

  std::string eval_out;
  auto* eval = app.add_subcommand("eval", "false accept/reject rates over a role-annotated manifest");
  eval->add_option("-m,--manifest", manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("-b,--bundle", bundle, "model bundle")->required();
  eval->add_option("-o,--out", eval_out, "directory for metrics.csv and distances.csv");

  PlotArgs plot;
  auto* export_plot = app.add_subcommand("export-plot", "write plot data as CSV and SVG");
  export_plot->add_option("kind", plot.kind, "spectrum | spectrogram | pca | curves")
      ->required()
      ->check(CLI::IsMember({"spectrum", "spectrogram", "pca", "curves"}));
  export_plot->add_option("-i,--input", plot.input, "WAV file (spectrum, spectrogram) or curves CSV");
  export_plot->add_option("-b,--bundle", plot.bundle, "model bundle (spectrum, pca)");
  export_plot->add_option("-m,--manifest", plot.manifest, "dataset manifest (pca)");
  export_plot->add_option("-o,--out", plot.out, "output path prefix; .csv/.svg are appended")->required();
  export_plot->add_option("--frame", plot.frame, "spectrogram frame length")->capture_default_str();
  export_plot->add_option("--hop", plot.hop, "spectrogram hop")->capture_default_str();

  auto* config = app.add_subcommand("config", "print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*synth) return cmd_synth(g, out);
    if (*train) return cmd_train(g, manifest, out, roles, curves_dir);
    if (*verify) return cmd_verify(g, inputs, bundle);
    if (*eval) return cmd_eval(g, manifest, bundle, eval_out);
    if (*export_plot) return cmd_export_plot(g, plot);
    if (*config) return cmd_config(g);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
