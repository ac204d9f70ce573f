#include "resonant/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <locale>
#include <numeric>
#include <sstream>

#include "resonant/errors.hpp"

namespace resonant {

namespace {

double off_diagonal_norm(const std::vector<double>& a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) acc += a[i * n + j] * a[i * n + j];
    }
  }
  return std::sqrt(acc);
}

void fix_sign(std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] < 0.0) {
    for (double& x : v) x = -x;
  }
}

std::ostringstream classic_stream() {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s.precision(10);
  return s;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string escape_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void check_plot(const Plot& plot) {
  if (plot.series.empty()) throw ArgumentError("plot has no series");
  for (const auto& s : plot.series) {
    if (s.x.size() != s.y.size()) throw ShapeError("series '" + s.name + "' has mismatched x and y lengths");
  }
}

bool shared_grid(const Plot& plot) {
  const auto& x0 = plot.series.front().x;
  return std::all_of(plot.series.begin(), plot.series.end(), [&](const Series& s) { return s.x == x0; });
}

// 1-2-5 ticks covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  const double span = hi - lo;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (span / step <= target) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step) {
    ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  }
  return ticks;
}

struct Bounds {
  double x0, x1, y0, y1;
};

Bounds bounds_of(const Plot& plot) {
  Bounds b{INFINITY, -INFINITY, INFINITY, -INFINITY};
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      b.x0 = std::min(b.x0, s.x[i]);
      b.x1 = std::max(b.x1, s.x[i]);
      b.y0 = std::min(b.y0, s.y[i]);
      b.y1 = std::max(b.y1, s.y[i]);
    }
  }
  if (!std::isfinite(b.x0)) b = {0.0, 1.0, 0.0, 1.0};
  auto widen = [](double& lo, double& hi) {
    if (hi - lo < 1e-12) {
      const double pad = std::max(std::abs(lo) * 0.05, 0.5);
      lo -= pad;
      hi += pad;
    }
  };
  widen(b.x0, b.x1);
  widen(b.y0, b.y1);
  return b;
}

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 160.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

}  // namespace

SymmetricEigen jacobi_eigen(std::vector<double> a, std::size_t n, int max_sweeps, double tolerance) {
  if (n == 0 || a.size() != n * n) throw ShapeError("jacobi_eigen expects an n x n matrix");
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  double scale = 0.0;
  for (double x : a) scale += x * x;
  const double stop = tolerance * std::max(1.0, std::sqrt(scale));

  SymmetricEigen out;
  while (out.sweeps < max_sweeps && off_diagonal_norm(a, n) >= stop) {
    ++out.sweeps;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a[i * n + i] > a[j * n + j]; });
  for (std::size_t idx : order) {
    out.values.push_back(a[idx * n + idx]);
    std::vector<double> vec(n);
    for (std::size_t k = 0; k < n; ++k) vec[k] = v[k * n + idx];
    out.vectors.push_back(std::move(vec));
  }
  return out;
}

PcaResult pca_2d(const std::vector<std::vector<double>>& points, std::vector<std::string> labels) {
  if (points.size() < 3) throw ArgumentError("PCA needs at least 3 samples, got " + std::to_string(points.size()));
  if (!labels.empty() && labels.size() != points.size()) throw ShapeError("one label per PCA sample required");
  const std::size_t n = points.size();
  const std::size_t d = points.front().size();
  if (d < 2) throw ShapeError("PCA to 2-D needs at least 2 dimensions");
  for (const auto& p : points) {
    if (p.size() != d) throw ShapeError("PCA samples differ in dimension");
  }

  PcaResult r;
  r.mean.assign(d, 0.0);
  for (const auto& p : points) {
    for (std::size_t j = 0; j < d; ++j) r.mean[j] += p[j];
  }
  for (double& m : r.mean) m /= static_cast<double>(n);

  std::vector<double> cov(d * d, 0.0);
  std::vector<double> c(d);
  for (const auto& p : points) {
    for (std::size_t j = 0; j < d; ++j) c[j] = p[j] - r.mean[j];
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) cov[i * d + j] += c[i] * c[j];
    }
  }
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov[i * d + j] /= denom;
      cov[j * d + i] = cov[i * d + j];
    }
  }
  for (std::size_t i = 0; i < d; ++i) r.total_variance += cov[i * d + i];

  auto eig = jacobi_eigen(std::move(cov), d);
  for (std::size_t k = 0; k < 2; ++k) {
    r.components[k] = std::move(eig.vectors[k]);
    fix_sign(r.components[k]);
    r.eigenvalues[k] = std::max(eig.values[k], 0.0);
    r.explained_variance[k] = r.total_variance > 0.0 ? r.eigenvalues[k] / r.total_variance : 0.0;
  }

  r.projected.reserve(n);
  for (const auto& p : points) {
    std::array<double, 2> xy{};
    for (std::size_t k = 0; k < 2; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += (p[j] - r.mean[j]) * r.components[k][j];
      xy[k] = acc;
    }
    r.projected.push_back(xy);
  }
  r.labels = std::move(labels);
  return r;
}

std::string render_csv(const Plot& plot) {
  check_plot(plot);
  auto out = classic_stream();
  if (shared_grid(plot)) {
    out << escape_csv(plot.x_label.empty() ? "x" : plot.x_label);
    for (const auto& s : plot.series) out << ',' << escape_csv(s.name);
    out << '\n';
    const auto& x = plot.series.front().x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      out << x[i];
      for (const auto& s : plot.series) out << ',' << s.y[i];
      out << '\n';
    }
  } else {
    out << "series," << escape_csv(plot.x_label.empty() ? "x" : plot.x_label) << ','
        << escape_csv(plot.y_label.empty() ? "y" : plot.y_label) << '\n';
    for (const auto& s : plot.series) {
      for (std::size_t i = 0; i < s.x.size(); ++i) out << escape_csv(s.name) << ',' << s.x[i] << ',' << s.y[i] << '\n';
    }
  }
  return out.str();
}

std::string render_svg(const Plot& plot) {
  check_plot(plot);
  const Bounds b = bounds_of(plot);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - b.x0) / (b.x1 - b.x0) * pw; };
  auto sy = [&](double y) { return kTop + ph - (y - b.y0) / (b.y1 - b.y0) * ph; };

  auto out = classic_stream();
  out.precision(6);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" width=\""
      << kWidth << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  if (!plot.title.empty()) {
    out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
        << escape_xml(plot.title) << "</text>\n";
  }
  out << "<g stroke=\"black\" stroke-width=\"1\">\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
      << "\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph << "\"/>\n"
      << "</g>\n<g font-size=\"11\">\n";
  for (double t : nice_ticks(b.x0, b.x1)) {
    const double x = sx(t);
    out << "<line x1=\"" << x << "\" y1=\"" << kTop + ph << "\" x2=\"" << x << "\" y2=\"" << kTop + ph + 5
        << "\" stroke=\"black\"/><text x=\"" << x << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">" << t
        << "</text>\n";
  }
  for (double t : nice_ticks(b.y0, b.y1)) {
    const double y = sy(t);
    out << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << y << "\" x2=\"" << kLeft << "\" y2=\"" << y
        << "\" stroke=\"black\"/><text x=\"" << kLeft - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << t
        << "</text>\n";
  }
  out << "</g>\n";
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 15 << "\" text-anchor=\"middle\">"
      << escape_xml(plot.x_label) << "</text>\n"
      << "<text x=\"20\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
      << kTop + ph / 2 << ")\">" << escape_xml(plot.y_label) << "</text>\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* colour = kPalette[k % std::size(kPalette)];
    if (plot.style == PlotStyle::kLine) {
      out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.2\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        out << sx(s.x[i]) << ',' << sy(s.y[i]) << ' ';
      }
      out << "\"/>\n";
    } else {
      out << "<g fill=\"" << colour << "\" fill-opacity=\"0.7\">\n";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        out << "<circle cx=\"" << sx(s.x[i]) << "\" cy=\"" << sy(s.y[i]) << "\" r=\"3\"/>\n";
      }
      out << "</g>\n";
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
    out << "<rect x=\"" << kLeft + pw + 15 << "\" y=\"" << ly - 8 << "\" width=\"12\" height=\"10\" fill=\"" << colour
        << "\"/><text x=\"" << kLeft + pw + 32 << "\" y=\"" << ly + 1 << "\">" << escape_xml(s.name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void export_csv(const Plot& plot, const std::filesystem::path& path) { write_file(path, render_csv(plot)); }
void export_svg(const Plot& plot, const std::filesystem::path& path) { write_file(path, render_svg(plot)); }

Plot spectrum_overlay(const Spectrum& original, const Spectrum& reconstructed) {
  if (original.bins.size() != reconstructed.bins.size()) throw ShapeError("overlay spectra differ in width");
  Plot plot;
  plot.title = "Spectrum and reconstruction";
  plot.x_label = "freq_hz";
  plot.y_label = "normalized magnitude";
  std::vector<double> freqs(original.bins.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) freqs[i] = original.frequency_of(i);
  plot.series.push_back({"original", freqs, original.bins});
  plot.series.push_back({"reconstructed", freqs, reconstructed.bins});
  return plot;
}

Plot training_curves(const nn::TrainHistory& history, const std::string& title) {
  Plot plot;
  plot.title = title;
  plot.x_label = "epoch";
  plot.y_label = history.accuracy.empty() ? "loss" : "loss / accuracy";
  std::vector<double> epochs(history.loss.size());
  std::iota(epochs.begin(), epochs.end(), 1.0);
  plot.series.push_back({"loss", epochs, history.loss});
  if (history.accuracy.size() == history.loss.size() && !history.accuracy.empty()) {
    plot.series.push_back({"accuracy", epochs, history.accuracy});
  }
  return plot;
}

Plot pca_scatter(const PcaResult& pca) {
  Plot plot;
  plot.title = "Latent PCA";
  plot.x_label = "pc1";
  plot.y_label = "pc2";
  plot.style = PlotStyle::kScatter;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < pca.projected.size(); ++i) {
    const std::string label = pca.labels.empty() ? "samples" : pca.labels[i];
    auto it = std::find(order.begin(), order.end(), label);
    if (it == order.end()) {
      order.push_back(label);
      plot.series.push_back({label, {}, {}});
      it = order.end() - 1;
    }
    auto& s = plot.series[static_cast<std::size_t>(it - order.begin())];
    s.x.push_back(pca.projected[i][0]);
    s.y.push_back(pca.projected[i][1]);
  }
  return plot;
}

std::string render_peaks_csv(const PeakSet& original, const PeakSet& reconstructed) {
  auto out = classic_stream();
  out << "set,rank,freq_hz,amplitude,bin\n";
  auto rows = [&](const char* name, const PeakSet& set) {
    for (std::size_t i = 0; i < set.peaks.size(); ++i) {
      const auto& p = set.peaks[i];
      out << name << ',' << i + 1 << ',' << p.freq_hz << ',' << p.amplitude << ',' << p.bin << '\n';
    }
  };
  rows("original", original);
  rows("reconstructed", reconstructed);
  return out.str();
}

void export_peaks_csv(const PeakSet& original, const PeakSet& reconstructed, const std::filesystem::path& path) {
  write_file(path, render_peaks_csv(original, reconstructed));
}

void export_spectrogram_csv(const Spectrogram& sg, const std::filesystem::path& path) {
  if (sg.frames.empty()) throw ArgumentError("spectrogram has no frames");
  auto out = classic_stream();
  out << "time_s,freq_hz,magnitude\n";
  for (std::size_t t = 0; t < sg.frames.size(); ++t) {
    for (std::size_t f = 0; f < sg.frames[t].size(); ++f) {
      out << sg.times_s[t] << ',' << sg.freqs_hz[f] << ',' << sg.frames[t][f] << '\n';
    }
  }
  write_file(path, out.str());
}

void export_spectrogram_svg(const Spectrogram& sg, const std::filesystem::path& path) {
  if (sg.frames.empty() || sg.frames.front().empty()) throw ArgumentError("spectrogram has no frames");
  const std::size_t nt = sg.frames.size();
  const std::size_t nf = sg.frames.front().size();
  // At most 200 x 128 cells; each cell shows the max of the block it covers.
  const std::size_t ct = std::min<std::size_t>(nt, 200);
  const std::size_t cf = std::min<std::size_t>(nf, 128);
  std::vector<double> cells(ct * cf, 0.0);
  double top = 0.0;
  for (std::size_t t = 0; t < nt; ++t) {
    for (std::size_t f = 0; f < nf; ++f) {
      auto& cell = cells[(t * ct / nt) * cf + f * cf / nf];
      cell = std::max(cell, sg.frames[t][f]);
      top = std::max(top, sg.frames[t][f]);
    }
  }
  const double pw = kWidth - kLeft - 40.0;
  const double ph = kHeight - kTop - kBottom;
  const double cw = pw / static_cast<double>(ct);
  const double ch = ph / static_cast<double>(cf);
  auto out = classic_stream();
  out.precision(6);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" width=\""
      << kWidth << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n"
      << "<text x=\"" << kLeft + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">Spectrogram (dB)</text>\n"
      << "<g shape-rendering=\"crispEdges\">\n";
  for (std::size_t t = 0; t < ct; ++t) {
    for (std::size_t f = 0; f < cf; ++f) {
      const double v = cells[t * cf + f];
      const double db = top > 0.0 && v > 0.0 ? 20.0 * std::log10(v / top) : -80.0;
      const int shade = static_cast<int>(std::lround(255.0 * std::clamp((db + 80.0) / 80.0, 0.0, 1.0)));
      out << "<rect x=\"" << kLeft + cw * static_cast<double>(t) << "\" y=\""
          << kTop + ph - ch * static_cast<double>(f + 1) << "\" width=\"" << cw << "\" height=\"" << ch
          << "\" fill=\"rgb(" << shade << ',' << shade / 3 << ',' << 255 - shade << ")\"/>\n";
    }
  }
  out << "</g>\n<g font-size=\"11\">\n";
  const double t1 = sg.times_s.back();
  const double f1 = sg.freqs_hz.back();
  for (double t : nice_ticks(0.0, std::max(t1, 1e-3))) {
    const double x = kLeft + (t1 > 0.0 ? t / t1 : 0.0) * pw;
    out << "<line x1=\"" << x << "\" y1=\"" << kTop + ph << "\" x2=\"" << x << "\" y2=\"" << kTop + ph + 5
        << "\" stroke=\"black\"/><text x=\"" << x << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">" << t
        << "</text>\n";
  }
  for (double f : nice_ticks(0.0, std::max(f1, 1.0))) {
    const double y = kTop + ph - (f1 > 0.0 ? f / f1 : 0.0) * ph;
    out << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << y << "\" x2=\"" << kLeft << "\" y2=\"" << y
        << "\" stroke=\"black\"/><text x=\"" << kLeft - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << f
        << "</text>\n";
  }
  out << "</g>\n"
      << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 15 << "\" text-anchor=\"middle\">time_s</text>\n"
      << "<text x=\"20\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
      << kTop + ph / 2 << ")\">freq_hz</text>\n</svg>\n";
  write_file(path, out.str());
}

}  // namespace resonant
