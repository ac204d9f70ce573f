#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "resonant/dsp.hpp"
#include "resonant/nn.hpp"
#include "resonant/peaks.hpp"

namespace resonant {

// Eigen-decomposition of a symmetric n x n matrix (row-major) by cyclic Jacobi
// rotations. Eigenvalues come back in descending order; vectors[k] is the unit
// eigenvector for values[k].
struct SymmetricEigen {
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
  int sweeps = 0;
};

SymmetricEigen jacobi_eigen(std::vector<double> a, std::size_t n, int max_sweeps = 100, double tolerance = 1e-12);

struct PcaResult {
  std::array<std::vector<double>, 2> components;
  std::vector<double> mean;
  std::vector<std::array<double, 2>> projected;
  std::vector<std::string> labels;
  std::array<double, 2> eigenvalues{};
  std::array<double, 2> explained_variance{};  // fraction of total variance
  double total_variance = 0.0;
};

// Sample covariance (n - 1). Each component's largest-magnitude entry is made
// positive so the output is reproducible.
PcaResult pca_2d(const std::vector<std::vector<double>>& points, std::vector<std::string> labels);

enum class PlotStyle { kLine, kScatter };

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  PlotStyle style = PlotStyle::kLine;
  std::vector<Series> series;
};

// Series sharing one x grid are written wide (x, one column per series);
// otherwise long (series, x, y).
void export_csv(const Plot& plot, const std::filesystem::path& path);
void export_svg(const Plot& plot, const std::filesystem::path& path);
std::string render_csv(const Plot& plot);
std::string render_svg(const Plot& plot);

Plot spectrum_overlay(const Spectrum& original, const Spectrum& reconstructed);
Plot training_curves(const nn::TrainHistory& history, const std::string& title);
Plot pca_scatter(const PcaResult& pca);

std::string render_peaks_csv(const PeakSet& original, const PeakSet& reconstructed);
void export_peaks_csv(const PeakSet& original, const PeakSet& reconstructed, const std::filesystem::path& path);

// Long-format (time_s, freq_hz, magnitude) and a heat-map rendering.
void export_spectrogram_csv(const Spectrogram& sg, const std::filesystem::path& path);
void export_spectrogram_svg(const Spectrogram& sg, const std::filesystem::path& path);

}  // namespace resonant
