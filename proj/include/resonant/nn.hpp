#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "resonant/kernels.hpp"
#include "resonant/rng.hpp"

namespace resonant::nn {

// Row-major batch of vectors.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  static Matrix from_row(std::span<const double> v);

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

enum class Activation : std::uint8_t { kLinear = 0, kRelu = 1 };
enum class Mode { kTrain, kEval };

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // [out][in]
  std::vector<double> biases;   // [out]
  Activation activation = Activation::kLinear;
  double dropout_p = 0.0;  // applied after the activation, train mode only

  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation act, double dropout = 0.0);
};

struct LayerSpec {
  std::size_t out;
  Activation activation;
  double dropout_p = 0.0;
};

class Network {
 public:
  Network() = default;
  explicit Network(std::vector<DenseLayer> layers);

  // Uniform init: +-sqrt(6 / fan_in) for ReLU layers, +-sqrt(6 / (fan_in +
  // fan_out)) for linear ones; zero biases.
  static Network build(std::size_t input_dim, std::span<const LayerSpec> specs, Rng& rng);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  // Mutable access bumps the version so outstanding caches go stale.
  std::vector<DenseLayer>& mutable_layers() {
    ++version_;
    return layers_;
  }
  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
  std::size_t parameter_count() const;
  std::uint64_t version() const { return version_; }
  void touch() { ++version_; }

  // Network restricted to layers [first, last).
  Network slice(std::size_t first, std::size_t last) const;

 private:
  std::vector<DenseLayer> layers_;
  std::uint64_t version_ = 0;
};

struct ForwardCache {
  const Network* net = nullptr;
  std::uint64_t version = 0;
  std::vector<Matrix> inputs;        // input to each layer
  std::vector<Matrix> preactivations;
  std::vector<std::vector<double>> dropout_scale;  // per layer; empty when no dropout was applied
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

// Train mode draws dropout masks from `rng` (required when any layer has
// dropout); eval mode applies neither mask nor rescaling.
ForwardResult forward(const Network& net, const Matrix& x, Mode mode, Rng* rng = nullptr);
std::vector<double> predict(const Network& net, std::span<const double> x);
Matrix predict(const Network& net, const Matrix& x);
// Eval-mode pass through layers [first, last).
Matrix predict_layers(const Network& net, const Matrix& x, std::size_t first, std::size_t last);

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // dLoss / dOutput
};

// Mean over every component of every row.
LossResult mse_loss(const Matrix& target, const Matrix& prediction);
LossResult mse_loss(std::span<const double> target, std::span<const double> prediction);
// Mean over rows of -log softmax(logits)[label].
LossResult softmax_ce_loss(const Matrix& logits, std::span<const std::size_t> labels);
LossResult softmax_ce_loss(std::span<const double> logits, std::size_t label);
std::vector<double> softmax(std::span<const double> logits);

struct LayerGradients {
  std::vector<double> weights;
  std::vector<double> biases;
};

struct Gradients {
  std::vector<LayerGradients> layers;
  Matrix input;  // dLoss / dInput
};

Gradients backward(const Network& net, const ForwardCache& cache, const Matrix& grad_output);

struct AdamState {
  kernels::AdamHyper hyper;
  long step = 0;
  std::vector<LayerGradients> m;
  std::vector<LayerGradients> v;

  AdamState() = default;
  AdamState(const Network& net, kernels::AdamHyper h);
};

void adam_step(Network& net, const Gradients& grads, AdamState& state);

enum class LossKind { kMse, kSoftmaxCrossEntropy };

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 4;
  bool shuffle = true;
  kernels::AdamHyper adam;

  void validate() const;
};

struct Dataset {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> targets;  // MSE; empty means reconstruct inputs
  std::vector<std::size_t> labels;            // cross entropy

  std::size_t size() const { return inputs.size(); }
};

struct TrainHistory {
  std::vector<double> loss;      // per-epoch mean training loss
  std::vector<double> accuracy;  // per-epoch training accuracy (cross entropy only)
};

// Fused forward/backward/Adam step on one batch; returns the batch loss.
// Equivalent to forward + backward + adam_step.
double train_step(Network& net, AdamState& state, const Matrix& x, const Matrix* target,
                  std::span<const std::size_t> labels, LossKind kind, Rng& rng, Matrix* output = nullptr);

TrainHistory train(Network& net, const Dataset& data, LossKind kind, const TrainConfig& cfg, Rng& rng);

}  // namespace resonant::nn
