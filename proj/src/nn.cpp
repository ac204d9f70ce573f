#include "resonant/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "resonant/errors.hpp"

namespace resonant::nn {

Matrix Matrix::from_row(std::span<const double> v) {
  Matrix m(1, v.size());
  std::copy(v.begin(), v.end(), m.data.begin());
  return m;
}

DenseLayer::DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation act, double dropout)
    : in(in_dim), out(out_dim), weights(in_dim * out_dim, 0.0), biases(out_dim, 0.0), activation(act),
      dropout_p(dropout) {
  if (in_dim == 0 || out_dim == 0) throw ShapeError("layer dimensions must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ArgumentError("dropout probability must lie in [0, 1)");
}

Network::Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.size() != layer.in * layer.out || layer.biases.size() != layer.out) {
      throw ShapeError("layer " + std::to_string(l) + " parameter sizes do not match its dimensions");
    }
    if (l > 0 && layers_[l - 1].out != layer.in) {
      throw ShapeError("layer " + std::to_string(l) + " input does not chain from the previous layer");
    }
  }
}

Network Network::build(std::size_t input_dim, std::span<const LayerSpec> specs, Rng& rng) {
  std::vector<DenseLayer> layers;
  std::size_t in = input_dim;
  for (const auto& spec : specs) {
    DenseLayer layer(in, spec.out, spec.activation, spec.dropout_p);
    const double fan = spec.activation == Activation::kRelu ? static_cast<double>(in)
                                                            : static_cast<double>(in + spec.out);
    const double bound = std::sqrt(6.0 / fan);
    for (double& w : layer.weights) w = rng.uniform(-bound, bound);
    layers.push_back(std::move(layer));
    in = spec.out;
  }
  return Network(std::move(layers));
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.biases.size();
  return n;
}

Network Network::slice(std::size_t first, std::size_t last) const {
  if (first >= last || last > layers_.size()) throw ArgumentError("invalid layer slice");
  return Network(std::vector<DenseLayer>(layers_.begin() + static_cast<std::ptrdiff_t>(first),
                                         layers_.begin() + static_cast<std::ptrdiff_t>(last)));
}

ForwardResult forward(const Network& net, const Matrix& x, Mode mode, Rng* rng) {
  if (net.layers().empty()) throw ShapeError("network has no layers");
  if (x.cols != net.input_dim()) {
    throw ShapeError("input width " + std::to_string(x.cols) + " does not match network input " +
                     std::to_string(net.input_dim()));
  }
  const std::size_t batch = x.rows;
  ForwardResult result;
  auto& cache = result.cache;
  cache.net = &net;
  cache.version = net.version();

  Matrix current = x;
  for (const auto& layer : net.layers()) {
    Matrix z(batch, layer.out);
    kernels::dense_forward(layer.weights, layer.biases, current.data, z.data, batch, layer.in, layer.out);
    Matrix a = z;
    if (layer.activation == Activation::kRelu) {
      for (double& v : a.data) v = v > 0.0 ? v : 0.0;
    }
    std::vector<double> scale;
    if (mode == Mode::kTrain && layer.dropout_p > 0.0) {
      if (rng == nullptr) throw ArgumentError("train-mode dropout needs a random source");
      const double keep = 1.0 - layer.dropout_p;
      scale.resize(a.data.size());
      for (std::size_t i = 0; i < scale.size(); ++i) {
        scale[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
        a.data[i] *= scale[i];
      }
    }
    cache.inputs.push_back(std::move(current));
    cache.preactivations.push_back(std::move(z));
    cache.dropout_scale.push_back(std::move(scale));
    current = std::move(a);
  }
  result.output = std::move(current);
  return result;
}

Matrix predict(const Network& net, const Matrix& x) { return predict_layers(net, x, 0, net.layers().size()); }

Matrix predict_layers(const Network& net, const Matrix& x, std::size_t first, std::size_t last) {
  if (first >= last || last > net.layers().size()) throw ArgumentError("invalid layer range");
  if (x.cols != net.layers()[first].in) throw ShapeError("input width does not match network input");
  Matrix current = x;
  for (std::size_t l = first; l < last; ++l) {
    const auto& layer = net.layers()[l];
    Matrix z(x.rows, layer.out);
    kernels::dense_forward(layer.weights, layer.biases, current.data, z.data, x.rows, layer.in, layer.out);
    if (layer.activation == Activation::kRelu) {
      for (double& v : z.data) v = v > 0.0 ? v : 0.0;
    }
    current = std::move(z);
  }
  return current;
}

std::vector<double> predict(const Network& net, std::span<const double> x) {
  return predict(net, Matrix::from_row(x)).data;
}

LossResult mse_loss(const Matrix& target, const Matrix& prediction) {
  if (target.rows != prediction.rows || target.cols != prediction.cols) {
    throw ShapeError("MSE operands differ in shape");
  }
  const std::size_t n = target.data.size();
  if (n == 0) throw ShapeError("MSE of empty operands");
  LossResult r;
  r.grad = Matrix(prediction.rows, prediction.cols);
  double acc = 0.0;
  const double scale = 2.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = prediction.data[i] - target.data[i];
    acc += d * d;
    r.grad.data[i] = scale * d;
  }
  r.loss = acc / static_cast<double>(n);
  return r;
}

LossResult mse_loss(std::span<const double> target, std::span<const double> prediction) {
  if (target.size() != prediction.size()) throw ShapeError("MSE operands differ in length");
  return mse_loss(Matrix::from_row(target), Matrix::from_row(prediction));
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ArgumentError("softmax of empty logits");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

LossResult softmax_ce_loss(const Matrix& logits, std::span<const std::size_t> labels) {
  if (labels.size() != logits.rows) throw ShapeError("one label per logit row required");
  if (logits.rows == 0) throw ShapeError("cross entropy of an empty batch");
  LossResult r;
  r.grad = Matrix(logits.rows, logits.cols);
  const double inv_batch = 1.0 / static_cast<double>(logits.rows);
  double acc = 0.0;
  for (std::size_t b = 0; b < logits.rows; ++b) {
    const auto row = logits.row(b);
    if (labels[b] >= row.size()) throw ArgumentError("class label out of range");
    const double top = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - top);
    const double log_norm = top + std::log(total);
    acc += log_norm - row[labels[b]];
    auto g = r.grad.row(b);
    for (std::size_t k = 0; k < row.size(); ++k) {
      const double p = std::exp(row[k] - log_norm);
      g[k] = (p - (k == labels[b] ? 1.0 : 0.0)) * inv_batch;
    }
  }
  r.loss = acc * inv_batch;
  return r;
}

LossResult softmax_ce_loss(std::span<const double> logits, std::size_t label) {
  const std::size_t labels[1] = {label};
  return softmax_ce_loss(Matrix::from_row(logits), labels);
}

namespace {

// Turns dLoss/dActivation of `layer` into dLoss/dPreactivation in place.
void through_activation(const DenseLayer& layer, const Matrix& z, const std::vector<double>& scale, Matrix& g) {
  if (!scale.empty()) {
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] *= scale[i];
  }
  if (layer.activation == Activation::kRelu) {
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      if (!(z.data[i] > 0.0)) g.data[i] = 0.0;
    }
  }
}

void check_cache(const Network& net, const ForwardCache& cache, const Matrix& grad_output) {
  if (cache.net != &net || cache.version != net.version() || cache.inputs.size() != net.layers().size()) {
    throw StateError("forward cache does not belong to the current network parameters");
  }
  const std::size_t batch = cache.inputs.front().rows;
  if (grad_output.rows != batch || grad_output.cols != net.output_dim()) {
    throw ShapeError("output gradient shape does not match the forward pass");
  }
}

}  // namespace

Gradients backward(const Network& net, const ForwardCache& cache, const Matrix& grad_output) {
  check_cache(net, cache, grad_output);
  const auto& layers = net.layers();
  const std::size_t batch = grad_output.rows;
  Gradients grads;
  grads.layers.resize(layers.size());
  Matrix g = grad_output;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    through_activation(layer, cache.preactivations[l], cache.dropout_scale[l], g);
    auto& lg = grads.layers[l];
    lg.weights.resize(layer.weights.size());
    lg.biases.resize(layer.out);
    kernels::dense_weight_grad(g.data, cache.inputs[l].data, lg.weights, lg.biases, batch, layer.in, layer.out);
    Matrix dx(batch, layer.in);
    kernels::dense_backward_input(layer.weights, g.data, dx.data, batch, layer.in, layer.out);
    g = std::move(dx);
  }
  grads.input = std::move(g);
  return grads;
}

AdamState::AdamState(const Network& net, kernels::AdamHyper h) : hyper(h) {
  for (const auto& layer : net.layers()) {
    m.push_back({std::vector<double>(layer.weights.size(), 0.0), std::vector<double>(layer.out, 0.0)});
    v.push_back({std::vector<double>(layer.weights.size(), 0.0), std::vector<double>(layer.out, 0.0)});
  }
}

void adam_step(Network& net, const Gradients& grads, AdamState& state) {
  if (grads.layers.size() != net.layers().size() || state.m.size() != net.layers().size()) {
    throw ShapeError("gradient/optimizer state does not match the network");
  }
  ++state.step;
  auto& layers = net.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    kernels::adam_update(layers[l].weights, grads.layers[l].weights, state.m[l].weights, state.v[l].weights,
                         state.hyper, state.step);
    kernels::adam_update(layers[l].biases, grads.layers[l].biases, state.m[l].biases, state.v[l].biases,
                         state.hyper, state.step);
  }
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be at least 1");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(adam.lr > 0.0)) throw ConfigError("learning rate must be positive");
}

double train_step(Network& net, AdamState& state, const Matrix& x, const Matrix* target,
                  std::span<const std::size_t> labels, LossKind kind, Rng& rng, Matrix* output) {
  if (state.m.size() != net.layers().size()) throw ShapeError("optimizer state does not match the network");
  auto fwd = forward(net, x, Mode::kTrain, &rng);
  LossResult loss;
  if (kind == LossKind::kMse) {
    loss = mse_loss(target != nullptr ? *target : x, fwd.output);
  } else {
    loss = softmax_ce_loss(fwd.output, labels);
  }
  if (output != nullptr) *output = fwd.output;

  const std::size_t batch = x.rows;
  ++state.step;
  auto& layers = net.mutable_layers();
  Matrix g = std::move(loss.grad);
  for (std::size_t l = layers.size(); l-- > 0;) {
    auto& layer = layers[l];
    through_activation(layer, fwd.cache.preactivations[l], fwd.cache.dropout_scale[l], g);
    // Input gradient uses the weights before this step's update.
    Matrix dx;
    if (l > 0) {
      dx = Matrix(batch, layer.in);
      kernels::dense_backward_input(layer.weights, g.data, dx.data, batch, layer.in, layer.out);
    }
    std::vector<double> bias_grad(layer.out, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      double acc = 0.0;
      for (std::size_t b = 0; b < batch; ++b) acc += g.data[b * layer.out + o];
      bias_grad[o] = acc;
    }
    kernels::adam_update(layer.biases, bias_grad, state.m[l].biases, state.v[l].biases, state.hyper, state.step);
    kernels::fused_weight_grad_adam(layer.weights, state.m[l].weights, state.v[l].weights, g.data,
                                    fwd.cache.inputs[l].data, batch, layer.in, layer.out, state.hyper, state.step);
    g = std::move(dx);
  }
  return loss.loss;
}

TrainHistory train(Network& net, const Dataset& data, LossKind kind, const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t n = data.size();
  if (n == 0) throw ArgumentError("cannot train on an empty dataset");
  const std::size_t in_dim = net.input_dim();
  const bool reconstruct = kind == LossKind::kMse && data.targets.empty();
  if (kind == LossKind::kMse && !reconstruct && data.targets.size() != n) {
    throw ShapeError("one target per input required");
  }
  if (kind == LossKind::kSoftmaxCrossEntropy && data.labels.size() != n) {
    throw ShapeError("one label per input required");
  }
  for (const auto& v : data.inputs) {
    if (v.size() != in_dim) throw ShapeError("dataset vector width does not match network input");
  }

  AdamState state(net, cfg.adam);
  TrainHistory history;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    }
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t batch = std::min(cfg.batch_size, n - start);
      Matrix x(batch, in_dim);
      Matrix target;
      std::vector<std::size_t> labels;
      if (kind == LossKind::kMse && !reconstruct) target = Matrix(batch, net.output_dim());
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t idx = order[start + b];
        std::copy(data.inputs[idx].begin(), data.inputs[idx].end(), x.row(b).begin());
        if (!target.data.empty()) std::copy(data.targets[idx].begin(), data.targets[idx].end(), target.row(b).begin());
        if (kind == LossKind::kSoftmaxCrossEntropy) labels.push_back(data.labels[idx]);
      }
      Matrix out;
      const double loss = train_step(net, state, x, target.data.empty() ? nullptr : &target, labels, kind, rng,
                                     kind == LossKind::kSoftmaxCrossEntropy ? &out : nullptr);
      loss_sum += loss * static_cast<double>(batch);
      if (kind == LossKind::kSoftmaxCrossEntropy) {
        for (std::size_t b = 0; b < batch; ++b) {
          const auto row = out.row(b);
          const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
          if (best == labels[b]) ++correct;
        }
      }
    }
    history.loss.push_back(loss_sum / static_cast<double>(n));
    if (kind == LossKind::kSoftmaxCrossEntropy) {
      history.accuracy.push_back(static_cast<double>(correct) / static_cast<double>(n));
    }
  }
  return history;
}

}  // namespace resonant::nn
