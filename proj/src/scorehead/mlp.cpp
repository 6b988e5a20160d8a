#include "textrisk/scorehead/network.hpp"

#include <algorithm>
#include <cmath>

#include "textrisk/common/error.hpp"

namespace textrisk::scorehead {

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void Gradients::zero() {
  for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
}

Network::Network(const ScoreHeadConfig& config, std::size_t input_dim, Rng& rng) : config_(config.canonical()) {
  if (input_dim == 0) fail(Errc::validation, "network input dim must be positive");
  std::vector<std::size_t> widths = {input_dim, static_cast<std::size_t>(config_.first_dense)};
  if (config_.second_dense) widths.push_back(kSecondDenseUnits);
  widths.push_back(1);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer{widths[l], widths[l + 1], std::vector<double>(widths[l] * widths[l + 1]),
                     std::vector<double>(widths[l + 1], 0.0)};
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in));
    for (double& w : layer.weights) w = rng.uniform(-limit, limit);
    layers_.push_back(std::move(layer));
  }
}

Network::Network(ScoreHeadConfig config, std::vector<DenseLayer> layers)
    : config_(config.canonical()), layers_(std::move(layers)) {
  const std::size_t expected = config_.second_dense ? 3 : 2;
  if (layers_.size() != expected) fail(Errc::validation, "layer count does not match head configuration");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.size() != layer.in * layer.out || layer.bias.size() != layer.out ||
        (l > 0 && layer.in != layers_[l - 1].out))
      fail(Errc::dim_mismatch, "inconsistent layer shapes in head");
  }
  if (layers_.back().out != 1) fail(Errc::validation, "head output layer must have one unit");
}

namespace {

// out = bias + in^T W, skipping zero inputs.
template <typename T>
void affine(const DenseLayer& layer, std::span<const T> in, std::vector<double>& out) {
  out.assign(layer.bias.begin(), layer.bias.end());
  for (std::size_t k = 0; k < layer.in; ++k) {
    const double x = in[k];
    if (x == 0.0) continue;
    const double* w = layer.weights.data() + k * layer.out;
    for (std::size_t j = 0; j < layer.out; ++j) out[j] += x * w[j];
  }
}

void relu(std::vector<double>& v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

template <typename T>
double inference_logit(const std::vector<DenseLayer>& layers, std::span<const T> x) {
  if (x.size() != layers.front().in) fail(Errc::dim_mismatch, "input width does not match head");
  std::vector<double> cur;
  affine(layers.front(), x, cur);
  relu(cur);
  std::vector<double> next;
  for (std::size_t l = 1; l + 1 < layers.size(); ++l) {
    affine(layers[l], std::span<const double>(cur), next);
    relu(next);
    cur.swap(next);
  }
  affine(layers.back(), std::span<const double>(cur), next);
  return next[0];
}

std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng) {
  std::vector<double> mask(n);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

}  // namespace

double Network::logit(std::span<const float> x) const { return inference_logit(layers_, x); }
double Network::logit(std::span<const double> x) const { return inference_logit(layers_, x); }
double Network::predict(std::span<const float> x) const { return sigmoid(logit(x)); }

void Network::forward(std::span<const double> x, Rng* dropout_rng, ForwardTrace& trace) const {
  if (x.size() != input_dim()) fail(Errc::dim_mismatch, "input width does not match head");
  const bool dropout = config_.dropout_rate > 0.0 && dropout_rng != nullptr;
  const std::size_t hidden = layers_.size() - 1;
  trace.masks.assign(2, {});
  trace.input.assign(x.begin(), x.end());
  if (dropout && config_.dropout_position == DropoutPosition::before) {
    trace.masks[0] = dropout_mask(x.size(), config_.dropout_rate, *dropout_rng);
    for (std::size_t k = 0; k < x.size(); ++k) trace.input[k] *= trace.masks[0][k];
  }
  trace.activations.resize(hidden);
  for (std::size_t l = 0; l < hidden; ++l) {
    std::span<const double> in = l == 0 ? std::span<const double>(trace.input) : trace.activations[l - 1];
    affine(layers_[l], in, trace.activations[l]);
    relu(trace.activations[l]);
  }
  std::vector<double> last = trace.activations.back();
  if (dropout && config_.dropout_position == DropoutPosition::after) {
    trace.masks[1] = dropout_mask(last.size(), config_.dropout_rate, *dropout_rng);
    for (std::size_t k = 0; k < last.size(); ++k) last[k] *= trace.masks[1][k];
  }
  std::vector<double> out;
  affine(layers_.back(), std::span<const double>(last), out);
  trace.logit = out[0];
  trace.probability = sigmoid(trace.logit);
}

Gradients Network::make_gradients() const {
  Gradients g;
  for (const auto& layer : layers_) {
    g.weights.emplace_back(layer.weights.size(), 0.0);
    g.bias.emplace_back(layer.bias.size(), 0.0);
  }
  return g;
}

void Network::backward(const ForwardTrace& trace, double dlogit, Gradients& grads) const {
  const std::size_t hidden = layers_.size() - 1;
  const auto& out_layer = layers_.back();
  const std::vector<double>* after_mask =
      trace.masks.size() > 1 && !trace.masks[1].empty() ? &trace.masks[1] : nullptr;
  const auto& last = trace.activations.back();

  std::vector<double> delta(last.size());
  for (std::size_t k = 0; k < last.size(); ++k) {
    const double scale = after_mask ? (*after_mask)[k] : 1.0;
    grads.weights[hidden][k] += last[k] * scale * dlogit;
    delta[k] = out_layer.weights[k] * dlogit * scale;
  }
  grads.bias[hidden][0] += dlogit;

  std::vector<double> prev;
  for (std::size_t l = hidden; l-- > 0;) {
    const auto& layer = layers_[l];
    const auto& act = trace.activations[l];
    for (std::size_t j = 0; j < layer.out; ++j)
      if (act[j] <= 0.0) delta[j] = 0.0;
    const std::vector<double>& in = l == 0 ? trace.input : trace.activations[l - 1];
    auto& gw = grads.weights[l];
    for (std::size_t k = 0; k < layer.in; ++k) {
      const double x = in[k];
      if (x == 0.0) continue;
      double* g = gw.data() + k * layer.out;
      for (std::size_t j = 0; j < layer.out; ++j) g[j] += x * delta[j];
    }
    for (std::size_t j = 0; j < layer.out; ++j) grads.bias[l][j] += delta[j];
    if (l == 0) break;
    prev.assign(layer.in, 0.0);
    for (std::size_t k = 0; k < layer.in; ++k) {
      const double* w = layer.weights.data() + k * layer.out;
      double s = 0.0;
      for (std::size_t j = 0; j < layer.out; ++j) s += w[j] * delta[j];
      prev[k] = s;
    }
    delta.swap(prev);
  }
}

AdamOptimizer::AdamOptimizer(const Network& net, double learning_rate)
    : lr_(learning_rate), m_(net.make_gradients()), v_(net.make_gradients()) {}

void AdamOptimizer::step(Network& net, const Gradients& grads) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  auto update = [&](std::vector<double>& param, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      param[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  };
  auto& layers = net.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights, grads.weights[l], m_.weights[l], v_.weights[l]);
    update(layers[l].bias, grads.bias[l], m_.bias[l], v_.bias[l]);
  }
}

}  // namespace textrisk::scorehead
