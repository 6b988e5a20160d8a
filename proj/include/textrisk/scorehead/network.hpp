#pragma once

#include <span>
#include <vector>

#include "textrisk/common/rng.hpp"
#include "textrisk/scorehead/config.hpp"

namespace textrisk::scorehead {

// Fully connected layer, weights stored input-major: w[k * out + j] connects
// input k to unit j. Input-major storage lets the first layer skip zero inputs
// (hashed encodings are sparse).
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;
};

// Activations kept from a training forward pass for backprop.
struct ForwardTrace {
  std::vector<double> input;                    // after input dropout
  std::vector<std::vector<double>> activations;  // ReLU outputs per hidden layer (after output-side dropout on the last)
  std::vector<std::vector<double>> masks;        // dropout scale factors; empty when unused
  double logit = 0.0;
  double probability = 0.0;
};

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  void zero();
};

// Dense-ReLU stack with a single sigmoid output unit.
class Network {
 public:
  Network() = default;
  // He-uniform init: U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
  Network(const ScoreHeadConfig& config, std::size_t input_dim, Rng& rng);
  Network(ScoreHeadConfig config, std::vector<DenseLayer> layers);

  const ScoreHeadConfig& config() const noexcept { return config_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }
  std::size_t input_dim() const noexcept { return layers_.empty() ? 0 : layers_.front().in; }

  double logit(std::span<const float> x) const;
  double logit(std::span<const double> x) const;
  double predict(std::span<const float> x) const;

  // Training pass; draws dropout masks from rng when the config has dropout.
  void forward(std::span<const double> x, Rng* dropout_rng, ForwardTrace& trace) const;

  // Accumulates parameter gradients for dLoss/dlogit = dlogit.
  void backward(const ForwardTrace& trace, double dlogit, Gradients& grads) const;

  Gradients make_gradients() const;

 private:
  ScoreHeadConfig config_;
  std::vector<DenseLayer> layers_;
};

double sigmoid(double z) noexcept;

// Adam with (0.9, 0.999, 1e-8).
class AdamOptimizer {
 public:
  AdamOptimizer(const Network& net, double learning_rate);
  void step(Network& net, const Gradients& grads);

 private:
  double lr_;
  long t_ = 0;
  Gradients m_;
  Gradients v_;
};

}  // namespace textrisk::scorehead
