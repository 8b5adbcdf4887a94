#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace velo {

// Fully connected net with CReLU hidden activations. CReLU doubles the
// width, so hidden layer k > 1 consumes 2 * hidden_units inputs, as does the
// linear output layer.
struct MlpTopology {
  int input_dim = 0;
  int hidden_layers = 0;
  int hidden_units = 0;
  int output_dim = 4;  // (vx, vy, px, py)

  bool valid() const;
  // number of inputs to layer k in [0, hidden_layers]
  int layer_inputs(int k) const;
  int layer_outputs(int k) const;
  std::size_t parameter_count() const;
};

struct MlpLayer {
  int rows = 0;  // outputs
  int cols = 0;  // inputs
  std::vector<double> w;  // row-major rows x cols
  std::vector<double> b;  // rows
};

struct MlpParameters {
  MlpTopology topo;
  std::vector<MlpLayer> layers;  // hidden_layers + 1
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 1e-5;
  double dropout_rate = 0.2;
  int epochs = 2000;
  int batch_size = 50;
  int early_stop_patience = 500;  // epochs, >= 1
  std::uint64_t rng_seed = 0;

  bool valid() const;
};

struct Sample {
  std::vector<double> features;
  std::array<double, 4> targets;  // (vx, vy, px, py) in (m/s, m/s, m, m)
};

// concat(max(x, 0), max(-x, 0))
std::vector<double> crelu(std::span<const double> x);

// Inverted-dropout scale factors for the hidden pre-activations: 0 for a
// dropped unit, 1/(1-rate) for a kept one. Empty layers mean inference mode.
struct DropoutMask {
  std::vector<std::vector<double>> layer_scale;  // one per hidden layer
};

class Rng;
DropoutMask sample_dropout_mask(const MlpTopology& topo, double rate, Rng& rng);

// Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.
MlpParameters init_parameters(const MlpTopology& topo, Rng& rng);

std::array<double, 4> forward(const MlpParameters& p,
                              std::span<const double> x,
                              const DropoutMask* mask = nullptr);

// mean of the squared errors over all four output components
double loss(const std::array<double, 4>& outputs,
            const std::array<double, 4>& targets);

struct Gradients {
  std::vector<MlpLayer> layers;
};

// Exact gradient of batch-mean loss + weight_decay/2 * |W|^2 (biases
// excluded from the decay term) under per-sample dropout masks drawn from
// dropout_seed. dropout_rate 0 disables masking.
Gradients gradient(const MlpParameters& p, std::span<const Sample> batch,
                   double weight_decay, double dropout_rate,
                   std::uint64_t dropout_seed);

struct AdamState {
  std::vector<MlpLayer> m;
  std::vector<MlpLayer> v;
  long step = 0;
};

AdamState make_adam_state(const MlpTopology& topo);

// Standard bias-corrected ADAM update, in place.
void adam_step(MlpParameters& p, const Gradients& g, AdamState& state,
               const TrainConfig& cfg);

// Trained network plus the per-feature standardization captured from its
// training fold.
struct MlpModel {
  MlpParameters params;
  std::vector<double> feat_mean;
  std::vector<double> feat_std;
  struct Meta {
    std::uint64_t seed = 0;
    int best_epoch = -1;
    double val_mse = 0.0;
  } meta;
};

std::array<double, 4> predict(const MlpModel& model,
                              std::span<const double> features);

struct EpochStats {
  double train_loss = 0.0;
  double val_velocity_mse = 0.0;
};

struct TrainOutcome {
  MlpModel model;                  // parameters of the best epoch
  std::vector<EpochStats> history;
};

// Minibatch training with shuffling, ADAM, weight decay and dropout; early
// stopping watches the validation MSE of (vx, vy) only.
TrainOutcome train(const std::vector<Sample>& train_set,
                   const std::vector<Sample>& val_set,
                   const MlpTopology& topo, const TrainConfig& cfg);

// Central-finite-difference oracle: max_i |analytic_i - numeric_i| /
// max(1, |numeric_i|) over every parameter, with a fixed dropout mask.
// bits selects the arithmetic width (32 or 64).
double check_gradients(const MlpTopology& topo, std::uint64_t seed, double eps,
                       int bits = 64);

}  // namespace velo
