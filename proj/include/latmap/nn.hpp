#pragma once

#include <span>
#include <string>
#include <vector>

#include "latmap/rng.hpp"

namespace latmap::nn {

enum class Activation { identity, relu, tanh, softsign };

Activation activation_from_string(const std::string& name);
std::string activation_name(Activation a);

double apply_activation(Activation a, double z);
double activation_grad(Activation a, double z);  // derivative at preactivation z

// Plain dense feed-forward net. weights[l] is sizes[l+1] x sizes[l], row-major;
// activations[l] is applied to layer l's output.
struct DenseNet {
  std::vector<int> sizes;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  std::vector<Activation> activations;

  int input_size() const { return sizes.front(); }
  int output_size() const { return sizes.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  size_t param_count() const;

  // Parameter views in a fixed order (weights then bias per layer), for the
  // optimizer.
  std::vector<std::span<double>> param_views();
  std::vector<std::span<const double>> param_views() const;
};

// Hidden layers use `hidden`, the output layer `output`. Weights get scaled
// normal init (He for relu, Xavier otherwise).
DenseNet make_dense_net(const std::vector<int>& sizes, Activation hidden, Activation output,
                        Rng& rng);

// Per-call tape: everything backward needs.
struct Tape {
  std::vector<std::vector<double>> inputs;  // inputs[l] = activation entering layer l
  std::vector<std::vector<double>> pre;     // preactivations of layer l
  bool valid = false;
};

std::vector<double> forward(const DenseNet& net, std::span<const double> input,
                            Tape* tape = nullptr);

struct NetGrads {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  void init_like(const DenseNet& net);
  void zero();
  void scale(double s);
  std::vector<std::span<const double>> views() const;
};

// Exact reverse-mode gradients of out_grad . output. Returns the input
// gradient; accumulates parameter gradients into `grads` when non-null.
std::vector<double> backward(const DenseNet& net, const Tape& tape,
                             std::span<const double> out_grad, NetGrads* grads);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over an arbitrary set of parameter blocks whose
// total size is fixed at construction.
class Adam {
 public:
  Adam(size_t total_params, const AdamConfig& cfg);

  void step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<const double>>& grads);
  int64_t steps_taken() const { return t_; }
  AdamConfig& config() { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  int64_t t_ = 0;
};

struct LstmCellParams {
  int input_size = 0;
  int hidden_size = 0;
  // gate order: input, forget, cell, output; each block is hidden_size rows
  std::vector<double> w_ih;  // 4H x input_size, row-major
  std::vector<double> w_hh;  // 4H x H
  std::vector<double> bias;  // 4H

  size_t param_count() const { return w_ih.size() + w_hh.size() + bias.size(); }
  std::vector<std::span<double>> param_views();
};

LstmCellParams make_lstm_cell(int input_size, int hidden_size, Rng& rng);

struct LstmState {
  std::vector<double> h, c;
};

LstmState lstm_zero_state(int hidden_size);
LstmState lstm_step(const LstmCellParams& p, std::span<const double> input, const LstmState& state);

}  // namespace latmap::nn
