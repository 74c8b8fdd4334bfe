#include "latmap/nn.hpp"

#include <cmath>

#include "latmap/error.hpp"

namespace latmap::nn {

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "softsign") return Activation::softsign;
  fail(ErrorCode::invalid_argument, "unknown activation: " + name);
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::softsign: return "softsign";
  }
  fail(ErrorCode::invalid_argument, "bad activation enum");
}

double apply_activation(Activation a, double z) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
    case Activation::softsign: return z / (1.0 + std::fabs(z));
  }
  return z;
}

double activation_grad(Activation a, double z) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::softsign: {
      const double d = 1.0 + std::fabs(z);
      return 1.0 / (d * d);
    }
  }
  return 1.0;
}

size_t DenseNet::param_count() const {
  size_t n = 0;
  for (size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

std::vector<std::span<double>> DenseNet::param_views() {
  std::vector<std::span<double>> views;
  for (size_t l = 0; l < weights.size(); ++l) {
    views.emplace_back(weights[l]);
    views.emplace_back(biases[l]);
  }
  return views;
}

std::vector<std::span<const double>> DenseNet::param_views() const {
  std::vector<std::span<const double>> views;
  for (size_t l = 0; l < weights.size(); ++l) {
    views.emplace_back(weights[l]);
    views.emplace_back(biases[l]);
  }
  return views;
}

DenseNet make_dense_net(const std::vector<int>& sizes, Activation hidden, Activation output,
                        Rng& rng) {
  require(sizes.size() >= 2, ErrorCode::invalid_argument, "net needs at least two layer sizes");
  DenseNet net;
  net.sizes = sizes;
  const int n_layers = static_cast<int>(sizes.size()) - 1;
  for (int l = 0; l < n_layers; ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    require(in > 0 && out > 0, ErrorCode::invalid_argument, "layer sizes must be positive");
    const Activation act = (l == n_layers - 1) ? output : hidden;
    const double scale =
        act == Activation::relu ? std::sqrt(2.0 / in) : std::sqrt(1.0 / in);
    std::vector<double> w(static_cast<size_t>(in) * out);
    for (auto& v : w) v = scale * rng.normal();
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(out, 0.0);
    net.activations.push_back(act);
  }
  return net;
}

std::vector<double> forward(const DenseNet& net, std::span<const double> input, Tape* tape) {
  require(static_cast<int>(input.size()) == net.input_size(), ErrorCode::invalid_argument,
          "input size mismatch");
  std::vector<double> x(input.begin(), input.end());
  if (tape) {
    tape->inputs.assign(net.num_layers(), {});
    tape->pre.assign(net.num_layers(), {});
  }
  for (int l = 0; l < net.num_layers(); ++l) {
    const int in = net.sizes[l], out = net.sizes[l + 1];
    if (tape) tape->inputs[l] = x;
    std::vector<double> z(out);
    const double* w = net.weights[l].data();
    for (int i = 0; i < out; ++i) {
      double acc = net.biases[l][i];
      const double* row = w + static_cast<size_t>(i) * in;
      for (int j = 0; j < in; ++j) acc += row[j] * x[j];
      z[i] = acc;
    }
    if (tape) tape->pre[l] = z;
    for (int i = 0; i < out; ++i) z[i] = apply_activation(net.activations[l], z[i]);
    x = std::move(z);
  }
  if (tape) tape->valid = true;
  return x;
}

void NetGrads::init_like(const DenseNet& net) {
  weights.clear();
  biases.clear();
  for (size_t l = 0; l < net.weights.size(); ++l) {
    weights.emplace_back(net.weights[l].size(), 0.0);
    biases.emplace_back(net.biases[l].size(), 0.0);
  }
}

void NetGrads::zero() {
  for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

void NetGrads::scale(double s) {
  for (auto& w : weights)
    for (auto& v : w) v *= s;
  for (auto& b : biases)
    for (auto& v : b) v *= s;
}

std::vector<std::span<const double>> NetGrads::views() const {
  std::vector<std::span<const double>> views;
  for (size_t l = 0; l < weights.size(); ++l) {
    views.emplace_back(weights[l]);
    views.emplace_back(biases[l]);
  }
  return views;
}

std::vector<double> backward(const DenseNet& net, const Tape& tape,
                             std::span<const double> out_grad, NetGrads* grads) {
  require(tape.valid && static_cast<int>(tape.inputs.size()) == net.num_layers(),
          ErrorCode::invalid_state, "tape does not match net");
  require(static_cast<int>(out_grad.size()) == net.output_size(), ErrorCode::invalid_argument,
          "output gradient size mismatch");
  std::vector<double> g(out_grad.begin(), out_grad.end());
  for (int l = net.num_layers() - 1; l >= 0; --l) {
    const int in = net.sizes[l], out = net.sizes[l + 1];
    require(static_cast<int>(tape.pre[l].size()) == out, ErrorCode::invalid_state,
            "tape layer shape mismatch");
    for (int i = 0; i < out; ++i) g[i] *= activation_grad(net.activations[l], tape.pre[l][i]);
    const std::vector<double>& x = tape.inputs[l];
    if (grads) {
      double* gw = grads->weights[l].data();
      for (int i = 0; i < out; ++i) {
        const double gi = g[i];
        double* row = gw + static_cast<size_t>(i) * in;
        for (int j = 0; j < in; ++j) row[j] += gi * x[j];
        grads->biases[l][i] += gi;
      }
    }
    std::vector<double> gin(in, 0.0);
    const double* w = net.weights[l].data();
    for (int i = 0; i < out; ++i) {
      const double gi = g[i];
      const double* row = w + static_cast<size_t>(i) * in;
      for (int j = 0; j < in; ++j) gin[j] += gi * row[j];
    }
    g = std::move(gin);
  }
  return g;
}

Adam::Adam(size_t total_params, const AdamConfig& cfg)
    : cfg_(cfg), m_(total_params, 0.0), v_(total_params, 0.0) {}

void Adam::step(const std::vector<std::span<double>>& params,
                const std::vector<std::span<const double>>& grads) {
  require(params.size() == grads.size(), ErrorCode::invalid_argument,
          "param/grad block count mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  size_t off = 0;
  for (size_t blk = 0; blk < params.size(); ++blk) {
    require(params[blk].size() == grads[blk].size(), ErrorCode::invalid_argument,
            "param/grad block size mismatch");
    double* p = params[blk].data();
    const double* g = grads[blk].data();
    for (size_t i = 0; i < params[blk].size(); ++i, ++off) {
      require(off < m_.size(), ErrorCode::invalid_argument, "adam state too small");
      const double gi = g[i];
      require(std::isfinite(gi), ErrorCode::numeric, "NaN/inf gradient in adam_step");
      m_[off] = cfg_.beta1 * m_[off] + (1.0 - cfg_.beta1) * gi;
      v_[off] = cfg_.beta2 * v_[off] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m_[off] / bc1;
      const double vhat = v_[off] / bc2;
      p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
  require(off == m_.size(), ErrorCode::invalid_argument, "adam state size mismatch");
}

std::vector<std::span<double>> LstmCellParams::param_views() {
  return {std::span<double>(w_ih), std::span<double>(w_hh), std::span<double>(bias)};
}

LstmCellParams make_lstm_cell(int input_size, int hidden_size, Rng& rng) {
  require(input_size > 0 && hidden_size > 0, ErrorCode::invalid_argument,
          "lstm sizes must be positive");
  LstmCellParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  const double si = std::sqrt(1.0 / input_size);
  const double sh = std::sqrt(1.0 / hidden_size);
  p.w_ih.resize(static_cast<size_t>(4 * hidden_size) * input_size);
  p.w_hh.resize(static_cast<size_t>(4 * hidden_size) * hidden_size);
  p.bias.assign(4 * hidden_size, 0.0);
  for (auto& v : p.w_ih) v = si * rng.normal();
  for (auto& v : p.w_hh) v = sh * rng.normal();
  return p;
}

LstmState lstm_zero_state(int hidden_size) {
  LstmState s;
  s.h.assign(hidden_size, 0.0);
  s.c.assign(hidden_size, 0.0);
  return s;
}

namespace {
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace

LstmState lstm_step(const LstmCellParams& p, std::span<const double> input,
                    const LstmState& state) {
  const int H = p.hidden_size;
  require(static_cast<int>(input.size()) == p.input_size, ErrorCode::invalid_argument,
          "lstm input size mismatch");
  require(static_cast<int>(state.h.size()) == H && static_cast<int>(state.c.size()) == H,
          ErrorCode::invalid_argument, "lstm state size mismatch");
  std::vector<double> gates(4 * H);
  for (int i = 0; i < 4 * H; ++i) {
    double acc = p.bias[i];
    const double* wi = p.w_ih.data() + static_cast<size_t>(i) * p.input_size;
    for (int j = 0; j < p.input_size; ++j) acc += wi[j] * input[j];
    const double* wh = p.w_hh.data() + static_cast<size_t>(i) * H;
    for (int j = 0; j < H; ++j) acc += wh[j] * state.h[j];
    gates[i] = acc;
  }
  LstmState out = lstm_zero_state(H);
  for (int j = 0; j < H; ++j) {
    const double ig = sigmoid(gates[j]);
    const double fg = sigmoid(gates[H + j]);
    const double gg = std::tanh(gates[2 * H + j]);
    const double og = sigmoid(gates[3 * H + j]);
    out.c[j] = fg * state.c[j] + ig * gg;
    out.h[j] = og * std::tanh(out.c[j]);
  }
  return out;
}

}  // namespace latmap::nn
