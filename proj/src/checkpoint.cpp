#include "latmap/checkpoint.hpp"

#include "latmap/error.hpp"

namespace latmap::nn {

using nlohmann::json;

json net_to_json(const DenseNet& net) {
  json j;
  j["layers"] = net.sizes;
  json acts = json::array();
  for (auto a : net.activations) acts.push_back(activation_name(a));
  j["activations"] = acts;
  j["weights"] = net.weights;
  j["biases"] = net.biases;
  return j;
}

DenseNet net_from_json(const json& j) {
  DenseNet net;
  net.sizes = j.at("layers").get<std::vector<int>>();
  for (const auto& a : j.at("activations"))
    net.activations.push_back(activation_from_string(a.get<std::string>()));
  net.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  require(net.weights.size() + 1 == net.sizes.size() &&
              net.activations.size() == net.weights.size() &&
              net.biases.size() == net.weights.size(),
          ErrorCode::io, "inconsistent net checkpoint");
  for (size_t l = 0; l < net.weights.size(); ++l)
    require(static_cast<int>(net.weights[l].size()) == net.sizes[l] * net.sizes[l + 1] &&
                static_cast<int>(net.biases[l].size()) == net.sizes[l + 1],
            ErrorCode::io, "net checkpoint shape mismatch");
  return net;
}

json lstm_to_json(const LstmCellParams& p) {
  json j;
  j["input_size"] = p.input_size;
  j["hidden_size"] = p.hidden_size;
  j["w_ih"] = p.w_ih;
  j["w_hh"] = p.w_hh;
  j["bias"] = p.bias;
  return j;
}

LstmCellParams lstm_from_json(const json& j) {
  LstmCellParams p;
  p.input_size = j.at("input_size").get<int>();
  p.hidden_size = j.at("hidden_size").get<int>();
  p.w_ih = j.at("w_ih").get<std::vector<double>>();
  p.w_hh = j.at("w_hh").get<std::vector<double>>();
  p.bias = j.at("bias").get<std::vector<double>>();
  require(p.w_ih.size() == static_cast<size_t>(4 * p.hidden_size) * p.input_size &&
              p.w_hh.size() == static_cast<size_t>(4 * p.hidden_size) * p.hidden_size &&
              p.bias.size() == static_cast<size_t>(4 * p.hidden_size),
          ErrorCode::io, "lstm checkpoint shape mismatch");
  return p;
}

}  // namespace latmap::nn
