#pragma once

#include <json.hpp>

#include "latmap/nn.hpp"

namespace latmap::nn {

// Checkpoint block: {"layers":[...],"activations":[...],"weights":[flat row-major
// per layer],"biases":[...]}.
nlohmann::json net_to_json(const DenseNet& net);
DenseNet net_from_json(const nlohmann::json& j);

nlohmann::json lstm_to_json(const LstmCellParams& p);
LstmCellParams lstm_from_json(const nlohmann::json& j);

}  // namespace latmap::nn
