#include "femol/nn.hpp"

#include <fstream>
#include <sstream>

namespace femol {

std::vector<Index> hidden_layer_dims(Index input_dim, Index width, Index depth, Index output_dim) {
  std::vector<Index> dims{input_dim};
  for (Index i = 0; i < depth; ++i) dims.push_back(width);
  dims.push_back(output_dim);
  return dims;
}

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  const MlpD& net = ckpt.mlp;
  nlohmann::json j;
  j["meta"] = ckpt.meta;
  j["layer_dims"] = net.layer_dims();
  auto weights = nlohmann::json::array();
  auto biases = nlohmann::json::array();
  for (Index l = 0; l < net.n_layers(); ++l) {
    const auto w = net.weight(l);
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(w.size()));
    for (Index r = 0; r < w.rows(); ++r) {
      for (Index c = 0; c < w.cols(); ++c) row_major.push_back(w(r, c));
    }
    weights.push_back(std::move(row_major));
    const auto b = net.bias(l);
    biases.push_back(std::vector<double>(b.data(), b.data() + b.size()));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  for (const auto& [key, value] : ckpt.extra.items()) j[key] = value;
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  const auto require = [&](const char* key) -> const nlohmann::json& {
    if (!j.is_object() || !j.contains(key)) throw CheckpointError(std::string("checkpoint: missing field '") + key + "'");
    return j.at(key);
  };
  Checkpoint ckpt;
  try {
    ckpt.meta = require("meta");
    const auto dims = require("layer_dims").get<std::vector<Index>>();
    ckpt.mlp = MlpD(dims);
    const auto& weights = require("weights");
    const auto& biases = require("biases");
    if (!weights.is_array() || static_cast<Index>(weights.size()) != ckpt.mlp.n_layers()) {
      throw CheckpointError("checkpoint: field 'weights' has the wrong number of layers");
    }
    if (!biases.is_array() || static_cast<Index>(biases.size()) != ckpt.mlp.n_layers()) {
      throw CheckpointError("checkpoint: field 'biases' has the wrong number of layers");
    }
    for (Index l = 0; l < ckpt.mlp.n_layers(); ++l) {
      const auto w = weights[static_cast<std::size_t>(l)].get<std::vector<double>>();
      auto wm = ckpt.mlp.weight(l);
      if (static_cast<Index>(w.size()) != wm.size()) {
        throw CheckpointError("checkpoint: field 'weights[" + std::to_string(l) + "]' has " +
                              std::to_string(w.size()) + " entries, expected " + std::to_string(wm.size()));
      }
      std::size_t k = 0;
      for (Index r = 0; r < wm.rows(); ++r) {
        for (Index c = 0; c < wm.cols(); ++c) wm(r, c) = w[k++];
      }
      const auto b = biases[static_cast<std::size_t>(l)].get<std::vector<double>>();
      auto bm = ckpt.mlp.bias(l);
      if (static_cast<Index>(b.size()) != bm.size()) {
        throw CheckpointError("checkpoint: field 'biases[" + std::to_string(l) + "]' has " +
                              std::to_string(b.size()) + " entries, expected " + std::to_string(bm.size()));
      }
      for (Index i = 0; i < bm.size(); ++i) bm[i] = b[static_cast<std::size_t>(i)];
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed field: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: field 'layer_dims': ") + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "meta" && key != "layer_dims" && key != "weights" && key != "biases") ckpt.extra[key] = value;
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot write " + path.string());
  out << checkpoint_to_json(ckpt).dump() << '\n';
  if (!out) throw CheckpointError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError("checkpoint: " + path.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

void check_checkpoint_dims(const MlpD& mlp, Index input_dim, Index output_dim) {
  if (mlp.input_dim() != input_dim) {
    throw CheckpointError("checkpoint: input dimension " + std::to_string(mlp.input_dim()) +
                          " does not match the problem's " + std::to_string(input_dim) + " parameters");
  }
  if (mlp.output_dim() != output_dim) {
    throw CheckpointError("checkpoint: output dimension (n_free) " + std::to_string(mlp.output_dim()) +
                          " does not match the mesh's " + std::to_string(output_dim) + " free DOFs");
  }
}

}  // namespace femol
