#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "femol/mesh.hpp"

namespace femol {

template <typename Scalar>
Scalar elu(Scalar x) {
  return x > Scalar(0) ? x : std::expm1(x);
}

template <typename Scalar>
Scalar elu_prime(Scalar x) {
  return x > Scalar(0) ? Scalar(1) : std::exp(x);
}

/// Fully connected network: affine maps with ELU between them and a linear
/// output layer. All weights and biases live in one flat parameter vector,
/// layer by layer, each weight matrix column-major followed by its bias.
template <typename Scalar>
class Mlp {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  /// Intermediate values of a batched forward pass.
  struct Cache {
    std::vector<Matrix> inputs;  // input of every affine layer (inputs[0] is the batch)
    std::vector<Matrix> pre;     // pre-activations of the hidden layers
  };

  Mlp() = default;

  /// Network with all parameters zero.
  explicit Mlp(std::vector<Index> layer_dims) : dims_(std::move(layer_dims)) {
    if (dims_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output dims");
    Index total = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      if (dims_[l] < 1 || dims_[l + 1] < 1) throw std::invalid_argument("Mlp: layer dims must be positive");
      offsets_.push_back(total);
      total += dims_[l + 1] * dims_[l] + dims_[l + 1];
    }
    theta_ = Vector::Zero(total);
  }

  /// Glorot-uniform weights, zero biases.
  static Mlp glorot(std::vector<Index> layer_dims, std::mt19937_64& rng) {
    Mlp net(std::move(layer_dims));
    for (Index l = 0; l < net.n_layers(); ++l) {
      const double limit = std::sqrt(6.0 / static_cast<double>(net.dims_[l] + net.dims_[l + 1]));
      std::uniform_real_distribution<double> dist(-limit, limit);
      auto w = net.weight(l);
      for (Index j = 0; j < w.cols(); ++j) {
        for (Index i = 0; i < w.rows(); ++i) w(i, j) = Scalar(dist(rng));
      }
    }
    return net;
  }

  const std::vector<Index>& layer_dims() const { return dims_; }
  Index n_layers() const { return static_cast<Index>(dims_.size()) - 1; }
  Index input_dim() const { return dims_.front(); }
  Index output_dim() const { return dims_.back(); }
  Index n_parameters() const { return theta_.size(); }

  Vector& parameters() { return theta_; }
  const Vector& parameters() const { return theta_; }

  Eigen::Map<Matrix> weight(Index l) {
    return {theta_.data() + offsets_[l], dims_[l + 1], dims_[l]};
  }
  Eigen::Map<const Matrix> weight(Index l) const {
    return {theta_.data() + offsets_[l], dims_[l + 1], dims_[l]};
  }
  Eigen::Map<Vector> bias(Index l) {
    return {theta_.data() + offsets_[l] + dims_[l + 1] * dims_[l], dims_[l + 1]};
  }
  Eigen::Map<const Vector> bias(Index l) const {
    return {theta_.data() + offsets_[l] + dims_[l + 1] * dims_[l], dims_[l + 1]};
  }

  /// Batched forward pass; columns of `batch` are parameter tuples.
  Matrix forward(const Matrix& batch, Cache* cache = nullptr) const {
    if (batch.rows() != input_dim()) {
      throw std::invalid_argument("Mlp::forward: input has " + std::to_string(batch.rows()) +
                                  " rows, network expects " + std::to_string(input_dim()));
    }
    if (cache) {
      cache->inputs.assign(static_cast<std::size_t>(n_layers()), Matrix());
      cache->pre.assign(static_cast<std::size_t>(n_layers() - 1), Matrix());
    }
    Matrix a = batch;
    for (Index l = 0; l < n_layers(); ++l) {
      Matrix z = weight(l) * a;
      z.colwise() += bias(l);
      if (cache) cache->inputs[static_cast<std::size_t>(l)] = std::move(a);
      if (l + 1 == n_layers()) return z;
      a = z.unaryExpr([](Scalar v) { return elu(v); });
      if (cache) cache->pre[static_cast<std::size_t>(l)] = std::move(z);
    }
    return a;
  }

  Vector forward(const Vector& p) const {
    const Matrix out = forward(Matrix(p));
    return out.col(0);
  }

  /// Gradient with respect to all parameters of sum_k upstream.col(k) . output.col(k).
  Vector backward(const Cache& cache, const Matrix& upstream) const {
    if (cache.inputs.size() != static_cast<std::size_t>(n_layers())) {
      throw std::invalid_argument("Mlp::backward: cache does not match the network");
    }
    const Index batch = cache.inputs.front().cols();
    if (upstream.rows() != output_dim() || upstream.cols() != batch) {
      throw std::invalid_argument("Mlp::backward: upstream gradient shape mismatch");
    }
    Vector grad(n_parameters());
    Matrix delta = upstream;
    for (Index l = n_layers() - 1; l >= 0; --l) {
      const auto& in = cache.inputs[static_cast<std::size_t>(l)];
      Eigen::Map<Matrix> gw(grad.data() + offsets_[l], dims_[l + 1], dims_[l]);
      Eigen::Map<Vector> gb(grad.data() + offsets_[l] + dims_[l + 1] * dims_[l], dims_[l + 1]);
      gw.noalias() = delta * in.transpose();
      gb = delta.rowwise().sum();
      if (l == 0) break;
      delta = weight(l).transpose() * delta;
      // For z <= 0, elu'(z) = elu(z) + 1 and elu(z) is the stored input of layer l.
      const auto& z = cache.pre[static_cast<std::size_t>(l - 1)];
      for (Index j = 0; j < delta.cols(); ++j) {
        for (Index i = 0; i < delta.rows(); ++i) {
          if (!(z(i, j) > Scalar(0))) delta(i, j) *= in(i, j) + Scalar(1);
        }
      }
    }
    return grad;
  }

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> out(dims_);
    out.parameters() = theta_.template cast<Other>();
    return out;
  }

 private:
  std::vector<Index> dims_;
  std::vector<Index> offsets_;
  Vector theta_;
};

using MlpD = Mlp<double>;

/// Layer dims [d, width x depth, n_out].
std::vector<Index> hidden_layer_dims(Index input_dim, Index width, Index depth, Index output_dim);

/// Adam optimizer state with bias correction.
template <typename Scalar>
struct AdamState {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector m;
  Vector v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(Index n = 0) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}
};

template <typename Scalar>
void adam_step(AdamState<Scalar>& state, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& theta,
               const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& grad, double learning_rate) {
  if (theta.size() != grad.size() || state.m.size() != theta.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  ++state.step;
  const Scalar b1 = Scalar(state.beta1), b2 = Scalar(state.beta2);
  state.m = b1 * state.m + (Scalar(1) - b1) * grad;
  state.v = b2 * state.v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
  const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(state.step));
  const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(state.step));
  const Scalar lr = Scalar(learning_rate);
  const Scalar eps = Scalar(state.epsilon);
  theta.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

// ---------------------------------------------------------------------------
// Checkpoints

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  MlpD mlp;
  nlohmann::json meta = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();  // optional payloads such as a KL basis
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Throws CheckpointError naming the mismatching dimension.
void check_checkpoint_dims(const MlpD& mlp, Index input_dim, Index output_dim);

}  // namespace femol
