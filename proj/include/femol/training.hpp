#pragma once

#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "femol/nn.hpp"
#include "femol/problems.hpp"

namespace femol {

/// Piecewise-constant schedule base * factor^floor(iteration / interval).
/// interval == 0 means constant.
struct LrSchedule {
  double base = 1e-4;
  double factor = 1.0;
  long interval = 0;
};

double lr_at(const LrSchedule& schedule, long iteration);

/// Sampling distributions of the parameter tuples.
struct ParamDistributions {
  // spike: x0, y0 ~ U[center_min, center_max], r ~ U[radius_min, radius_max]
  double center_min = -1.0;
  double center_max = 1.0;
  double radius_min = 0.01;
  double radius_max = 0.2;
  // beam: p ~ U[p_min, p_max], Fx ~ N(0, fx_std^2), Fy ~ N(0, fy_std^2)
  double p_min = 0.0;
  double p_max = 1.0;
  double fx_std = 0.0;
  double fy_std = 1.0;
};

struct TrainConfig {
  Index width = 256;
  Index depth = 4;
  Index batch_size = 32;     // M
  Index element_batch = 0;   // N; 0 uses every element
  // Multiplies the Glorot weights of the output layer at initialization.
  double output_init_scale = 1.0;
  bool subset_scaling = true;
  long iterations = 1000;
  LrSchedule lr;
  std::uint64_t seed = 0;
  ParamDistributions distributions;
  long log_every = 1000;
  int threads = 1;
};

/// Parameter tuples as columns (param_dim x count). The GRF model draws
/// standard normal KL coefficients.
Eigen::MatrixXd sample_parameters(const EnergyModel& model, const ParamDistributions& dist, Index count,
                                  std::mt19937_64& rng);

struct LossAndGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
  Eigen::VectorXd sample_energies;
};

/// Mean energy of the network predictions over the batch and its exact
/// parameter gradient. The assembled residual (restricted to free DOFs) is
/// the upstream gradient of the backward pass.
LossAndGrad loss_and_grad(const MlpD& mlp, const EnergyModel& model, const Eigen::MatrixXd& params,
                          const ElementSelection& selection = ElementSelection::all(), int threads = 1);

/// Loss alone, same conventions as loss_and_grad.
double loss_value(const MlpD& mlp, const EnergyModel& model, const Eigen::MatrixXd& params,
                  const ElementSelection& selection = ElementSelection::all(), int threads = 1);

struct LogEntry {
  long iteration = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<LogEntry> entries;  // at the configured cadence
  std::vector<double> losses;     // every iteration
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, long iteration, Eigen::VectorXd params)
      : std::runtime_error(what), iteration(iteration), params(std::move(params)) {}
  long iteration;
  Eigen::VectorXd params;
};

struct TrainResult {
  MlpD mlp;
  TrainLog log;
};

using CheckpointCallback = std::function<void(const MlpD&, long iteration)>;

/// Initialize a network from the seed and run `iterations` Adam steps.
/// Throws TrainingError on a non-finite loss.
TrainResult train(const TrainConfig& config, const EnergyModel& model, const CheckpointCallback& on_checkpoint = {},
                  long checkpoint_every = 0);

/// Mean of losses[begin, begin + count).
double window_mean(const std::vector<double>& values, std::size_t begin, std::size_t count);

}  // namespace femol
