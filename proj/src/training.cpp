#include "femol/training.hpp"

#include <cmath>
#include <sstream>

#include "femol/parallel.hpp"

namespace femol {

double lr_at(const LrSchedule& schedule, long iteration) {
  if (schedule.interval <= 0) return schedule.base;
  return schedule.base * std::pow(schedule.factor, static_cast<double>(iteration / schedule.interval));
}

Eigen::MatrixXd sample_parameters(const EnergyModel& model, const ParamDistributions& dist, Index count,
                                  std::mt19937_64& rng) {
  Eigen::MatrixXd params(model.param_dim(), count);
  switch (model.kind()) {
    case ProblemKind::spike: {
      std::uniform_real_distribution<double> center(dist.center_min, dist.center_max);
      std::uniform_real_distribution<double> radius(dist.radius_min, dist.radius_max);
      for (Index i = 0; i < count; ++i) {
        params(0, i) = center(rng);
        params(1, i) = center(rng);
        params(2, i) = radius(rng);
      }
      break;
    }
    case ProblemKind::grf: {
      std::normal_distribution<double> normal;
      for (Index i = 0; i < count; ++i) {
        for (Index k = 0; k < params.rows(); ++k) params(k, i) = normal(rng);
      }
      break;
    }
    case ProblemKind::beam: {
      std::uniform_real_distribution<double> position(dist.p_min, dist.p_max);
      std::normal_distribution<double> normal;
      for (Index i = 0; i < count; ++i) {
        params(0, i) = position(rng);
        params(1, i) = dist.fx_std > 0.0 ? dist.fx_std * normal(rng) : 0.0;
        params(2, i) = dist.fy_std > 0.0 ? dist.fy_std * normal(rng) : 0.0;
      }
      break;
    }
  }
  return params;
}

namespace {

struct SampleEval {
  Eigen::VectorXd energies;
  Eigen::MatrixXd residuals;  // free DOFs x batch
};

SampleEval evaluate_samples(const EnergyModel& model, const Eigen::MatrixXd& params, const Eigen::MatrixXd& outputs,
                            const ElementSelection& selection, int threads, bool with_residual) {
  const TriMesh& mesh = model.mesh();
  const Index batch = params.cols();
  SampleEval out;
  out.energies.resize(batch);
  if (with_residual) out.residuals.resize(mesh.n_free(), batch);
  parallel_for(batch, threads, [&](Index i) {
    const auto energy = model.bind(params.col(i));
    const Eigen::VectorXd u = mesh.dofs().scatter(outputs.col(i));
    out.energies[i] = total_energy(*energy, u, selection);
    if (with_residual) out.residuals.col(i) = mesh.dofs().gather(assemble_residual(*energy, u, selection));
  });
  return out;
}

void check_batch(const MlpD& mlp, const EnergyModel& model, const Eigen::MatrixXd& params) {
  if (params.cols() < 1) throw std::invalid_argument("loss_and_grad: empty parameter batch");
  if (params.rows() != model.param_dim()) throw std::invalid_argument("loss_and_grad: parameter dimension mismatch");
  check_checkpoint_dims(mlp, model.param_dim(), model.mesh().n_free());
}

}  // namespace

LossAndGrad loss_and_grad(const MlpD& mlp, const EnergyModel& model, const Eigen::MatrixXd& params,
                          const ElementSelection& selection, int threads) {
  check_batch(mlp, model, params);
  MlpD::Cache cache;
  const Eigen::MatrixXd outputs = mlp.forward(params, &cache);
  SampleEval eval = evaluate_samples(model, params, outputs, selection, threads, true);
  const double inv_m = 1.0 / static_cast<double>(params.cols());
  LossAndGrad result;
  result.loss = eval.energies.sum() * inv_m;
  eval.residuals *= inv_m;
  result.grad = mlp.backward(cache, eval.residuals);
  result.sample_energies = std::move(eval.energies);
  return result;
}

double loss_value(const MlpD& mlp, const EnergyModel& model, const Eigen::MatrixXd& params,
                  const ElementSelection& selection, int threads) {
  check_batch(mlp, model, params);
  const Eigen::MatrixXd outputs = mlp.forward(params);
  const SampleEval eval = evaluate_samples(model, params, outputs, selection, threads, false);
  return eval.energies.sum() / static_cast<double>(params.cols());
}

TrainResult train(const TrainConfig& config, const EnergyModel& model, const CheckpointCallback& on_checkpoint,
                  long checkpoint_every) {
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (config.iterations < 0) throw std::invalid_argument("train: iterations must be >= 0");
  const TriMesh& mesh = model.mesh();
  if (config.element_batch < 0 || config.element_batch > mesh.n_triangles()) {
    throw std::invalid_argument("train: element_batch outside [0, n_triangles]");
  }

  std::mt19937_64 rng(config.seed);
  TrainResult result{MlpD::glorot(hidden_layer_dims(model.param_dim(), config.width, config.depth, mesh.n_free()), rng),
                     {}};
  MlpD& net = result.mlp;
  net.weight(net.n_layers() - 1) *= config.output_init_scale;
  AdamState<double> adam(net.n_parameters());
  result.log.losses.reserve(static_cast<std::size_t>(config.iterations));

  for (long it = 0; it < config.iterations; ++it) {
    const Eigen::MatrixXd params = sample_parameters(model, config.distributions, config.batch_size, rng);
    std::vector<Index> subset;
    ElementSelection selection = ElementSelection::all();
    if (config.element_batch > 0) {
      subset = sample_element_batch(mesh, config.element_batch, rng);
      selection = ElementSelection::sampled(subset, mesh.n_triangles(), config.subset_scaling);
    }

    LossAndGrad lg = loss_and_grad(net, model, params, selection, config.threads);
    if (!std::isfinite(lg.loss) || !lg.grad.allFinite()) {
      Index bad = 0;
      for (Index i = 0; i < lg.sample_energies.size(); ++i) {
        if (!std::isfinite(lg.sample_energies[i])) {
          bad = i;
          break;
        }
      }
      std::ostringstream msg;
      msg << "non-finite loss at iteration " << it << " for parameters [" << params.col(bad).transpose() << "]";
      throw TrainingError(msg.str(), it, params.col(bad));
    }
    const double lr = lr_at(config.lr, it);
    adam_step(adam, net.parameters(), lg.grad, lr);

    result.log.losses.push_back(lg.loss);
    if (config.log_every > 0 && (it % config.log_every == 0 || it + 1 == config.iterations)) {
      result.log.entries.push_back({it, lg.loss, lr});
    }
    if (on_checkpoint && checkpoint_every > 0 && (it + 1) % checkpoint_every == 0) on_checkpoint(net, it + 1);
  }
  return result;
}

double window_mean(const std::vector<double>& values, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > values.size()) throw std::out_of_range("window_mean: window out of range");
  double sum = 0.0;
  for (std::size_t i = begin; i < begin + count; ++i) sum += values[i];
  return sum / static_cast<double>(count);
}

}  // namespace femol
