#include "femol/solvers.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Cholesky>

namespace femol {

LinearSolveResult fem_solve_quadratic(const EnergyFunctional& energy, double tol, int max_iterations) {
  const TriMesh& mesh = energy.mesh();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(mesh.dofs().n_full());
  const Eigen::SparseMatrix<double> k = assemble_tangent_sparse(energy, zero);
  const Eigen::VectorXd b = -mesh.dofs().gather(assemble_residual(energy, zero));

  LinearSolveResult result;
  if (b.norm() == 0.0) {
    result.u = Eigen::VectorXd::Zero(b.size());
    return result;
  }
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(tol);
  if (max_iterations > 0) cg.setMaxIterations(max_iterations);
  cg.compute(k);
  result.u = cg.solve(b);
  result.iterations = static_cast<int>(cg.iterations());
  result.relative_residual = (k * result.u - b).norm() / b.norm();
  if (cg.info() != Eigen::Success || !result.u.allFinite()) {
    std::ostringstream msg;
    msg << "CG did not converge after " << cg.iterations() << " iterations, relative residual " << cg.error();
    throw SolverError(msg.str(), cg.error());
  }
  return result;
}

NodalField fem_solve_poisson(const TriMesh& mesh, const std::function<double(double, double)>& coeff,
                             const std::function<double(double, double)>& load, double tol) {
  const auto rule = QuadratureRule::edge_midpoints();
  const PoissonEnergy energy(mesh, sample_at_quadrature(mesh, rule, coeff), sample_at_quadrature(mesh, rule, load),
                             rule);
  return NodalField(mesh, fem_solve_quadratic(energy, tol).u);
}

double energy_norm_squared(const EnergyFunctional& energy, const Eigen::VectorXd& w_free) {
  const TriMesh& mesh = energy.mesh();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(mesh.dofs().n_full());
  const Eigen::SparseMatrix<double> k = assemble_tangent_sparse(energy, zero);
  return w_free.dot(k * w_free);
}

Eigen::MatrixXd finite_difference_tangent(const EnergyFunctional& energy, const Eigen::VectorXd& u_full, double step) {
  const DofMap& map = energy.mesh().dofs();
  Eigen::MatrixXd k(map.n_free(), map.n_free());
  Eigen::VectorXd probe = u_full;
  for (Index j = 0; j < map.n_free(); ++j) {
    const Index full = map.full_index(j);
    probe[full] = u_full[full] + step;
    const Eigen::VectorXd rp = map.gather(assemble_residual(energy, probe));
    probe[full] = u_full[full] - step;
    const Eigen::VectorXd rm = map.gather(assemble_residual(energy, probe));
    probe[full] = u_full[full];
    k.col(j) = (rp - rm) / (2.0 * step);
  }
  return 0.5 * (k + k.transpose());
}

namespace {

// Newton direction from K d = -r. An indefinite K is shifted by tau * I until
// the Cholesky factorization succeeds, so d is always an energy descent
// direction.
Eigen::VectorXd descent_direction(const Eigen::MatrixXd& k, const Eigen::VectorXd& r, double& shift) {
  shift = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() == Eigen::Success) return llt.solve(-r);
  const double scale = k.diagonal().cwiseAbs().maxCoeff();
  shift = 1e-10 * (scale > 0.0 ? scale : 1.0);
  for (int attempt = 0; attempt < 60; ++attempt, shift *= 10.0) {
    llt.compute(k + shift * Eigen::MatrixXd::Identity(k.rows(), k.cols()));
    if (llt.info() == Eigen::Success) return llt.solve(-r);
  }
  return Eigen::VectorXd::Constant(r.size(), std::numeric_limits<double>::quiet_NaN());
}

}  // namespace

NewtonResult newton_solve(const NeoHookeanEnergy& energy, const Eigen::VectorXd& u0, const NewtonOptions& options) {
  const DofMap& map = energy.mesh().dofs();
  if (u0.size() != map.n_free()) throw std::invalid_argument("newton_solve: initial guess length mismatch");
  if (!u0.allFinite()) throw std::invalid_argument("newton_solve: initial guess is not finite");
  const double j_floor = energy.material().j_floor;

  NewtonResult result;
  NewtonReport& report = result.report;
  Eigen::VectorXd u = map.scatter(u0);
  Eigen::VectorXd r = map.gather(assemble_residual(energy, u));
  double rnorm = r.norm();
  double e = total_energy(energy, u);
  report.residual_history.push_back(rnorm);

  const auto finish = [&](bool converged, std::string message) {
    result.u = map.gather(u);
    report.converged = converged;
    report.final_energy = e;
    report.message = std::move(message);
  };

  for (;;) {
    if (rnorm <= options.tol) {
      finish(true, "residual below tolerance");
      return result;
    }
    if (report.iterations >= options.max_iterations) {
      finish(false, "maximum Newton iterations exceeded");
      throw NewtonFailure("newton_solve: no convergence after " + std::to_string(report.iterations) +
                              " iterations, residual " + std::to_string(rnorm),
                          result);
    }
    const Eigen::MatrixXd k = options.fd_tangent ? finite_difference_tangent(energy, u) : assemble_tangent_dense(energy, u);
    double shift = 0.0;
    const Eigen::VectorXd d = descent_direction(k, r, shift);
    if (!d.allFinite()) {
      finish(false, "singular tangent");
      throw NewtonFailure("newton_solve: singular tangent at iteration " + std::to_string(report.iterations), result);
    }
    const Eigen::VectorXd d_full = map.scatter(d);
    const double slope = r.dot(d);  // directional derivative of the energy, < 0
    const bool admissible = energy.min_jacobian(u) > j_floor;

    double alpha = 1.0;
    StepAcceptance how = StepAcceptance::energy;
    bool accepted = false;
    Eigen::VectorXd trial, r_trial;
    double rnorm_trial = 0.0, e_trial = 0.0;
    for (int h = 0; h <= options.max_halvings; ++h, alpha *= 0.5) {
      trial = u + alpha * d_full;
      if (admissible && !(energy.min_jacobian(trial) > j_floor)) continue;
      e_trial = total_energy(energy, trial);
      if (!std::isfinite(e_trial)) continue;
      r_trial = map.gather(assemble_residual(energy, trial));
      rnorm_trial = r_trial.norm();
      if (!std::isfinite(rnorm_trial)) continue;
      if (e_trial <= e + options.sufficient_decrease * alpha * slope && e_trial < e) {
        how = StepAcceptance::energy;
        accepted = true;
        break;
      }
      if (rnorm_trial <= (1.0 - options.sufficient_decrease * alpha) * rnorm) {
        how = StepAcceptance::residual;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      finish(false, "line search stalled");
      throw NewtonFailure("newton_solve: line search stalled at iteration " + std::to_string(report.iterations) +
                              ", residual " + std::to_string(rnorm),
                          result);
    }
    const bool full_step = alpha == 1.0 && shift == 0.0;
    const bool stagnant = full_step && std::abs(e_trial - e) <= options.energy_stagnation * std::abs(e_trial);
    u = std::move(trial);
    r = std::move(r_trial);
    rnorm = rnorm_trial;
    e = e_trial;
    ++report.iterations;
    report.residual_history.push_back(rnorm);
    report.step_sizes.push_back(alpha);
    report.acceptance.push_back(how);
    if (stagnant && rnorm > options.tol) {
      finish(true, "energy stagnation");
      return result;
    }
  }
}

ScheduleResult solve_force_schedule(const NeoHookeanBeamModel& model, const std::vector<ForceParams>& schedule,
                                    const Eigen::VectorXd& u0, const NewtonOptions& options) {
  if (schedule.empty()) throw std::invalid_argument("solve_force_schedule: empty force schedule");
  ScheduleResult out;
  out.u = u0;
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    const auto energy = model.bind_force(schedule[s]);
    try {
      NewtonResult stage = newton_solve(*energy, out.u, options);
      out.u = std::move(stage.u);
      out.stages.push_back(std::move(stage.report));
    } catch (NewtonFailure& failure) {
      out.stages.push_back(failure.partial.report);
      failure.partial.report.message = "stage " + std::to_string(s + 1) + ": " + failure.partial.report.message;
      throw NewtonFailure(std::string("force schedule stage ") + std::to_string(s + 1) + " failed: " + failure.what(),
                          NewtonResult{out.u, failure.partial.report});
    }
  }
  return out;
}

CurlResult curl_experiment(const NeoHookeanBeamModel& model, const std::vector<ForceParams>& schedule,
                           const Eigen::VectorXd& warm_guess, const NewtonOptions& options) {
  if (schedule.empty()) throw std::invalid_argument("curl_experiment: empty force schedule");
  CurlResult result;
  result.zero_start =
      solve_force_schedule(model, schedule, Eigen::VectorXd::Zero(model.mesh().n_free()), options);
  result.warm_start = solve_force_schedule(model, {schedule.back()}, warm_guess, options);
  return result;
}

Eigen::VectorXd fem_oracle(const EnergyModel& model, const Eigen::VectorXd& params, double tol) {
  if (model.kind() == ProblemKind::beam) {
    const auto& beam = static_cast<const NeoHookeanBeamModel&>(model);
    NewtonOptions options;
    options.tol = tol;
    const auto energy = beam.bind_force(ForceParams::from_vector(params));
    return newton_solve(*energy, Eigen::VectorXd::Zero(model.mesh().n_free()), options).u;
  }
  const auto energy = model.bind(params);
  return fem_solve_quadratic(*energy, tol).u;
}

}  // namespace femol
