#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "femol/fem.hpp"
#include "femol/problems.hpp"

namespace femol {

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual) : std::runtime_error(what), residual(residual) {}
  double residual;
};

struct LinearSolveResult {
  Eigen::VectorXd u;  // free DOFs
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Minimizer over V_h of a quadratic energy: assembles the free-DOF stiffness
/// K and load b = -r(0) and solves K u = b with Jacobi-preconditioned CG to
/// the given relative residual. Throws SolverError if CG does not converge.
LinearSolveResult fem_solve_quadratic(const EnergyFunctional& energy, double tol = 1e-10, int max_iterations = 0);

/// -div(A grad u) = f with homogeneous Dirichlet data on the mesh's
/// constrained nodes; A and f sampled at the edge-midpoint quadrature points.
NodalField fem_solve_poisson(const TriMesh& mesh, const std::function<double(double, double)>& coeff,
                             const std::function<double(double, double)>& load, double tol = 1e-10);

/// (K w, w) over free DOFs with the energy's tangent at zero.
double energy_norm_squared(const EnergyFunctional& energy, const Eigen::VectorXd& w_free);

struct NewtonOptions {
  double tol = 1e-10;                 // absolute l2 norm of the free residual
  double energy_stagnation = 1e-14;   // relative energy change after a full step
  int max_iterations = 200;
  int max_halvings = 40;
  double sufficient_decrease = 1e-4;  // Armijo constant for both tests
  bool fd_tangent = false;            // cross-validation only
};

/// Line-search test that accepted a step: Armijo decrease of the energy, or
/// a sufficient decrease of the residual norm.
enum class StepAcceptance { energy, residual };

struct NewtonReport {
  int iterations = 0;
  std::vector<double> residual_history;  // ||r|| at the start and after each accepted step
  std::vector<double> step_sizes;
  std::vector<StepAcceptance> acceptance;
  bool converged = false;
  double final_energy = 0.0;
  std::string message;
};

struct NewtonResult {
  Eigen::VectorXd u;  // free DOFs
  NewtonReport report;
};

class NewtonFailure : public std::runtime_error {
 public:
  NewtonFailure(const std::string& what, NewtonResult partial)
      : std::runtime_error(what), partial(std::move(partial)) {}
  NewtonResult partial;
};

/// Damped Newton on the neo-Hookean energy from the initial guess `u0`
/// (free DOFs). Steps are halved until either the energy or the residual norm
/// decreases sufficiently and, when the current state is admissible, every
/// element keeps det F > j_floor. Converged when ||r|| <= tol.
NewtonResult newton_solve(const NeoHookeanEnergy& energy, const Eigen::VectorXd& u0,
                          const NewtonOptions& options = {});

/// Tangent on free DOFs by central differences of the residual.
Eigen::MatrixXd finite_difference_tangent(const EnergyFunctional& energy, const Eigen::VectorXd& u_full,
                                          double step = 1e-6);

struct ScheduleResult {
  Eigen::VectorXd u;
  std::vector<NewtonReport> stages;
};

/// Sequential Newton solves, each starting from the previous converged state.
/// Throws NewtonFailure on the first failing stage; the partial result holds
/// the reports of the stages that ran.
ScheduleResult solve_force_schedule(const NeoHookeanBeamModel& model, const std::vector<ForceParams>& schedule,
                                    const Eigen::VectorXd& u0, const NewtonOptions& options = {});

struct CurlResult {
  ScheduleResult zero_start;   // every stage of the schedule from the unloaded beam
  ScheduleResult warm_start;   // final force only, from the given initial guess
};

/// Curl experiment: forces applied at the free end of the beam in sequence
/// from the zero state versus one solve for the final force from `warm_guess`.
CurlResult curl_experiment(const NeoHookeanBeamModel& model, const std::vector<ForceParams>& schedule,
                           const Eigen::VectorXd& warm_guess, const NewtonOptions& options = {});

/// Per-model oracle: the FEM solution (free DOFs) for a parameter tuple.
/// Poisson models use CG; the beam uses Newton from the zero state.
Eigen::VectorXd fem_oracle(const EnergyModel& model, const Eigen::VectorXd& params, double tol = 1e-10);

}  // namespace femol
