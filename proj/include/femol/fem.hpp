#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "femol/mesh.hpp"

namespace femol {

/// Quadrature on the reference triangle in barycentric coordinates.
struct QuadratureRule {
  std::vector<Eigen::Vector3d> points;
  std::vector<double> weights;  // sum to 1; multiply by the element area
  int degree = 0;

  /// Edge-midpoint rule, exact for quadratics.
  static QuadratureRule edge_midpoints();
  /// Single centroid point, exact for linears.
  static QuadratureRule centroid();
  /// Seven-point Dunavant rule, exact for quintics. Used for errors against
  /// smooth reference functions.
  static QuadratureRule degree5();
};

/// A P1 finite-element function: free DOF values plus the prescribed values
/// on constrained slots.
class NodalField {
 public:
  NodalField(const TriMesh& mesh, Eigen::VectorXd free_values,
             Eigen::VectorXd dirichlet_values = Eigen::VectorXd());

  static NodalField zero(const TriMesh& mesh) {
    return NodalField(mesh, Eigen::VectorXd::Zero(mesh.n_free()));
  }
  static NodalField from_full(const TriMesh& mesh, const Eigen::VectorXd& full);

  const TriMesh& mesh() const { return *mesh_; }
  const Eigen::VectorXd& free_values() const { return free_values_; }
  Eigen::VectorXd& free_values() { return free_values_; }
  const Eigen::VectorXd& dirichlet_values() const { return dirichlet_; }
  bool is_vector() const { return mesh_->components() == 2; }
  Eigen::VectorXd full() const { return mesh_->dofs().scatter(free_values_, dirichlet_); }

 private:
  const TriMesh* mesh_;
  Eigen::VectorXd free_values_;
  Eigen::VectorXd dirichlet_;
};

/// Value of a full nodal vector on triangle t at a barycentric point.
/// Returns a 1- or 2-vector depending on the number of components.
Eigen::VectorXd eval_p1(const TriMesh& mesh, const Eigen::VectorXd& full, Index t,
                        const Eigen::Vector3d& barycentric);
Eigen::VectorXd eval_p1(const NodalField& field, Index t, const Eigen::Vector3d& barycentric);

/// Interpolant of a scalar function at the nodes (full vector).
Eigen::VectorXd interpolate(const TriMesh& mesh, const std::function<double(double, double)>& fn);

double l2_norm(const TriMesh& mesh, const Eigen::VectorXd& full);
double h1_seminorm(const TriMesh& mesh, const Eigen::VectorXd& full);
inline double h1_norm(const TriMesh& mesh, const Eigen::VectorXd& full) {
  const double l2 = l2_norm(mesh, full);
  const double semi = h1_seminorm(mesh, full);
  return std::sqrt(l2 * l2 + semi * semi);
}
double l2_norm(const NodalField& field);
double h1_seminorm(const NodalField& field);

/// ||u - u_h||_{L2} and |u - u_h|_{H1} for a scalar field against an exact
/// solution and its gradient, with the degree-5 rule.
double l2_error(const TriMesh& mesh, const Eigen::VectorXd& full, const std::function<double(double, double)>& exact);
double h1_seminorm_error(const TriMesh& mesh, const Eigen::VectorXd& full,
                         const std::function<Eigen::Vector2d(double, double)>& exact_grad);

/// Consistent P1 mass matrix over all full DOFs.
Eigen::SparseMatrix<double> assemble_mass_matrix(const TriMesh& mesh);

/// Evaluate `fn` at the quadrature points of every triangle; row t holds the
/// values at the points of `rule`.
Eigen::MatrixXd sample_at_quadrature(const TriMesh& mesh, const QuadratureRule& rule,
                                     const std::function<double(double, double)>& fn);

/// Sum with Neumaier compensation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace femol
