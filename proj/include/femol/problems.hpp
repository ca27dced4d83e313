#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "femol/fem.hpp"
#include "femol/mesh.hpp"

namespace femol {

using ElementVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 6, 1>;
using ElementMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 6, 6>;

// ---------------------------------------------------------------------------
// Parameter tuples

struct SpikeParams {
  double x0 = 0.0;
  double y0 = 0.0;
  double r = 0.1;

  Eigen::VectorXd to_vector() const { return Eigen::Vector3d(x0, y0, r); }
  static SpikeParams from_vector(const Eigen::VectorXd& p);
};

struct ForceParams {
  double p = 0.0;   // midpoint of the loaded interval on the top edge
  double fx = 0.0;  // traction per unit reference length
  double fy = 0.0;

  Eigen::VectorXd to_vector() const { return Eigen::Vector3d(p, fx, fy); }
  static ForceParams from_vector(const Eigen::VectorXd& v);
};

struct NeoHookeanMaterial {
  double mu = 0.0;
  double lambda = 0.0;
  double j_floor = 1e-3;

  static NeoHookeanMaterial from_young_poisson(double young, double poisson, double j_floor = 1e-3);
};

/// 0.1 + exp(-|x - x0|^2 / r).
double spike_coefficient(const SpikeParams& params, double x, double y);

// ---------------------------------------------------------------------------
// Neo-Hookean kernels, templated for use with extended precision in tests.

namespace neo_hookean {

/// ln J, continued below j_floor by its second-order Taylor polynomial.
template <typename Scalar>
Scalar safe_log(Scalar j, Scalar j_floor) {
  if (j > j_floor) return std::log(j);
  const Scalar d = j - j_floor;
  return std::log(j_floor) + d / j_floor - d * d / (Scalar(2) * j_floor * j_floor);
}
template <typename Scalar>
Scalar safe_log_d1(Scalar j, Scalar j_floor) {
  if (j > j_floor) return Scalar(1) / j;
  return Scalar(1) / j_floor - (j - j_floor) / (j_floor * j_floor);
}
template <typename Scalar>
Scalar safe_log_d2(Scalar j, Scalar j_floor) {
  if (j > j_floor) return Scalar(-1) / (j * j);
  return Scalar(-1) / (j_floor * j_floor);
}

template <typename Scalar>
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;

/// Stored energy density (mu/2)(tr F^T F - 2) - mu ln J + (lambda/2)(ln J)^2.
template <typename Scalar>
Scalar density(const Mat2<Scalar>& F, Scalar mu, Scalar lambda, Scalar j_floor) {
  const Scalar j = F.determinant();
  const Scalar lj = safe_log(j, j_floor);
  return mu / Scalar(2) * (F.squaredNorm() - Scalar(2)) - mu * lj + lambda / Scalar(2) * lj * lj;
}

/// First Piola-Kirchhoff stress dPsi/dF.
template <typename Scalar>
Mat2<Scalar> stress(const Mat2<Scalar>& F, Scalar mu, Scalar lambda, Scalar j_floor) {
  const Scalar j = F.determinant();
  const Scalar lj = safe_log(j, j_floor);
  const Scalar dg = (lambda * lj - mu) * safe_log_d1(j, j_floor);
  Mat2<Scalar> cof;
  cof << F(1, 1), -F(1, 0), -F(0, 1), F(0, 0);
  return mu * F + dg * cof;
}

/// d^2 Psi / dF dF as a 4x4 matrix over row-major flattened F.
template <typename Scalar>
Eigen::Matrix<Scalar, 4, 4> stress_derivative(const Mat2<Scalar>& F, Scalar mu, Scalar lambda,
                                              Scalar j_floor) {
  const Scalar j = F.determinant();
  const Scalar lj = safe_log(j, j_floor);
  const Scalar d1 = safe_log_d1(j, j_floor);
  const Scalar dg = (lambda * lj - mu) * d1;
  const Scalar ddg = lambda * d1 * d1 + (lambda * lj - mu) * safe_log_d2(j, j_floor);
  Eigen::Matrix<Scalar, 4, 1> cof(F(1, 1), -F(1, 0), -F(0, 1), F(0, 0));
  Eigen::Matrix<Scalar, 4, 4> c = mu * Eigen::Matrix<Scalar, 4, 4>::Identity();
  c += ddg * cof * cof.transpose();
  // Second derivative of det F: d2J/dF00 dF11 = 1, d2J/dF01 dF10 = -1.
  c(0, 3) += dg;
  c(3, 0) += dg;
  c(1, 2) -= dg;
  c(2, 1) -= dg;
  return c;
}

/// Deformation gradient I + grad u from vertex displacements (rows) and
/// barycentric gradients (rows).
template <typename Scalar>
Mat2<Scalar> deformation_gradient(const Eigen::Matrix<Scalar, 3, 2>& u,
                                  const Eigen::Matrix<Scalar, 3, 2>& grad) {
  return Mat2<Scalar>::Identity() + u.transpose() * grad;
}

}  // namespace neo_hookean

// ---------------------------------------------------------------------------
// Energy functionals

/// Element subset used by the stochastic loss. An empty subset means all
/// elements; `scale` multiplies the element sum.
struct ElementSelection {
  std::span<const Index> subset;
  double scale = 1.0;

  bool is_all() const { return subset.empty(); }
  static ElementSelection all() { return {}; }
  /// Throws std::invalid_argument on an empty subset. With `scaled`, the sum
  /// is multiplied by n_triangles / subset.size().
  static ElementSelection sampled(std::span<const Index> subset, Index n_triangles, bool scaled);
};

/// A discrete energy E over V_h for one fixed parameter tuple, split into
/// element-local contributions E_T plus optional boundary terms. All vectors
/// are full nodal vectors (free and constrained slots).
class EnergyFunctional {
 public:
  explicit EnergyFunctional(const TriMesh& mesh) : mesh_(&mesh) {}
  virtual ~EnergyFunctional() = default;

  const TriMesh& mesh() const { return *mesh_; }

  virtual double element_energy(Index t, const Eigen::VectorXd& u) const = 0;
  /// Gradient of element_energy in the element DOFs, ordered as TriMesh::element_dofs.
  virtual ElementVector element_residual(Index t, const Eigen::VectorXd& u) const = 0;
  virtual ElementMatrix element_tangent(Index t, const Eigen::VectorXd& u) const = 0;

  virtual double boundary_energy(const Eigen::VectorXd& /*u*/) const { return 0.0; }
  virtual void add_boundary_residual(const Eigen::VectorXd& /*u*/, Eigen::VectorXd& /*r*/) const {}

 private:
  const TriMesh* mesh_;
};

/// Scaled element sum plus boundary terms (always in full).
double total_energy(const EnergyFunctional& energy, const Eigen::VectorXd& u,
                    const ElementSelection& selection = ElementSelection::all());
/// Full-length gradient of total_energy.
Eigen::VectorXd assemble_residual(const EnergyFunctional& energy, const Eigen::VectorXd& u,
                                  const ElementSelection& selection = ElementSelection::all());
/// Tangent restricted to free DOFs.
Eigen::MatrixXd assemble_tangent_dense(const EnergyFunctional& energy, const Eigen::VectorXd& u);
Eigen::SparseMatrix<double> assemble_tangent_sparse(const EnergyFunctional& energy,
                                                    const Eigen::VectorXd& u);

/// 1/2 int_T A grad v . grad v - int_T f v with A and f sampled at the
/// quadrature points of `rule`. Quadratic, so the tangent is constant.
class PoissonEnergy final : public EnergyFunctional {
 public:
  PoissonEnergy(const TriMesh& mesh, const Eigen::MatrixXd& coeff_at_qp,
                const Eigen::MatrixXd& load_at_qp,
                const QuadratureRule& rule = QuadratureRule::edge_midpoints());

  double element_energy(Index t, const Eigen::VectorXd& u) const override;
  ElementVector element_residual(Index t, const Eigen::VectorXd& u) const override;
  ElementMatrix element_tangent(Index t, const Eigen::VectorXd& u) const override;

  /// area * quadrature mean of A on triangle t.
  double weighted_coefficient(Index t) const { return kappa_[t]; }

 private:
  Eigen::VectorXd kappa_;
  Eigen::Matrix<double, Eigen::Dynamic, 3> load_;
};

/// Plane-strain neo-Hookean stored energy minus a dead-load traction on the
/// top edge over [p - l/2, p + l/2].
class NeoHookeanEnergy final : public EnergyFunctional {
 public:
  NeoHookeanEnergy(const TriMesh& mesh, const NeoHookeanMaterial& material,
                   const ForceParams& force, double traction_length);

  double element_energy(Index t, const Eigen::VectorXd& u) const override;
  ElementVector element_residual(Index t, const Eigen::VectorXd& u) const override;
  ElementMatrix element_tangent(Index t, const Eigen::VectorXd& u) const override;
  double boundary_energy(const Eigen::VectorXd& u) const override;
  void add_boundary_residual(const Eigen::VectorXd& u, Eigen::VectorXd& r) const override;

  const NeoHookeanMaterial& material() const { return material_; }
  /// Stored energy only (traction excluded).
  double stored_energy(const Eigen::VectorXd& u) const;
  /// Smallest det F over all elements.
  double min_jacobian(const Eigen::VectorXd& u) const;
  /// int F . v ds = traction_load . u
  const Eigen::VectorXd& traction_load() const { return traction_load_; }

 private:
  Eigen::Matrix2d deformation_gradient(Index t, const Eigen::VectorXd& u) const;

  NeoHookeanMaterial material_;
  Eigen::VectorXd traction_load_;
};

/// Full-length load vector w with int_{top, |x-p|<=l/2} F . v ds = w . v,
/// integrated exactly for P1 on the overlap of each top edge with the interval.
Eigen::VectorXd traction_load_vector(const TriMesh& mesh, const ForceParams& force,
                                     double traction_length);
/// -int F . v ds over the loaded interval.
double traction_energy(const TriMesh& mesh, const Eigen::VectorXd& u, const ForceParams& force,
                       double traction_length);

// Convenience single-element evaluations.
double poisson_element_energy(const TriMesh& mesh, Index t, const Eigen::VectorXd& u,
                              const std::function<double(double, double)>& coeff,
                              const std::function<double(double, double)>& load);
ElementVector poisson_element_residual(const TriMesh& mesh, Index t, const Eigen::VectorXd& u,
                                       const std::function<double(double, double)>& coeff,
                                       const std::function<double(double, double)>& load);
double neo_hookean_element_energy(const TriMesh& mesh, Index t, const Eigen::VectorXd& u,
                                  const NeoHookeanMaterial& material);
ElementVector neo_hookean_element_residual(const TriMesh& mesh, Index t, const Eigen::VectorXd& u,
                                           const NeoHookeanMaterial& material);
ElementMatrix neo_hookean_element_tangent(const TriMesh& mesh, Index t, const Eigen::VectorXd& u,
                                          const NeoHookeanMaterial& material);

// ---------------------------------------------------------------------------
// Parametrized problems

enum class ProblemKind { spike, grf, beam };
std::string to_string(ProblemKind kind);
ProblemKind problem_kind_from_string(const std::string& name);

/// A parametrized energy: binds a parameter tuple to an EnergyFunctional.
class EnergyModel {
 public:
  virtual ~EnergyModel() = default;
  virtual ProblemKind kind() const = 0;
  virtual const TriMesh& mesh() const = 0;
  virtual Index param_dim() const = 0;
  virtual std::unique_ptr<EnergyFunctional> bind(const Eigen::VectorXd& params) const = 0;
};

/// -div(A(p) grad u) = 1, u = 0 on the boundary, with the spike coefficient.
class SpikePoissonModel final : public EnergyModel {
 public:
  explicit SpikePoissonModel(const TriMesh& mesh, double source = 1.0)
      : mesh_(&mesh), source_(source) {}
  ProblemKind kind() const override { return ProblemKind::spike; }
  const TriMesh& mesh() const override { return *mesh_; }
  Index param_dim() const override { return 3; }
  std::unique_ptr<EnergyFunctional> bind(const Eigen::VectorXd& params) const override;

 private:
  const TriMesh* mesh_;
  double source_;
};

/// Cantilever loaded by a traction patch, parameters (p, Fx, Fy).
class NeoHookeanBeamModel final : public EnergyModel {
 public:
  NeoHookeanBeamModel(const TriMesh& mesh, NeoHookeanMaterial material, double traction_length)
      : mesh_(&mesh), material_(material), traction_length_(traction_length) {}
  ProblemKind kind() const override { return ProblemKind::beam; }
  const TriMesh& mesh() const override { return *mesh_; }
  Index param_dim() const override { return 3; }
  std::unique_ptr<EnergyFunctional> bind(const Eigen::VectorXd& params) const override;
  std::unique_ptr<NeoHookeanEnergy> bind_force(const ForceParams& force) const;

  const NeoHookeanMaterial& material() const { return material_; }
  double traction_length() const { return traction_length_; }

 private:
  const TriMesh* mesh_;
  NeoHookeanMaterial material_;
  double traction_length_;
};

}  // namespace femol
