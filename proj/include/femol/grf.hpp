#pragma once

#include <memory>
#include <random>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "femol/mesh.hpp"
#include "femol/problems.hpp"

namespace femol {

/// Truncated Karhunen-Loeve basis of a Gaussian field on the mesh nodes.
struct KlBasis {
  Eigen::VectorXd eigenvalues;   // descending, positive
  Eigen::MatrixXd eigenvectors;  // n_nodes x m, unit Euclidean norm columns
  double mu = 0.0;
  double sigma = 1.0;
  double correlation_length = 0.5;

  Index size() const { return eigenvalues.size(); }

  nlohmann::json to_json() const;
  static KlBasis from_json(const nlohmann::json& j);
};

/// Nodal covariance C_ij = exp(-|x_i - x_j|^2 / (2 L^2)).
Eigen::MatrixXd assemble_covariance(const std::vector<Eigen::Vector2d>& nodes, double correlation_length);

struct EigenResult {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // orthonormal columns
  int iterations = 0;
  double max_residual = 0.0;  // max_i |C v_i - lambda_i v_i|
};

struct SubspaceIterationOptions {
  Index extra_vectors = 5;
  int max_iterations = 5000;
  double relative_tolerance = 1e-8;  // residual bound relative to the largest eigenvalue
  std::uint64_t seed = 12345;
};

/// Leading `count` eigenpairs of a symmetric matrix by block subspace
/// iteration with Rayleigh-Ritz projection and locking of converged pairs.
/// Throws std::runtime_error on non-convergence.
EigenResult truncated_eig(const Eigen::MatrixXd& matrix, Index count,
                          const SubspaceIterationOptions& options = {});

/// Assemble the covariance on the mesh nodes and keep the leading modes.
KlBasis build_kl_basis(const TriMesh& mesh, Index n_kl, double mu, double sigma, double correlation_length);

/// mu + sigma * sum_i sqrt(lambda_i) phi_i xi_i at every node.
Eigen::VectorXd kl_field(const KlBasis& basis, const Eigen::VectorXd& xi);

/// exp of the P1 interpolant of the KL field at (x, y). Throws
/// std::out_of_range for points outside the mesh.
double grf_coefficient(const KlBasis& basis, const TriMesh& mesh, const Eigen::VectorXd& xi, double x,
                       double y);

/// m independent standard normals.
Eigen::VectorXd sample_xi(Index m, std::mt19937_64& rng);

/// exp(a) at the quadrature points of each triangle, a the P1 interpolant of
/// the nodal field.
Eigen::MatrixXd exp_field_at_quadrature(const TriMesh& mesh, const Eigen::VectorXd& nodal_field,
                                        const QuadratureRule& rule);

/// -div(exp(a(xi)) grad u) = 1, u = 0 on the boundary.
class GrfPoissonModel final : public EnergyModel {
 public:
  GrfPoissonModel(const TriMesh& mesh, std::shared_ptr<const KlBasis> basis, double source = 1.0);
  ProblemKind kind() const override { return ProblemKind::grf; }
  const TriMesh& mesh() const override { return *mesh_; }
  Index param_dim() const override { return basis_->size(); }
  std::unique_ptr<EnergyFunctional> bind(const Eigen::VectorXd& xi) const override;
  const KlBasis& basis() const { return *basis_; }

 private:
  const TriMesh* mesh_;
  std::shared_ptr<const KlBasis> basis_;
  double source_;
};

}  // namespace femol
