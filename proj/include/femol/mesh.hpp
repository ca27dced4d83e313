#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace femol {

using Index = std::int64_t;

enum class EdgeTag : std::uint8_t { left, right, top, bottom };

std::string to_string(EdgeTag tag);
EdgeTag edge_tag_from_string(const std::string& name);

struct BoundaryEdge {
  Index a = 0;
  Index b = 0;
  EdgeTag tag = EdgeTag::bottom;
};

/// Constant P1 data of one triangle.
struct ElementGeometry {
  double area = 0.0;
  /// Row i is the gradient of the barycentric basis function of vertex i.
  Eigen::Matrix<double, 3, 2> grad_basis = Eigen::Matrix<double, 3, 2>::Zero();
  std::array<Index, 3> vertex_ids{};
};

/// Compute area and barycentric gradients of a triangle from its vertices.
template <typename Scalar>
void p1_geometry(const Eigen::Matrix<Scalar, 2, 1>& x0, const Eigen::Matrix<Scalar, 2, 1>& x1,
                 const Eigen::Matrix<Scalar, 2, 1>& x2, Scalar& area,
                 Eigen::Matrix<Scalar, 3, 2>& grad) {
  const Eigen::Matrix<Scalar, 2, 1> e1 = x1 - x0;
  const Eigen::Matrix<Scalar, 2, 1> e2 = x2 - x0;
  const Scalar det = e1.x() * e2.y() - e1.y() * e2.x();
  area = det / Scalar(2);
  // grad(lambda_1) and grad(lambda_2) are the rows of the inverse Jacobian.
  grad(1, 0) = e2.y() / det;
  grad(1, 1) = -e2.x() / det;
  grad(2, 0) = -e1.y() / det;
  grad(2, 1) = e1.x() / det;
  grad.row(0) = -grad.row(1) - grad.row(2);
}

/// Maps full nodal indices to free-DOF indices. A full index is
/// `node * components + component`; constrained entries map to -1.
class DofMap {
 public:
  DofMap() = default;
  DofMap(Index n_nodes, int components, const std::vector<bool>& node_fixed);

  int components() const { return components_; }
  Index n_full() const { return static_cast<Index>(full_to_free_.size()); }
  Index n_free() const { return static_cast<Index>(free_to_full_.size()); }
  Index free_index(Index full) const { return full_to_free_[static_cast<std::size_t>(full)]; }
  Index full_index(Index free) const { return free_to_full_[static_cast<std::size_t>(free)]; }
  bool is_free(Index full) const { return free_index(full) >= 0; }

  /// Free vector to full nodal vector; constrained slots take `dirichlet`
  /// (all zero when empty).
  Eigen::VectorXd scatter(const Eigen::VectorXd& free,
                          const Eigen::VectorXd& dirichlet = Eigen::VectorXd()) const;
  Eigen::VectorXd gather(const Eigen::VectorXd& full) const;

 private:
  int components_ = 1;
  std::vector<Index> full_to_free_;
  std::vector<Index> free_to_full_;
};

/// Immutable triangular mesh of a rectangle with a P1 DOF map.
class TriMesh {
 public:
  TriMesh(std::vector<Eigen::Vector2d> nodes, std::vector<std::array<Index, 3>> triangles,
          std::vector<BoundaryEdge> boundary_edges, std::set<EdgeTag> dirichlet_tags,
          int components);

  Index n_nodes() const { return static_cast<Index>(nodes_.size()); }
  Index n_triangles() const { return static_cast<Index>(triangles_.size()); }
  Index n_free() const { return dofs_.n_free(); }
  int components() const { return dofs_.components(); }
  /// Local DOFs per element (3 or 6).
  int element_dofs_count() const { return 3 * components(); }

  const std::vector<Eigen::Vector2d>& nodes() const { return nodes_; }
  const Eigen::Vector2d& node(Index i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::array<Index, 3>& triangle(Index t) const {
    return triangles_[static_cast<std::size_t>(t)];
  }
  const std::vector<std::array<Index, 3>>& triangles() const { return triangles_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_edges_; }
  const std::vector<Index>& dirichlet_nodes() const { return dirichlet_nodes_; }
  const DofMap& dofs() const { return dofs_; }
  double h() const { return h_; }
  double area() const;
  Eigen::AlignedBox2d bounding_box() const;

  /// Throws std::out_of_range for an invalid index.
  ElementGeometry element_geometry(Index t) const;
  /// Unchecked cached access, for inner loops.
  double element_area(Index t) const { return areas_[static_cast<std::size_t>(t)]; }
  const Eigen::Matrix<double, 3, 2>& element_grad(Index t) const {
    return grads_[static_cast<std::size_t>(t)];
  }
  /// Full-vector indices of the element's DOFs, vertex-major.
  std::array<Index, 6> element_dofs(Index t) const;

  /// Triangle containing (x, y) and its barycentric coordinates; -1 if outside.
  Index locate(const Eigen::Vector2d& point, Eigen::Vector3d& barycentric, double tol = 1e-12) const;

 private:
  std::vector<Eigen::Vector2d> nodes_;
  std::vector<std::array<Index, 3>> triangles_;
  std::vector<BoundaryEdge> boundary_edges_;
  std::vector<Index> dirichlet_nodes_;
  DofMap dofs_;
  std::vector<double> areas_;
  std::vector<Eigen::Matrix<double, 3, 2>> grads_;
  double h_ = 0.0;
};

/// Structured mesh of [x_min,x_max]x[y_min,y_max] with nx*ny cells, each split
/// along its bottom-left to top-right diagonal. Nodes are numbered row by row.
TriMesh build_structured_rect(double x_min, double x_max, double y_min, double y_max, Index nx,
                              Index ny, const std::set<EdgeTag>& dirichlet, int components = 1);

/// Cantilever beam [0,length]x[0,height] clamped on the left edge, vector P1.
TriMesh build_beam_mesh(double length = 1.0, double height = 0.05, Index nx = 40, Index ny = 2);

/// Same geometry with nodes relabelled: new node k is old node permutation[k].
TriMesh renumber_nodes(const TriMesh& mesh, std::span<const Index> permutation,
                       const std::set<EdgeTag>& dirichlet);

/// N distinct triangle indices drawn uniformly without replacement.
std::vector<Index> sample_element_batch(const TriMesh& mesh, Index count, std::mt19937_64& rng);

}  // namespace femol
