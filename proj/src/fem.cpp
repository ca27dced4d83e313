#include "femol/fem.hpp"

#include <cmath>
#include <stdexcept>

namespace femol {

QuadratureRule QuadratureRule::edge_midpoints() {
  QuadratureRule q;
  q.points = {Eigen::Vector3d(0.5, 0.5, 0.0), Eigen::Vector3d(0.0, 0.5, 0.5),
              Eigen::Vector3d(0.5, 0.0, 0.5)};
  q.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  q.degree = 2;
  return q;
}

QuadratureRule QuadratureRule::centroid() {
  QuadratureRule q;
  q.points = {Eigen::Vector3d::Constant(1.0 / 3.0)};
  q.weights = {1.0};
  q.degree = 1;
  return q;
}

QuadratureRule QuadratureRule::degree5() {
  const double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
  const double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
  QuadratureRule q;
  q.points = {Eigen::Vector3d::Constant(1.0 / 3.0), {a1, b1, b1}, {b1, a1, b1}, {b1, b1, a1},
              {a2, b2, b2}, {b2, a2, b2}, {b2, b2, a2}};
  q.weights = {0.225, w1, w1, w1, w2, w2, w2};
  q.degree = 5;
  return q;
}

NodalField::NodalField(const TriMesh& mesh, Eigen::VectorXd free_values, Eigen::VectorXd dirichlet_values)
    : mesh_(&mesh), free_values_(std::move(free_values)), dirichlet_(std::move(dirichlet_values)) {
  if (free_values_.size() != mesh.n_free()) {
    throw std::invalid_argument("NodalField: free vector has length " +
                                std::to_string(free_values_.size()) + ", mesh has " +
                                std::to_string(mesh.n_free()) + " free DOFs");
  }
  if (dirichlet_.size() != 0 && dirichlet_.size() != mesh.dofs().n_full()) {
    throw std::invalid_argument("NodalField: Dirichlet vector length mismatch");
  }
}

NodalField NodalField::from_full(const TriMesh& mesh, const Eigen::VectorXd& full) {
  Eigen::VectorXd dirichlet = full;
  for (Index k = 0; k < mesh.n_free(); ++k) dirichlet[mesh.dofs().full_index(k)] = 0.0;
  if (dirichlet.isZero(0.0)) dirichlet.resize(0);
  return NodalField(mesh, mesh.dofs().gather(full), std::move(dirichlet));
}

Eigen::VectorXd eval_p1(const TriMesh& mesh, const Eigen::VectorXd& full, Index t,
                        const Eigen::Vector3d& barycentric) {
  const int c = mesh.components();
  const auto& tri = mesh.triangle(t);
  Eigen::VectorXd value = Eigen::VectorXd::Zero(c);
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < c; ++k) value[k] += barycentric[i] * full[tri[static_cast<std::size_t>(i)] * c + k];
  }
  return value;
}

Eigen::VectorXd eval_p1(const NodalField& field, Index t, const Eigen::Vector3d& barycentric) {
  return eval_p1(field.mesh(), field.full(), t, barycentric);
}

Eigen::VectorXd interpolate(const TriMesh& mesh, const std::function<double(double, double)>& fn) {
  Eigen::VectorXd out(mesh.n_nodes());
  for (Index n = 0; n < mesh.n_nodes(); ++n) out[n] = fn(mesh.node(n).x(), mesh.node(n).y());
  return out;
}

double l2_norm(const TriMesh& mesh, const Eigen::VectorXd& full) {
  const auto rule = QuadratureRule::edge_midpoints();
  const int c = mesh.components();
  CompensatedSum sum;
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    double local = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      for (int k = 0; k < c; ++k) {
        double v = 0.0;
        for (int i = 0; i < 3; ++i) v += rule.points[q][i] * full[tri[static_cast<std::size_t>(i)] * c + k];
        local += rule.weights[q] * v * v;
      }
    }
    sum.add(local * mesh.element_area(t));
  }
  return std::sqrt(sum.value());
}

double h1_seminorm(const TriMesh& mesh, const Eigen::VectorXd& full) {
  const int c = mesh.components();
  CompensatedSum sum;
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    const auto& g = mesh.element_grad(t);
    double local = 0.0;
    for (int k = 0; k < c; ++k) {
      Eigen::Vector2d grad = Eigen::Vector2d::Zero();
      for (int i = 0; i < 3; ++i) grad += full[tri[static_cast<std::size_t>(i)] * c + k] * g.row(i).transpose();
      local += grad.squaredNorm();
    }
    sum.add(local * mesh.element_area(t));
  }
  return std::sqrt(sum.value());
}

double l2_error(const TriMesh& mesh, const Eigen::VectorXd& full, const std::function<double(double, double)>& exact) {
  if (mesh.components() != 1) throw std::invalid_argument("l2_error: scalar fields only");
  const auto rule = QuadratureRule::degree5();
  CompensatedSum sum;
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    double local = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Eigen::Vector3d& b = rule.points[q];
      Eigen::Vector2d x = Eigen::Vector2d::Zero();
      double uh = 0.0;
      for (int i = 0; i < 3; ++i) {
        x += b[i] * mesh.node(tri[static_cast<std::size_t>(i)]);
        uh += b[i] * full[tri[static_cast<std::size_t>(i)]];
      }
      const double e = exact(x.x(), x.y()) - uh;
      local += rule.weights[q] * e * e;
    }
    sum.add(local * mesh.element_area(t));
  }
  return std::sqrt(sum.value());
}

double h1_seminorm_error(const TriMesh& mesh, const Eigen::VectorXd& full,
                         const std::function<Eigen::Vector2d(double, double)>& exact_grad) {
  if (mesh.components() != 1) throw std::invalid_argument("h1_seminorm_error: scalar fields only");
  const auto rule = QuadratureRule::degree5();
  CompensatedSum sum;
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    const auto& g = mesh.element_grad(t);
    Eigen::Vector2d grad_h = Eigen::Vector2d::Zero();
    for (int i = 0; i < 3; ++i) grad_h += full[tri[static_cast<std::size_t>(i)]] * g.row(i).transpose();
    double local = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      Eigen::Vector2d x = Eigen::Vector2d::Zero();
      for (int i = 0; i < 3; ++i) x += rule.points[q][i] * mesh.node(tri[static_cast<std::size_t>(i)]);
      local += rule.weights[q] * (exact_grad(x.x(), x.y()) - grad_h).squaredNorm();
    }
    sum.add(local * mesh.element_area(t));
  }
  return std::sqrt(sum.value());
}

double l2_norm(const NodalField& field) { return l2_norm(field.mesh(), field.full()); }
double h1_seminorm(const NodalField& field) { return h1_seminorm(field.mesh(), field.full()); }

Eigen::SparseMatrix<double> assemble_mass_matrix(const TriMesh& mesh) {
  const int c = mesh.components();
  const Index n = mesh.dofs().n_full();
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(mesh.n_triangles() * 9 * c));
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    const double a = mesh.element_area(t);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double m = (i == j ? 2.0 : 1.0) * a / 12.0;
        for (int k = 0; k < c; ++k) {
          entries.emplace_back(tri[static_cast<std::size_t>(i)] * c + k, tri[static_cast<std::size_t>(j)] * c + k, m);
        }
      }
    }
  }
  Eigen::SparseMatrix<double> mass(n, n);
  mass.setFromTriplets(entries.begin(), entries.end());
  return mass;
}

Eigen::MatrixXd sample_at_quadrature(const TriMesh& mesh, const QuadratureRule& rule,
                                     const std::function<double(double, double)>& fn) {
  Eigen::MatrixXd values(mesh.n_triangles(), static_cast<Index>(rule.points.size()));
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      Eigen::Vector2d x = Eigen::Vector2d::Zero();
      for (int i = 0; i < 3; ++i) x += rule.points[q][i] * mesh.node(tri[static_cast<std::size_t>(i)]);
      values(t, static_cast<Index>(q)) = fn(x.x(), x.y());
    }
  }
  return values;
}

}  // namespace femol
