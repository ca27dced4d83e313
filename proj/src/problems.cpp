#include "femol/problems.hpp"

#include <limits>
#include <algorithm>
#include <stdexcept>

namespace femol {

SpikeParams SpikeParams::from_vector(const Eigen::VectorXd& p) {
  if (p.size() != 3) throw std::invalid_argument("SpikeParams: expected 3 values");
  return {p[0], p[1], p[2]};
}

ForceParams ForceParams::from_vector(const Eigen::VectorXd& v) {
  if (v.size() != 3) throw std::invalid_argument("ForceParams: expected 3 values");
  return {v[0], v[1], v[2]};
}

NeoHookeanMaterial NeoHookeanMaterial::from_young_poisson(double young, double poisson, double j_floor) {
  if (!(young > 0.0) || !(poisson >= 0.0 && poisson < 0.5)) {
    throw std::invalid_argument("NeoHookeanMaterial: need E > 0 and 0 <= nu < 0.5");
  }
  NeoHookeanMaterial m;
  m.mu = young / (2.0 * (1.0 + poisson));
  m.lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
  m.j_floor = j_floor;
  return m;
}

double spike_coefficient(const SpikeParams& params, double x, double y) {
  if (!(params.r > 0.0)) throw std::invalid_argument("spike_coefficient: radius must be positive");
  const double dx = x - params.x0;
  const double dy = y - params.y0;
  return 0.1 + std::exp(-(dx * dx + dy * dy) / params.r);
}

ElementSelection ElementSelection::sampled(std::span<const Index> subset, Index n_triangles, bool scaled) {
  if (subset.empty()) throw std::invalid_argument("ElementSelection: empty element subset");
  ElementSelection s;
  s.subset = subset;
  s.scale = scaled ? static_cast<double>(n_triangles) / static_cast<double>(subset.size()) : 1.0;
  return s;
}

namespace {

template <typename Fn>
void for_each_selected(const TriMesh& mesh, const ElementSelection& sel, Fn&& fn) {
  if (sel.is_all()) {
    for (Index t = 0; t < mesh.n_triangles(); ++t) fn(t);
  } else {
    for (Index t : sel.subset) fn(t);
  }
}

}  // namespace

double total_energy(const EnergyFunctional& energy, const Eigen::VectorXd& u, const ElementSelection& sel) {
  CompensatedSum sum;
  for_each_selected(energy.mesh(), sel, [&](Index t) { sum.add(energy.element_energy(t, u)); });
  return sel.scale * sum.value() + energy.boundary_energy(u);
}

Eigen::VectorXd assemble_residual(const EnergyFunctional& energy, const Eigen::VectorXd& u,
                                  const ElementSelection& sel) {
  const TriMesh& mesh = energy.mesh();
  const int nd = mesh.element_dofs_count();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(mesh.dofs().n_full());
  for_each_selected(mesh, sel, [&](Index t) {
    const ElementVector re = energy.element_residual(t, u);
    const auto dofs = mesh.element_dofs(t);
    for (int i = 0; i < nd; ++i) r[dofs[static_cast<std::size_t>(i)]] += re[i];
  });
  if (sel.scale != 1.0) r *= sel.scale;
  energy.add_boundary_residual(u, r);
  return r;
}

Eigen::MatrixXd assemble_tangent_dense(const EnergyFunctional& energy, const Eigen::VectorXd& u) {
  const TriMesh& mesh = energy.mesh();
  const DofMap& map = mesh.dofs();
  const int nd = mesh.element_dofs_count();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(map.n_free(), map.n_free());
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const ElementMatrix ke = energy.element_tangent(t, u);
    const auto dofs = mesh.element_dofs(t);
    for (int i = 0; i < nd; ++i) {
      const Index fi = map.free_index(dofs[static_cast<std::size_t>(i)]);
      if (fi < 0) continue;
      for (int j = 0; j < nd; ++j) {
        const Index fj = map.free_index(dofs[static_cast<std::size_t>(j)]);
        if (fj >= 0) k(fi, fj) += ke(i, j);
      }
    }
  }
  return k;
}

Eigen::SparseMatrix<double> assemble_tangent_sparse(const EnergyFunctional& energy, const Eigen::VectorXd& u) {
  const TriMesh& mesh = energy.mesh();
  const DofMap& map = mesh.dofs();
  const int nd = mesh.element_dofs_count();
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(mesh.n_triangles() * nd * nd));
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const ElementMatrix ke = energy.element_tangent(t, u);
    const auto dofs = mesh.element_dofs(t);
    for (int i = 0; i < nd; ++i) {
      const Index fi = map.free_index(dofs[static_cast<std::size_t>(i)]);
      if (fi < 0) continue;
      for (int j = 0; j < nd; ++j) {
        const Index fj = map.free_index(dofs[static_cast<std::size_t>(j)]);
        if (fj >= 0) entries.emplace_back(fi, fj, ke(i, j));
      }
    }
  }
  Eigen::SparseMatrix<double> k(map.n_free(), map.n_free());
  k.setFromTriplets(entries.begin(), entries.end());
  return k;
}

// ---------------------------------------------------------------------------

PoissonEnergy::PoissonEnergy(const TriMesh& mesh, const Eigen::MatrixXd& coeff_at_qp,
                             const Eigen::MatrixXd& load_at_qp, const QuadratureRule& rule)
    : EnergyFunctional(mesh) {
  if (mesh.components() != 1) throw std::invalid_argument("PoissonEnergy: scalar mesh required");
  const auto nq = static_cast<Index>(rule.points.size());
  if (coeff_at_qp.rows() != mesh.n_triangles() || coeff_at_qp.cols() != nq ||
      load_at_qp.rows() != mesh.n_triangles() || load_at_qp.cols() != nq) {
    throw std::invalid_argument("PoissonEnergy: quadrature sample shape mismatch");
  }
  kappa_.resize(mesh.n_triangles());
  load_.resize(mesh.n_triangles(), 3);
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const double area = mesh.element_area(t);
    double k = 0.0;
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    for (Index q = 0; q < nq; ++q) {
      const double w = rule.weights[static_cast<std::size_t>(q)];
      k += w * coeff_at_qp(t, q);
      b += w * load_at_qp(t, q) * rule.points[static_cast<std::size_t>(q)];
    }
    kappa_[t] = area * k;
    load_.row(t) = area * b.transpose();
  }
}

double PoissonEnergy::element_energy(Index t, const Eigen::VectorXd& u) const {
  const auto& tri = mesh().triangle(t);
  const Eigen::Vector3d ut(u[tri[0]], u[tri[1]], u[tri[2]]);
  const Eigen::Vector2d grad = mesh().element_grad(t).transpose() * ut;
  return 0.5 * kappa_[t] * grad.squaredNorm() - load_.row(t).dot(ut);
}

ElementVector PoissonEnergy::element_residual(Index t, const Eigen::VectorXd& u) const {
  const auto& tri = mesh().triangle(t);
  const auto& g = mesh().element_grad(t);
  const Eigen::Vector3d ut(u[tri[0]], u[tri[1]], u[tri[2]]);
  const Eigen::Vector2d grad = g.transpose() * ut;
  return kappa_[t] * (g * grad) - load_.row(t).transpose();
}

ElementMatrix PoissonEnergy::element_tangent(Index t, const Eigen::VectorXd& /*u*/) const {
  const auto& g = mesh().element_grad(t);
  return kappa_[t] * (g * g.transpose());
}

// ---------------------------------------------------------------------------

Eigen::VectorXd traction_load_vector(const TriMesh& mesh, const ForceParams& force, double traction_length) {
  if (mesh.components() != 2) throw std::invalid_argument("traction: vector mesh required");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(mesh.dofs().n_full());
  const double lo = force.p - 0.5 * traction_length;
  const double hi = force.p + 0.5 * traction_length;
  const Eigen::Vector2d f(force.fx, force.fy);
  for (const auto& e : mesh.boundary_edges()) {
    if (e.tag != EdgeTag::top) continue;
    Index a = e.a, b = e.b;
    double xa = mesh.node(a).x(), xb = mesh.node(b).x();
    if (xa > xb) {
      std::swap(a, b);
      std::swap(xa, xb);
    }
    const double s0 = std::max(xa, lo);
    const double s1 = std::min(xb, hi);
    if (!(s1 > s0)) continue;
    // Exact integral of the hat functions of a and b over [s0, s1].
    const double len = xb - xa;
    const double phi_a0 = (xb - s0) / len, phi_a1 = (xb - s1) / len;
    const double wa = 0.5 * (s1 - s0) * (phi_a0 + phi_a1);
    const double wb = 0.5 * (s1 - s0) * ((1.0 - phi_a0) + (1.0 - phi_a1));
    for (int c = 0; c < 2; ++c) {
      w[2 * a + c] += wa * f[c];
      w[2 * b + c] += wb * f[c];
    }
  }
  return w;
}

double traction_energy(const TriMesh& mesh, const Eigen::VectorXd& u, const ForceParams& force,
                       double traction_length) {
  return -traction_load_vector(mesh, force, traction_length).dot(u);
}

NeoHookeanEnergy::NeoHookeanEnergy(const TriMesh& mesh, const NeoHookeanMaterial& material,
                                   const ForceParams& force, double traction_length)
    : EnergyFunctional(mesh),
      material_(material),
      traction_load_(traction_load_vector(mesh, force, traction_length)) {}

Eigen::Matrix2d NeoHookeanEnergy::deformation_gradient(Index t, const Eigen::VectorXd& u) const {
  const auto& tri = mesh().triangle(t);
  Eigen::Matrix<double, 3, 2> ue;
  for (int i = 0; i < 3; ++i) ue.row(i) = u.segment<2>(2 * tri[static_cast<std::size_t>(i)]).transpose();
  return neo_hookean::deformation_gradient<double>(ue, mesh().element_grad(t));
}

double NeoHookeanEnergy::element_energy(Index t, const Eigen::VectorXd& u) const {
  return mesh().element_area(t) *
         neo_hookean::density(deformation_gradient(t, u), material_.mu, material_.lambda, material_.j_floor);
}

ElementVector NeoHookeanEnergy::element_residual(Index t, const Eigen::VectorXd& u) const {
  const Eigen::Matrix2d p =
      neo_hookean::stress(deformation_gradient(t, u), material_.mu, material_.lambda, material_.j_floor);
  const Eigen::Matrix<double, 3, 2> r = mesh().element_area(t) * mesh().element_grad(t) * p.transpose();
  ElementVector out(6);
  for (int i = 0; i < 3; ++i) {
    out[2 * i] = r(i, 0);
    out[2 * i + 1] = r(i, 1);
  }
  return out;
}

ElementMatrix NeoHookeanEnergy::element_tangent(Index t, const Eigen::VectorXd& u) const {
  const Eigen::Matrix4d c = neo_hookean::stress_derivative(deformation_gradient(t, u), material_.mu,
                                                           material_.lambda, material_.j_floor);
  const auto& g = mesh().element_grad(t);
  const double area = mesh().element_area(t);
  ElementMatrix k(6, 6);
  for (int i = 0; i < 3; ++i) {
    for (int a = 0; a < 2; ++a) {
      for (int j = 0; j < 3; ++j) {
        for (int cc = 0; cc < 2; ++cc) {
          double s = 0.0;
          for (int b = 0; b < 2; ++b) {
            for (int d = 0; d < 2; ++d) s += c(2 * a + b, 2 * cc + d) * g(i, b) * g(j, d);
          }
          k(2 * i + a, 2 * j + cc) = area * s;
        }
      }
    }
  }
  return k;
}

double NeoHookeanEnergy::boundary_energy(const Eigen::VectorXd& u) const { return -traction_load_.dot(u); }

void NeoHookeanEnergy::add_boundary_residual(const Eigen::VectorXd& /*u*/, Eigen::VectorXd& r) const {
  r -= traction_load_;
}

double NeoHookeanEnergy::stored_energy(const Eigen::VectorXd& u) const {
  CompensatedSum sum;
  for (Index t = 0; t < mesh().n_triangles(); ++t) sum.add(element_energy(t, u));
  return sum.value();
}

double NeoHookeanEnergy::min_jacobian(const Eigen::VectorXd& u) const {
  double jmin = std::numeric_limits<double>::infinity();
  for (Index t = 0; t < mesh().n_triangles(); ++t) jmin = std::min(jmin, deformation_gradient(t, u).determinant());
  return jmin;
}

// ---------------------------------------------------------------------------

namespace {

PoissonEnergy single_poisson(const TriMesh& mesh, const std::function<double(double, double)>& coeff,
                             const std::function<double(double, double)>& load) {
  const auto rule = QuadratureRule::edge_midpoints();
  return PoissonEnergy(mesh, sample_at_quadrature(mesh, rule, coeff), sample_at_quadrature(mesh, rule, load),
                       rule);
}

}  // namespace

double poisson_element_energy(const TriMesh& mesh, Index t, const Eigen::VectorXd& u,
                              const std::function<double(double, double)>& coeff,
                              const std::function<double(double, double)>& load) {
  return single_poisson(mesh, coeff, load).element_energy(t, u);
}

ElementVector poisson_element_residual(const TriMesh& mesh, Index t, const Eigen::VectorXd& u,
                                       const std::function<double(double, double)>& coeff,
                                       const std::function<double(double, double)>& load) {
  return single_poisson(mesh, coeff, load).element_residual(t, u);
}

double neo_hookean_element_energy(const TriMesh& mesh, Index t, const Eigen::VectorXd& u,
                                  const NeoHookeanMaterial& material) {
  return NeoHookeanEnergy(mesh, material, {}, 0.0).element_energy(t, u);
}

ElementVector neo_hookean_element_residual(const TriMesh& mesh, Index t, const Eigen::VectorXd& u,
                                           const NeoHookeanMaterial& material) {
  return NeoHookeanEnergy(mesh, material, {}, 0.0).element_residual(t, u);
}

ElementMatrix neo_hookean_element_tangent(const TriMesh& mesh, Index t, const Eigen::VectorXd& u,
                                          const NeoHookeanMaterial& material) {
  return NeoHookeanEnergy(mesh, material, {}, 0.0).element_tangent(t, u);
}

// ---------------------------------------------------------------------------

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::spike: return "spike";
    case ProblemKind::grf: return "grf";
    case ProblemKind::beam: return "beam";
  }
  return "?";
}

ProblemKind problem_kind_from_string(const std::string& name) {
  if (name == "spike") return ProblemKind::spike;
  if (name == "grf") return ProblemKind::grf;
  if (name == "beam") return ProblemKind::beam;
  throw std::invalid_argument("unknown problem kind '" + name + "'");
}

std::unique_ptr<EnergyFunctional> SpikePoissonModel::bind(const Eigen::VectorXd& params) const {
  const SpikeParams sp = SpikeParams::from_vector(params);
  if (!(sp.r > 0.0)) throw std::invalid_argument("SpikePoissonModel: radius must be positive");
  const auto rule = QuadratureRule::edge_midpoints();
  const Eigen::MatrixXd coeff =
      sample_at_quadrature(*mesh_, rule, [&](double x, double y) { return spike_coefficient(sp, x, y); });
  const Eigen::MatrixXd load = Eigen::MatrixXd::Constant(mesh_->n_triangles(), 3, source_);
  return std::make_unique<PoissonEnergy>(*mesh_, coeff, load, rule);
}

std::unique_ptr<EnergyFunctional> NeoHookeanBeamModel::bind(const Eigen::VectorXd& params) const {
  return bind_force(ForceParams::from_vector(params));
}

std::unique_ptr<NeoHookeanEnergy> NeoHookeanBeamModel::bind_force(const ForceParams& force) const {
  return std::make_unique<NeoHookeanEnergy>(*mesh_, material_, force, traction_length_);
}

}  // namespace femol
