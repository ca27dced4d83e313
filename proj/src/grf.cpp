#include "femol/grf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace femol {

nlohmann::json KlBasis::to_json() const {
  nlohmann::json j;
  j["mu"] = mu;
  j["sigma"] = sigma;
  j["correlation_length"] = correlation_length;
  j["eigenvalues"] = std::vector<double>(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
  auto vecs = nlohmann::json::array();
  for (Index i = 0; i < eigenvectors.cols(); ++i) {
    const Eigen::VectorXd col = eigenvectors.col(i);
    vecs.push_back(std::vector<double>(col.data(), col.data() + col.size()));
  }
  j["eigenvectors"] = std::move(vecs);
  return j;
}

KlBasis KlBasis::from_json(const nlohmann::json& j) {
  KlBasis b;
  b.mu = j.at("mu").get<double>();
  b.sigma = j.at("sigma").get<double>();
  b.correlation_length = j.at("correlation_length").get<double>();
  const auto values = j.at("eigenvalues").get<std::vector<double>>();
  const auto& vecs = j.at("eigenvectors");
  if (vecs.size() != values.size()) throw std::runtime_error("kl_basis: eigenvalue/eigenvector count mismatch");
  b.eigenvalues = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    const auto col = vecs[i].get<std::vector<double>>();
    if (i == 0) b.eigenvectors.resize(static_cast<Index>(col.size()), static_cast<Index>(vecs.size()));
    if (static_cast<Index>(col.size()) != b.eigenvectors.rows()) {
      throw std::runtime_error("kl_basis: eigenvector length mismatch");
    }
    b.eigenvectors.col(static_cast<Index>(i)) = Eigen::Map<const Eigen::VectorXd>(col.data(), b.eigenvectors.rows());
  }
  return b;
}

Eigen::MatrixXd assemble_covariance(const std::vector<Eigen::Vector2d>& nodes, double correlation_length) {
  if (!(correlation_length > 0.0)) throw std::invalid_argument("assemble_covariance: L must be positive");
  const auto n = static_cast<Index>(nodes.size());
  const double inv = 1.0 / (2.0 * correlation_length * correlation_length);
  Eigen::MatrixXd c(n, n);
  for (Index j = 0; j < n; ++j) {
    c(j, j) = 1.0;
    for (Index i = j + 1; i < n; ++i) {
      const double v = std::exp(-(nodes[static_cast<std::size_t>(i)] - nodes[static_cast<std::size_t>(j)]).squaredNorm() * inv);
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

namespace {

// Orthonormalize `block` against the orthonormal columns of `locked` and itself.
Eigen::MatrixXd orthonormalize_against(const Eigen::MatrixXd& locked, Eigen::MatrixXd block) {
  for (int pass = 0; pass < 2; ++pass) {
    if (locked.cols() > 0) block -= locked * (locked.transpose() * block);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(block);
  return qr.householderQ() * Eigen::MatrixXd::Identity(block.rows(), block.cols());
}

}  // namespace

EigenResult truncated_eig(const Eigen::MatrixXd& matrix, Index count, const SubspaceIterationOptions& options) {
  const Index n = matrix.rows();
  if (matrix.cols() != n) throw std::invalid_argument("truncated_eig: matrix must be square");
  if (count < 1 || count > n) throw std::invalid_argument("truncated_eig: invalid eigenpair count");
  const Index p = std::min(n, count + options.extra_vectors);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd start(n, p);
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < n; ++i) start(i, j) = normal(rng);
  }
  Eigen::MatrixXd q = orthonormalize_against(Eigen::MatrixXd(n, 0), start);
  Eigen::MatrixXd cq_locked(n, 0);
  Index locked = 0;

  EigenResult result;
  for (int it = 1; it <= options.max_iterations; ++it) {
    Eigen::MatrixXd z(n, p);
    z.leftCols(locked) = cq_locked;
    z.rightCols(p - locked).noalias() = matrix * q.rightCols(p - locked);

    Eigen::MatrixXd h = q.transpose() * z;
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(h);
    // Eigen sorts ascending; reverse to descending.
    const Eigen::MatrixXd s = ritz.eigenvectors().rowwise().reverse();
    const Eigen::VectorXd theta = ritz.eigenvalues().reverse();
    q = q * s;
    z = z * s;

    const double scale = std::abs(theta[0]);
    Eigen::VectorXd residual(p);
    for (Index i = 0; i < p; ++i) residual[i] = (z.col(i) - theta[i] * q.col(i)).norm();
    const double worst = residual.head(count).maxCoeff();
    if (worst <= options.relative_tolerance * scale || p == n) {
      result.values = theta.head(count);
      result.vectors = q.leftCols(count);
      result.iterations = it;
      result.max_residual = worst;
      return result;
    }
    locked = 0;
    while (locked < count && residual[locked] <= options.relative_tolerance * scale) ++locked;

    Eigen::MatrixXd next(n, p);
    next.leftCols(locked) = q.leftCols(locked);
    next.rightCols(p - locked) = orthonormalize_against(q.leftCols(locked), z.rightCols(p - locked));
    q = std::move(next);
    cq_locked = z.leftCols(locked);
    result.max_residual = worst;
  }
  std::ostringstream msg;
  msg << "truncated_eig: no convergence after " << options.max_iterations
      << " iterations, residual " << result.max_residual;
  throw std::runtime_error(msg.str());
}

KlBasis build_kl_basis(const TriMesh& mesh, Index n_kl, double mu, double sigma, double correlation_length) {
  const Eigen::MatrixXd c = assemble_covariance(mesh.nodes(), correlation_length);
  EigenResult eig = truncated_eig(c, n_kl);
  KlBasis b;
  b.eigenvalues = eig.values;
  b.eigenvectors = std::move(eig.vectors);
  // Fix the sign of each mode so that its largest-magnitude entry is positive.
  for (Index i = 0; i < b.eigenvectors.cols(); ++i) {
    Index k = 0;
    b.eigenvectors.col(i).cwiseAbs().maxCoeff(&k);
    if (b.eigenvectors(k, i) < 0.0) b.eigenvectors.col(i) *= -1.0;
  }
  b.mu = mu;
  b.sigma = sigma;
  b.correlation_length = correlation_length;
  return b;
}

Eigen::VectorXd kl_field(const KlBasis& basis, const Eigen::VectorXd& xi) {
  if (xi.size() != basis.size()) {
    throw std::invalid_argument("kl_field: expected " + std::to_string(basis.size()) + " coefficients, got " +
                                std::to_string(xi.size()));
  }
  const Eigen::VectorXd weights = basis.sigma * basis.eigenvalues.cwiseSqrt().cwiseProduct(xi);
  Eigen::VectorXd a = basis.eigenvectors * weights;
  a.array() += basis.mu;
  return a;
}

double grf_coefficient(const KlBasis& basis, const TriMesh& mesh, const Eigen::VectorXd& xi, double x, double y) {
  Eigen::Vector3d bary;
  const Index t = mesh.locate(Eigen::Vector2d(x, y), bary);
  if (t < 0) throw std::out_of_range("grf_coefficient: point outside the mesh");
  const Eigen::VectorXd a = kl_field(basis, xi);
  const auto& tri = mesh.triangle(t);
  return std::exp(bary[0] * a[tri[0]] + bary[1] * a[tri[1]] + bary[2] * a[tri[2]]);
}

Eigen::VectorXd sample_xi(Index m, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd xi(m);
  for (Index i = 0; i < m; ++i) xi[i] = normal(rng);
  return xi;
}

Eigen::MatrixXd exp_field_at_quadrature(const TriMesh& mesh, const Eigen::VectorXd& nodal_field,
                                        const QuadratureRule& rule) {
  const auto nq = static_cast<Index>(rule.points.size());
  Eigen::MatrixXd values(mesh.n_triangles(), nq);
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    const Eigen::Vector3d at(nodal_field[tri[0]], nodal_field[tri[1]], nodal_field[tri[2]]);
    for (Index q = 0; q < nq; ++q) values(t, q) = std::exp(rule.points[static_cast<std::size_t>(q)].dot(at));
  }
  return values;
}

GrfPoissonModel::GrfPoissonModel(const TriMesh& mesh, std::shared_ptr<const KlBasis> basis, double source)
    : mesh_(&mesh), basis_(std::move(basis)), source_(source) {
  if (basis_->eigenvectors.rows() != mesh.n_nodes()) {
    throw std::invalid_argument("GrfPoissonModel: KL basis does not match the mesh node count");
  }
}

std::unique_ptr<EnergyFunctional> GrfPoissonModel::bind(const Eigen::VectorXd& xi) const {
  const auto rule = QuadratureRule::edge_midpoints();
  const Eigen::MatrixXd coeff = exp_field_at_quadrature(*mesh_, kl_field(*basis_, xi), rule);
  const Eigen::MatrixXd load = Eigen::MatrixXd::Constant(mesh_->n_triangles(), 3, source_);
  return std::make_unique<PoissonEnergy>(*mesh_, coeff, load, rule);
}

}  // namespace femol
