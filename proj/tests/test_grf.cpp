#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "femol/fem.hpp"
#include "femol/grf.hpp"

namespace femol {
namespace {

const std::set<EdgeTag> kAllEdges = {EdgeTag::left, EdgeTag::right, EdgeTag::top, EdgeTag::bottom};

std::shared_ptr<const KlBasis> small_basis(const TriMesh& mesh, Index m = 9) {
  return std::make_shared<const KlBasis>(build_kl_basis(mesh, m, 0.0, 1.0, 0.5));
}

TEST(Covariance, UnitDiagonalAndBitwiseSymmetric) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 7, 5, {});
  const Eigen::MatrixXd c = assemble_covariance(mesh.nodes(), 0.3);
  for (Index i = 0; i < c.rows(); ++i) EXPECT_EQ(c(i, i), 1.0);
  EXPECT_TRUE((c.array() == c.transpose().array()).all());
  EXPECT_GT(c.minCoeff(), 0.0);
}

TEST(Covariance, ValueAtDistanceLSqrt2) {
  const double l = 0.4;
  const std::vector<Eigen::Vector2d> nodes = {{0.0, 0.0}, {l, l}};
  EXPECT_NEAR(assemble_covariance(nodes, l)(0, 1), std::exp(-1.0), 1e-15);
}

TEST(Covariance, RejectsNonPositiveLength) {
  const std::vector<Eigen::Vector2d> nodes = {{0.0, 0.0}};
  EXPECT_THROW(assemble_covariance(nodes, 0.0), std::invalid_argument);
  EXPECT_THROW(assemble_covariance(nodes, -1.0), std::invalid_argument);
}

TEST(TruncatedEig, Identity) {
  const EigenResult r = truncated_eig(Eigen::MatrixXd::Identity(10, 10), 3);
  ASSERT_EQ(r.values.size(), 3);
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(r.values[i], 1.0, 1e-12);
  EXPECT_LT((r.vectors.transpose() * r.vectors - Eigen::Matrix3d::Identity()).norm(), 1e-12);
}

TEST(TruncatedEig, TwoByTwo) {
  Eigen::Matrix2d a;
  a << 2, 1, 1, 2;
  const EigenResult r = truncated_eig(a, 2);
  EXPECT_NEAR(r.values[0], 3.0, 1e-12);
  EXPECT_NEAR(r.values[1], 1.0, 1e-12);
  EXPECT_NEAR(std::abs(r.vectors.col(0).dot(Eigen::Vector2d(1, 1).normalized())), 1.0, 1e-10);
}

TEST(TruncatedEig, MatchesDenseSolverOnCovariance) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 10, 10, {});
  const Eigen::MatrixXd c = assemble_covariance(mesh.nodes(), 0.5);
  const EigenResult r = truncated_eig(c, 9);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dense(c);
  const Index n = c.rows();
  for (Index i = 0; i < 9; ++i) {
    EXPECT_NEAR(r.values[i], dense.eigenvalues()[n - 1 - i], 1e-8 * dense.eigenvalues()[n - 1]);
  }
}

TEST(TruncatedEig, InvalidArguments) {
  EXPECT_THROW(truncated_eig(Eigen::MatrixXd::Identity(3, 3), 4), std::invalid_argument);
  EXPECT_THROW(truncated_eig(Eigen::MatrixXd::Identity(3, 3), 0), std::invalid_argument);
  EXPECT_THROW(truncated_eig(Eigen::MatrixXd::Zero(3, 2), 1), std::invalid_argument);
}

TEST(TruncatedEig, ReportsNonConvergence) {
  // Nearly degenerate leading cluster with a one-iteration budget.
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 10, 10, {});
  SubspaceIterationOptions opts;
  opts.max_iterations = 1;
  opts.extra_vectors = 0;
  EXPECT_THROW(truncated_eig(assemble_covariance(mesh.nodes(), 0.05), 5, opts), std::runtime_error);
}

TEST(KlBasis, PaperMeshInvariants) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 64, 64, kAllEdges);
  ASSERT_EQ(mesh.n_nodes(), 4225);
  const Eigen::MatrixXd c = assemble_covariance(mesh.nodes(), 0.5);
  const EigenResult r = truncated_eig(c, 9);
  for (Index i = 0; i < 9; ++i) {
    EXPECT_GT(r.values[i], 0.0);
    if (i > 0) EXPECT_LE(r.values[i], r.values[i - 1]);
    EXPECT_NEAR(r.vectors.col(i).norm(), 1.0, 1e-12);
    EXPECT_LE((c * r.vectors.col(i) - r.values[i] * r.vectors.col(i)).norm(), 1e-8 * r.values[0]);
  }
}

TEST(KlField, ZeroCoefficientsGiveMean) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 8, 8, kAllEdges);
  KlBasis basis = *small_basis(mesh);
  EXPECT_TRUE(kl_field(basis, Eigen::VectorXd::Zero(9)).isZero(0.0));
  basis.mu = 0.7;
  EXPECT_TRUE((kl_field(basis, Eigen::VectorXd::Zero(9)).array() == 0.7).all());
}

TEST(KlField, SingleMode) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 8, 8, kAllEdges);
  KlBasis basis = *small_basis(mesh);
  basis.sigma = 1.5;
  const Eigen::VectorXd expected = 1.5 * std::sqrt(basis.eigenvalues[0]) * basis.eigenvectors.col(0);
  EXPECT_LT((kl_field(basis, Eigen::VectorXd::Unit(9, 0)) - expected).norm(), 1e-14);
}

TEST(KlField, Linearity) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 8, 8, kAllEdges);
  KlBasis basis = *small_basis(mesh);
  basis.mu = 0.3;
  std::mt19937_64 rng(1);
  const Eigen::VectorXd a = sample_xi(9, rng), b = sample_xi(9, rng);
  const Eigen::VectorXd lhs = kl_field(basis, a + b);
  const Eigen::VectorXd rhs = kl_field(basis, a) + kl_field(basis, b) - Eigen::VectorXd::Constant(lhs.size(), 0.3);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(kl_field(basis, Eigen::VectorXd::Zero(8)), std::invalid_argument);
}

TEST(KlField, PointwiseVarianceMatchesSpectralSum) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 12, 12, kAllEdges);
  const auto basis = small_basis(mesh);
  std::mt19937_64 rng(2);
  const int draws = 10000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(mesh.n_nodes());
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(mesh.n_nodes());
  for (int k = 0; k < draws; ++k) {
    const Eigen::VectorXd a = kl_field(*basis, sample_xi(9, rng));
    sum += a;
    sq += a.cwiseProduct(a);
  }
  std::uniform_int_distribution<Index> pick(0, mesh.n_nodes() - 1);
  for (int j = 0; j < 10; ++j) {
    const Index node = pick(rng);
    const double mean = sum[node] / draws;
    const double var = (sq[node] - draws * mean * mean) / (draws - 1);
    const double expected =
        (basis->eigenvectors.row(node).transpose().array().square() * basis->eigenvalues.array()).sum();
    EXPECT_NEAR(var, expected, 0.1 * expected);
  }
}

TEST(GrfCoefficient, UnitForZeroField) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 8, 8, kAllEdges);
  const auto basis = small_basis(mesh);
  EXPECT_EQ(grf_coefficient(*basis, mesh, Eigen::VectorXd::Zero(9), 0.123, -0.456), 1.0);
  EXPECT_THROW(grf_coefficient(*basis, mesh, Eigen::VectorXd::Zero(9), 1.5, 0.0), std::out_of_range);
}

TEST(GrfCoefficient, PositiveAtRandomPoints) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 8, 8, kAllEdges);
  const auto basis = small_basis(mesh);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 1000; ++k) {
    const Eigen::VectorXd xi = 3.0 * sample_xi(9, rng);
    EXPECT_GT(grf_coefficient(*basis, mesh, xi, u(rng), u(rng)), 0.0);
  }
}

TEST(GrfCoefficient, InterpolatesExpOfNodalField) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 8, 8, kAllEdges);
  const auto basis = small_basis(mesh);
  std::mt19937_64 rng(4);
  const Eigen::VectorXd xi = sample_xi(9, rng);
  const Eigen::VectorXd a = kl_field(*basis, xi);
  for (Index i : {Index{0}, Index{10}, Index{40}, Index{80}}) {
    EXPECT_NEAR(grf_coefficient(*basis, mesh, xi, mesh.node(i).x(), mesh.node(i).y()), std::exp(a[i]), 1e-12);
  }
}

TEST(GrfCoefficient, MonotoneInNodalValue) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 4, 4, kAllEdges);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  Eigen::VectorXd a(mesh.n_nodes());
  for (Index i = 0; i < a.size(); ++i) a[i] = normal(rng);
  const auto rule = QuadratureRule::edge_midpoints();
  const Eigen::MatrixXd before = exp_field_at_quadrature(mesh, a, rule);
  a[12] += 0.5;
  const Eigen::MatrixXd after = exp_field_at_quadrature(mesh, a, rule);
  EXPECT_TRUE((after.array() >= before.array()).all());
  EXPECT_GT((after - before).maxCoeff(), 0.0);
}

TEST(SampleXi, SeededDeterminism) {
  std::mt19937_64 a(42), b(42);
  EXPECT_EQ(sample_xi(9, a), sample_xi(9, b));
}

TEST(SampleXi, MomentsAndCorrelation) {
  std::mt19937_64 rng(6);
  const int n = 100000;
  const Index m = 4;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd xi = sample_xi(m, rng);
    sum += xi;
    outer += xi * xi.transpose();
  }
  const Eigen::VectorXd mean = sum / n;
  const Eigen::MatrixXd cov = outer / n - mean * mean.transpose();
  for (Index i = 0; i < m; ++i) {
    EXPECT_LT(std::abs(mean[i]), 4.0 / std::sqrt(double(n)));
    EXPECT_NEAR(cov(i, i), 1.0, 0.02);
    for (Index j = 0; j < i; ++j) EXPECT_LT(std::abs(cov(i, j) / std::sqrt(cov(i, i) * cov(j, j))), 0.02);
  }
}

TEST(KlBasis, JsonRoundTripIsExact) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 6, 6, kAllEdges);
  KlBasis basis = *small_basis(mesh, 5);
  basis.mu = 0.25;
  basis.sigma = 0.8;
  const KlBasis back = KlBasis::from_json(nlohmann::json::parse(basis.to_json().dump()));
  EXPECT_EQ(back.eigenvalues, basis.eigenvalues);
  EXPECT_EQ(back.eigenvectors, basis.eigenvectors);
  EXPECT_EQ(back.mu, basis.mu);
  EXPECT_EQ(back.sigma, basis.sigma);
  EXPECT_EQ(back.correlation_length, basis.correlation_length);
}

TEST(GrfPoissonModel, RejectsMismatchedBasis) {
  const TriMesh small = build_structured_rect(-1, 1, -1, 1, 4, 4, kAllEdges);
  const TriMesh large = build_structured_rect(-1, 1, -1, 1, 6, 6, kAllEdges);
  EXPECT_THROW(GrfPoissonModel(large, small_basis(small, 3)), std::invalid_argument);
}

TEST(GrfPoissonModel, ZeroCoefficientsReduceToUnitDiffusion) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 6, 6, kAllEdges);
  const GrfPoissonModel model(mesh, small_basis(mesh));
  const Eigen::VectorXd u = interpolate(mesh, [](double x, double y) { return (1 - x * x) * (1 - y * y); });
  // 0.5 |u|_1^2 - int u, with quadrature exact for the quadratic integrands.
  const double h1 = h1_seminorm(mesh, u);
  double mean = 0.0;
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    mean += mesh.element_area(t) * (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
  }
  EXPECT_NEAR(total_energy(*model.bind(Eigen::VectorXd::Zero(9)), u), 0.5 * h1 * h1 - mean, 1e-12);
}

}  // namespace
}  // namespace femol
