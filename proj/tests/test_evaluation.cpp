#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "femol/evaluation.hpp"
#include "femol/fem.hpp"
#include "femol/grf.hpp"
#include "femol/solvers.hpp"
#include "femol/training.hpp"

namespace femol {
namespace {

const std::set<EdgeTag> kAllEdges = {EdgeTag::left, EdgeTag::right, EdgeTag::top, EdgeTag::bottom};

Predictor oracle_of(const EnergyModel& model) {
  return [&model](const Eigen::VectorXd& p) { return fem_oracle(model, p); };
}

// Oracle plus a smooth perturbation sampled at the free nodes, so that the
// prediction depends only on geometry and not on the node numbering.
Predictor perturbed_oracle(const EnergyModel& model, double amplitude) {
  return [&model, amplitude](const Eigen::VectorXd& p) {
    const TriMesh& mesh = model.mesh();
    Eigen::VectorXd u = fem_oracle(model, p);
    for (Index k = 0; k < mesh.n_free(); ++k) {
      const Eigen::Vector2d x = mesh.node(mesh.dofs().full_index(k) / mesh.components());
      u[k] += amplitude * std::cos(2.0 * x.x() + p[0]) * std::sin(3.0 * x.y() + 1.0);
    }
    return u;
  };
}

Eigen::MatrixXd spike_params(const EnergyModel& model, Index k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_parameters(model, ParamDistributions{}, k, rng);
}

TEST(RelativeErrors, ExactPredictionGivesZero) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 8, 8, kAllEdges);
  const SpikePoissonModel model(mesh);
  const ErrorReport r = relative_errors(model, oracle_of(model), oracle_of(model), spike_params(model, 10, 1));
  EXPECT_EQ(r.requested, 10);
  EXPECT_EQ(r.excluded, 0);
  ASSERT_EQ(r.samples.size(), 10u);
  for (const auto& s : r.samples) {
    EXPECT_EQ(s.energy, 0.0);
    EXPECT_EQ(s.l2, 0.0);
    EXPECT_EQ(s.h1, 0.0);
  }
  EXPECT_EQ(r.energy.mean, 0.0);
}

TEST(RelativeErrors, EnergyErrorMatchesEnergyNormIdentity) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 10, 10, kAllEdges);
  const SpikePoissonModel model(mesh);
  const Eigen::MatrixXd params = spike_params(model, 8, 2);
  const Predictor prediction = perturbed_oracle(model, 0.05);
  const ErrorReport r = relative_errors(model, prediction, oracle_of(model), params);
  ASSERT_EQ(r.samples.size(), 8u);
  for (Index k = 0; k < params.cols(); ++k) {
    const auto energy = model.bind(params.col(k));
    const Eigen::VectorXd uh = fem_oracle(model, params.col(k));
    const double e_uh = total_energy(*energy, mesh.dofs().scatter(uh));
    const double lemma = 0.5 * energy_norm_squared(*energy, prediction(params.col(k)) - uh) / std::abs(e_uh);
    const auto& s = r.samples[static_cast<std::size_t>(k)];
    EXPECT_NEAR(s.energy, lemma, 1e-9 * lemma);
    EXPECT_GE(s.energy_gap, -1e-12);
  }
}

TEST(RelativeErrors, NormsUseFullH1) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 8, 8, kAllEdges);
  const SpikePoissonModel model(mesh);
  const Eigen::MatrixXd params = spike_params(model, 1, 3);
  const Predictor zero = [&](const Eigen::VectorXd&) { return Eigen::VectorXd(Eigen::VectorXd::Zero(mesh.n_free())); };
  const ErrorReport r = relative_errors(model, zero, oracle_of(model), params);
  // Zero prediction: every relative norm error is exactly 1 and the energy error is 1.
  EXPECT_NEAR(r.samples[0].l2, 1.0, 1e-15);
  EXPECT_NEAR(r.samples[0].h1, 1.0, 1e-15);
  EXPECT_NEAR(r.samples[0].energy, 1.0, 1e-12);
}

TEST(RelativeErrors, ZeroDenominatorIsExcluded) {
  const TriMesh mesh = build_beam_mesh(1.0, 0.05, 8, 1);
  const NeoHookeanBeamModel model(mesh, NeoHookeanMaterial::from_young_poisson(10.0, 0.3), 0.1);
  Eigen::MatrixXd params(3, 3);
  params.col(0) << 0.5, 0.0, 0.0;  // unloaded: E(u_h) = 0
  params.col(1) << 0.9, 0.0, -0.2;
  params.col(2) << 0.3, 0.1, 0.0;
  const Predictor prediction = perturbed_oracle(model, 1e-4);
  const ErrorReport r = relative_errors(model, prediction, oracle_of(model), params);
  EXPECT_EQ(r.requested, 3);
  EXPECT_EQ(r.excluded, 1);
  EXPECT_EQ(r.samples.size(), 2u);
  const auto j = r.to_json();
  EXPECT_EQ(j.at("excluded"), 1);
  EXPECT_EQ(j.at("k"), 3);
}

TEST(RelativeErrors, InvariantUnderNodeRenumbering) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 8, 8, kAllEdges);
  std::vector<Index> perm(static_cast<std::size_t>(mesh.n_nodes()));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(4);
  std::shuffle(perm.begin(), perm.end(), rng);
  const TriMesh other = renumber_nodes(mesh, perm, kAllEdges);
  const SpikePoissonModel a(mesh), b(other);
  const Eigen::MatrixXd params = spike_params(a, 6, 5);
  const ErrorReport ra = relative_errors(a, perturbed_oracle(a, 0.02), oracle_of(a), params);
  const ErrorReport rb = relative_errors(b, perturbed_oracle(b, 0.02), oracle_of(b), params);
  ASSERT_EQ(ra.samples.size(), rb.samples.size());
  for (std::size_t k = 0; k < ra.samples.size(); ++k) {
    EXPECT_NEAR(ra.samples[k].energy, rb.samples[k].energy, 1e-8 * ra.samples[k].energy);
    EXPECT_NEAR(ra.samples[k].l2, rb.samples[k].l2, 1e-8 * ra.samples[k].l2);
    EXPECT_NEAR(ra.samples[k].h1, rb.samples[k].h1, 1e-8 * ra.samples[k].h1);
  }
}

TEST(RelativeErrors, ThreadsDoNotChangeReport) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 8, 8, kAllEdges);
  const SpikePoissonModel model(mesh);
  const Eigen::MatrixXd params = spike_params(model, 9, 6);
  const auto a = relative_errors(model, perturbed_oracle(model, 0.1), oracle_of(model), params, 1);
  const auto b = relative_errors(model, perturbed_oracle(model, 0.1), oracle_of(model), params, 3);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(OmegaRelativeErrors, ExactPredictionGivesZeroAndDenominatorsAreGeometric) {
  const TriMesh coarse = build_beam_mesh(1.0, 0.05, 20, 1);
  const TriMesh fine = build_beam_mesh(1.0, 0.05, 40, 2);
  EXPECT_NEAR(coarse.area(), fine.area(), 1e-15);
  const NeoHookeanBeamModel model(coarse, NeoHookeanMaterial::from_young_poisson(10.0, 0.3), 0.1);
  Eigen::MatrixXd params(3, 2);
  params.col(0) << 0.95, 0.0, -1.0;
  params.col(1) << 0.5, 0.3, 0.4;
  const ErrorReport same = omega_relative_errors(model, oracle_of(model), oracle_of(model), params);
  EXPECT_EQ(same.kind, MetricKind::omega_relative);
  for (const auto& s : same.samples) EXPECT_EQ(s.l2 + s.h1 + s.energy, 0.0);

  const Predictor zero = [&](const Eigen::VectorXd&) { return Eigen::VectorXd(Eigen::VectorXd::Zero(coarse.n_free())); };
  const ErrorReport r = omega_relative_errors(model, zero, oracle_of(model), params);
  ASSERT_EQ(r.samples.size(), 2u);
  for (Index k = 0; k < 2; ++k) {
    const Eigen::VectorXd uh = coarse.dofs().scatter(fem_oracle(model, params.col(k)));
    const auto energy = model.bind(params.col(k));
    const auto& s = r.samples[static_cast<std::size_t>(k)];
    EXPECT_NEAR(s.energy, std::abs(total_energy(*energy, uh)) / 0.05, 1e-12);
    EXPECT_NEAR(s.l2, l2_norm(coarse, uh) / std::sqrt(0.05), 1e-12);
    EXPECT_NEAR(s.h1, h1_seminorm(coarse, uh) / std::sqrt(0.05), 1e-12);
  }
}

TEST(Summary, SampleStatistics) {
  const MetricSummary s = summarize({1.0, 2.0, 3.0, 10.0});
  EXPECT_DOUBLE_EQ(s.mean, 4.0);
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_NEAR(s.std, std::sqrt((9.0 + 4.0 + 1.0 + 36.0) / 3.0), 1e-15);
  EXPECT_EQ(summarize({5.0}).std, 0.0);
}

TEST(Histogram, CountsSumToSamples) {
  std::mt19937_64 rng(7);
  std::exponential_distribution<double> expo(3.0);
  std::vector<double> v(1000);
  for (auto& x : v) x = expo(rng);
  const Histogram h = make_histogram(v, 50);
  ASSERT_EQ(h.counts.size(), 50u);
  ASSERT_EQ(h.edges.size(), 51u);
  EXPECT_EQ(h.edges.front(), 0.0);
  EXPECT_EQ(h.edges.back(), *std::max_element(v.begin(), v.end()));
  EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), Index{0}), 1000);
  EXPECT_GT(h.counts.front(), h.counts.back());
  EXPECT_THROW(make_histogram(v, 0), std::invalid_argument);
}

TEST(Histogram, SingleSampleFillsOneBin) {
  const Histogram h = make_histogram({0.25}, 10);
  EXPECT_EQ(std::count(h.counts.begin(), h.counts.end(), Index{0}), 9);
  EXPECT_EQ(h.counts.back(), 1);
}

TEST(Histogram, CsvIsDeterministicAndWellFormed) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 6, 6, kAllEdges);
  const SpikePoissonModel model(mesh);
  const ErrorReport r = relative_errors(model, perturbed_oracle(model, 0.05), oracle_of(model), spike_params(model, 12, 8));
  const std::string a = histogram_csv(r, Metric::l2, 7);
  EXPECT_EQ(a, histogram_csv(r, Metric::l2, 7));
  std::istringstream in(a);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "bin_left,bin_right,count");
  Index total = 0, rows = 0;
  while (std::getline(in, line)) {
    total += std::stol(line.substr(line.rfind(',') + 1));
    ++rows;
  }
  EXPECT_EQ(rows, 7);
  EXPECT_EQ(total, 12);
  EXPECT_EQ(summary_csv(r).substr(0, 16), "metric,mean,std\n");
}

TEST(Qoi, DegenerateGrfReducesToUnitCoefficient) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 8, 8, kAllEdges);
  const GrfPoissonModel model(mesh, std::make_shared<const KlBasis>(build_kl_basis(mesh, 9, 0.0, 1.0, 0.5)));
  const Eigen::MatrixXd params = Eigen::MatrixXd::Zero(9, 5);
  const NodalField unit = fem_solve_poisson(mesh, [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
  const double l2 = l2_norm(unit);
  const Index center = 4 * 9 + 4;
  ASSERT_EQ(mesh.node(center), Eigen::Vector2d(0.0, 0.0));
  const Predictor fem = oracle_of(model);
  EXPECT_NEAR(qoi_l2(mesh, fem, params), l2 * l2, 1e-10);
  EXPECT_NEAR(qoi_point(mesh, fem, {0.0, 0.0}, params), unit.full()[center], 1e-10);
  EXPECT_THROW(qoi_point(mesh, fem, {2.0, 0.0}, params), std::out_of_range);
}

TEST(Qoi, MatchesDirectAverage) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 8, 8, kAllEdges);
  const GrfPoissonModel model(mesh, std::make_shared<const KlBasis>(build_kl_basis(mesh, 9, 0.0, 1.0, 0.5)));
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd params = sample_parameters(model, {}, 16, rng);
  const Predictor fem = oracle_of(model);
  double l2 = 0.0, point = 0.0;
  const Eigen::Vector2d x0(0.3, -0.2);
  Eigen::Vector3d bary;
  const Index t = mesh.locate(x0, bary);
  for (Index k = 0; k < 16; ++k) {
    const Eigen::VectorXd u = mesh.dofs().scatter(fem(params.col(k)));
    l2 += std::pow(l2_norm(mesh, u), 2) / 16.0;
    point += eval_p1(mesh, u, t, bary)[0] / 16.0;
  }
  EXPECT_NEAR(qoi_l2(mesh, fem, params, 2), l2, 1e-12 * l2);
  EXPECT_NEAR(qoi_point(mesh, fem, x0, params, 2), point, 1e-12 * std::abs(point));
}

}  // namespace
}  // namespace femol
