#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "femol/nn.hpp"
#include "femol/problems.hpp"

namespace femol {

/// Map from a parameter tuple to free DOF values (a network or a solver).
using Predictor = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

Predictor mlp_predictor(const MlpD& mlp);

enum class MetricKind { relative, omega_relative };
std::string to_string(MetricKind kind);

struct ErrorSample {
  double energy = 0.0;
  double l2 = 0.0;
  double h1 = 0.0;
  double energy_gap = 0.0;  // E(prediction) - E(oracle), signed
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
  double median = 0.0;
};

enum class Metric { energy, l2, h1 };
std::string to_string(Metric metric);

struct ErrorReport {
  MetricKind kind = MetricKind::relative;
  Index requested = 0;   // K
  Index excluded = 0;    // zero denominators
  std::vector<ErrorSample> samples;
  MetricSummary energy;
  MetricSummary l2;
  MetricSummary h1;

  std::vector<double> values(Metric metric) const;
  const MetricSummary& summary(Metric metric) const;
  /// Recompute the summaries from the per-sample values.
  void summarize();
  nlohmann::json to_json() const;
};

MetricSummary summarize(const std::vector<double>& values);

/// Relative errors |E(v) - E(u_h)| / |E(u_h)|, ||v - u_h|| / ||u_h|| in L2 and
/// the full H1 norm, for the parameter tuples in the columns of `params`.
/// Samples with a zero denominator are excluded and counted.
ErrorReport relative_errors(const EnergyModel& model, const Predictor& prediction, const Predictor& oracle,
                            const Eigen::MatrixXd& params, int threads = 1);

/// Errors divided by |Omega| (energy) and |Omega|^{1/2} (L2 and H1 seminorm).
ErrorReport omega_relative_errors(const EnergyModel& model, const Predictor& prediction, const Predictor& oracle,
                                  const Eigen::MatrixXd& params, int threads = 1);

struct Histogram {
  std::vector<double> edges;  // bins + 1 edges over [0, max]
  std::vector<Index> counts;
};

Histogram make_histogram(const std::vector<double>& values, int bins);
/// bin_left,bin_right,count
std::string histogram_csv(const ErrorReport& report, Metric metric, int bins = 50);
/// metric,mean,std
std::string summary_csv(const ErrorReport& report);

/// Monte-Carlo mean of ||u||_{L2}^2 over the parameter columns.
double qoi_l2(const TriMesh& mesh, const Predictor& solution, const Eigen::MatrixXd& params, int threads = 1);
/// Monte-Carlo mean of u(x0). Throws std::out_of_range if x0 is outside the mesh.
double qoi_point(const TriMesh& mesh, const Predictor& solution, const Eigen::Vector2d& x0,
                 const Eigen::MatrixXd& params, int threads = 1);

}  // namespace femol
