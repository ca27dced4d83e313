#include "femol/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "femol/fem.hpp"
#include "femol/parallel.hpp"

namespace femol {

Predictor mlp_predictor(const MlpD& mlp) {
  return [&mlp](const Eigen::VectorXd& p) { return mlp.forward(p); };
}

std::string to_string(MetricKind kind) { return kind == MetricKind::relative ? "relative" : "omega_relative"; }

std::string to_string(Metric metric) {
  switch (metric) {
    case Metric::energy: return "energy";
    case Metric::l2: return "l2";
    case Metric::h1: return "h1";
  }
  return "?";
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  if (values.empty()) return s;
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / (n - 1.0));
  }
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return s;
}

std::vector<double> ErrorReport::values(Metric metric) const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back(metric == Metric::energy ? s.energy : metric == Metric::l2 ? s.l2 : s.h1);
  }
  return out;
}

const MetricSummary& ErrorReport::summary(Metric metric) const {
  return metric == Metric::energy ? energy : metric == Metric::l2 ? l2 : h1;
}

void ErrorReport::summarize() {
  energy = femol::summarize(values(Metric::energy));
  l2 = femol::summarize(values(Metric::l2));
  h1 = femol::summarize(values(Metric::h1));
}

nlohmann::json ErrorReport::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind);
  j["k"] = requested;
  j["excluded"] = excluded;
  auto rows = nlohmann::json::array();
  for (const auto& s : samples) {
    rows.push_back({{"energy", s.energy}, {"l2", s.l2}, {"h1", s.h1}, {"energy_gap", s.energy_gap}});
  }
  j["samples"] = std::move(rows);
  for (Metric m : {Metric::energy, Metric::l2, Metric::h1}) {
    const auto& s = summary(m);
    j["summary"][to_string(m)] = {{"mean", s.mean}, {"std", s.std}, {"median", s.median}};
  }
  return j;
}

namespace {

struct RawSample {
  bool valid = true;
  ErrorSample sample;
};

ErrorReport compute_errors(const EnergyModel& model, const Predictor& prediction, const Predictor& oracle,
                           const Eigen::MatrixXd& params, int threads, MetricKind kind) {
  const TriMesh& mesh = model.mesh();
  const double omega = mesh.area();
  std::vector<RawSample> raw(static_cast<std::size_t>(params.cols()));
  parallel_for(params.cols(), threads, [&](Index i) {
    const Eigen::VectorXd p = params.col(i);
    const Eigen::VectorXd v = mesh.dofs().scatter(prediction(p));
    const Eigen::VectorXd uh = mesh.dofs().scatter(oracle(p));
    const Eigen::VectorXd diff = v - uh;
    const auto energy = model.bind(p);
    const double ev = total_energy(*energy, v);
    const double eh = total_energy(*energy, uh);
    RawSample& out = raw[static_cast<std::size_t>(i)];
    out.sample.energy_gap = ev - eh;
    if (kind == MetricKind::relative) {
      const double l2_ref = l2_norm(mesh, uh);
      const double h1_ref = h1_norm(mesh, uh);
      if (eh == 0.0 || l2_ref == 0.0 || h1_ref == 0.0) {
        out.valid = false;
        return;
      }
      out.sample.energy = std::abs(ev - eh) / std::abs(eh);
      out.sample.l2 = l2_norm(mesh, diff) / l2_ref;
      out.sample.h1 = h1_norm(mesh, diff) / h1_ref;
    } else {
      out.sample.energy = std::abs(ev - eh) / omega;
      out.sample.l2 = l2_norm(mesh, diff) / std::sqrt(omega);
      out.sample.h1 = h1_seminorm(mesh, diff) / std::sqrt(omega);
    }
  });
  ErrorReport report;
  report.kind = kind;
  report.requested = params.cols();
  for (const auto& r : raw) {
    if (r.valid) {
      report.samples.push_back(r.sample);
    } else {
      ++report.excluded;
    }
  }
  report.summarize();
  return report;
}

}  // namespace

ErrorReport relative_errors(const EnergyModel& model, const Predictor& prediction, const Predictor& oracle,
                            const Eigen::MatrixXd& params, int threads) {
  return compute_errors(model, prediction, oracle, params, threads, MetricKind::relative);
}

ErrorReport omega_relative_errors(const EnergyModel& model, const Predictor& prediction, const Predictor& oracle,
                                  const Eigen::MatrixXd& params, int threads) {
  return compute_errors(model, prediction, oracle, params, threads, MetricKind::omega_relative);
}

Histogram make_histogram(const std::vector<double>& values, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
  double hi = 0.0;
  for (double v : values) hi = std::max(hi, v);
  if (!(hi > 0.0)) hi = 1.0;
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) h.edges[static_cast<std::size_t>(b)] = hi * b / bins;
  h.edges.back() = hi;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    auto b = static_cast<long>(std::floor(v / hi * bins));
    b = std::clamp<long>(b, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

std::string histogram_csv(const ErrorReport& report, Metric metric, int bins) {
  const Histogram h = make_histogram(report.values(metric), bins);
  std::ostringstream out;
  out.precision(17);
  out << "bin_left,bin_right,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
  }
  return out.str();
}

std::string summary_csv(const ErrorReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "metric,mean,std\n";
  for (Metric m : {Metric::energy, Metric::l2, Metric::h1}) {
    out << to_string(m) << ',' << report.summary(m).mean << ',' << report.summary(m).std << '\n';
  }
  return out.str();
}

double qoi_l2(const TriMesh& mesh, const Predictor& solution, const Eigen::MatrixXd& params, int threads) {
  Eigen::VectorXd values(params.cols());
  parallel_for(params.cols(), threads, [&](Index i) {
    const double n = l2_norm(mesh, mesh.dofs().scatter(solution(params.col(i))));
    values[i] = n * n;
  });
  return values.mean();
}

double qoi_point(const TriMesh& mesh, const Predictor& solution, const Eigen::Vector2d& x0,
                 const Eigen::MatrixXd& params, int threads) {
  Eigen::Vector3d bary;
  const Index t = mesh.locate(x0, bary);
  if (t < 0) throw std::out_of_range("qoi_point: x0 is outside the mesh");
  Eigen::VectorXd values(params.cols());
  parallel_for(params.cols(), threads, [&](Index i) {
    values[i] = eval_p1(mesh, mesh.dofs().scatter(solution(params.col(i))), t, bary)[0];
  });
  return values.mean();
}

}  // namespace femol
