#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "femol/grf.hpp"
#include "femol/mesh.hpp"
#include "femol/problems.hpp"
#include "femol/solvers.hpp"
#include "femol/training.hpp"

namespace femol {

/// Rectangle and cell counts. The beam uses nx, ny with its own geometry.
struct MeshSpec {
  double x_min = -1.0;
  double x_max = 1.0;
  double y_min = -1.0;
  double y_max = 1.0;
  Index nx = 32;
  Index ny = 32;
};

struct GrfSpec {
  Index n_kl = 9;
  double mu = 0.0;
  double sigma = 1.0;
  double correlation_length = 0.5;
};

struct BeamSpec {
  double length = 1.0;
  double height = 0.05;
  double traction_length = 0.1;
  double young = 10.0;
  double poisson = 0.3;
  double j_floor = 1e-3;
};

struct EvaluationSpec {
  Index k = 10000;
  int bins = 50;
  Eigen::Vector2d x0 = Eigen::Vector2d::Zero();
  std::uint64_t seed = 1;
  double oracle_tol = 1e-10;
};

struct RunConfig {
  std::string preset;  // informational
  ProblemKind problem = ProblemKind::spike;
  MeshSpec mesh;
  TrainConfig train;
  long checkpoint_every = 0;
  GrfSpec grf;
  BeamSpec beam;
  EvaluationSpec evaluation;
  NewtonOptions newton;
  double source = 1.0;
  std::string output_dir;

  nlohmann::json to_json() const;
};

/// Invalid configuration; `diagnostics` lists one problem per entry with its
/// JSON path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics);
  std::vector<std::string> diagnostics;
};

std::vector<std::string> preset_names();
/// Throws ConfigError for unknown names.
RunConfig preset_config(const std::string& name);

/// Strict parse: an optional "preset" key seeds the defaults, every other key
/// overrides it. Unknown keys and type or range errors are collected and
/// reported together.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// A mesh and the energy model built on it.
struct Problem {
  std::unique_ptr<TriMesh> mesh;
  std::shared_ptr<const KlBasis> kl_basis;  // grf only
  std::unique_ptr<EnergyModel> model;
};

/// `kl_basis` reuses a stored basis (from a checkpoint) instead of solving the
/// eigenproblem again.
Problem build_problem(const RunConfig& config, const nlohmann::json* kl_basis = nullptr);
TriMesh build_mesh(const RunConfig& config);

}  // namespace femol
