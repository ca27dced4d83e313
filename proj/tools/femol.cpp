// Command-line driver: mesh inspection, training, FEM solves, error
// evaluation, QoI estimation and the Newton warm-start experiments.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "femol/config.hpp"
#include "femol/evaluation.hpp"
#include "femol/io.hpp"
#include "femol/nn.hpp"
#include "femol/solvers.hpp"
#include "femol/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace femol;

namespace {

constexpr int kExitCompute = 1;
constexpr int kExitConfig = 2;

// Thrown for invalid command-line values that are not schema errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& text, std::size_t expected, const char* what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string(what) + ": cannot parse '" + item + "' as a number");
    }
  }
  if (expected > 0 && values.size() != expected) {
    throw UsageError(std::string(what) + ": expected " + std::to_string(expected) + " comma-separated values");
  }
  return values;
}

struct Source {
  std::string config;
  std::string preset;
  std::string ckpt;
};

void add_source(CLI::App* cmd, Source& src, bool with_ckpt) {
  auto* c = cmd->add_option("--config", src.config, "Run configuration (JSON)");
  auto* p = cmd->add_option("--preset", src.preset, "Named preset instead of a config file");
  c->excludes(p);
  if (with_ckpt) cmd->add_option("--ckpt", src.ckpt, "Checkpoint; its embedded config is used unless --config is given");
}

struct Context {
  RunConfig config;
  std::optional<Checkpoint> checkpoint;
  Problem problem;
};

Context load_context(const Source& src, int threads, bool need_ckpt) {
  Context ctx;
  if (need_ckpt && src.ckpt.empty()) throw UsageError("--ckpt is required");
  if (!src.ckpt.empty()) ctx.checkpoint = load_checkpoint(src.ckpt);
  if (!src.config.empty()) {
    ctx.config = load_run_config(src.config);
  } else if (!src.preset.empty()) {
    ctx.config = preset_config(src.preset);
  } else if (ctx.checkpoint) {
    if (!ctx.checkpoint->meta.contains("config")) throw CheckpointError("checkpoint: no embedded config");
    ctx.config = parse_run_config(ctx.checkpoint->meta.at("config"));
  } else {
    throw UsageError("one of --config, --preset or --ckpt is required");
  }
  ctx.config.train.threads = threads;
  const json* basis = nullptr;
  if (ctx.checkpoint && ctx.checkpoint->extra.contains("kl_basis")) basis = &ctx.checkpoint->extra.at("kl_basis");
  ctx.problem = build_problem(ctx.config, basis);
  if (ctx.checkpoint) {
    check_checkpoint_dims(ctx.checkpoint->mlp, ctx.problem.model->param_dim(), ctx.problem.mesh->n_free());
  }
  return ctx;
}

// Flag value, else config output_dir, else $FEMOL_OUT_DIR, else ".".
fs::path output_path(const std::string& flag, const RunConfig& config, const std::string& default_name) {
  if (!flag.empty()) return flag;
  fs::path base = ".";
  if (!config.output_dir.empty()) {
    base = config.output_dir;
  } else if (const char* env = std::getenv("FEMOL_OUT_DIR"); env != nullptr && *env != '\0') {
    base = env;
  }
  return base / default_name;
}

json newton_report_json(const NewtonReport& r) {
  return {{"iterations", r.iterations},
          {"converged", r.converged},
          {"final_energy", r.final_energy},
          {"residual_history", r.residual_history},
          {"message", r.message}};
}

json schedule_json(const ScheduleResult& s) {
  auto stages = json::array();
  for (const auto& st : s.stages) stages.push_back(newton_report_json(st));
  return {{"stages", std::move(stages)}, {"final_energy", s.stages.back().final_energy}};
}

ForceParams right_end_force(const RunConfig& c, double fx, double fy) {
  return ForceParams{c.beam.length - 0.5 * c.beam.traction_length, fx, fy};
}

const NeoHookeanBeamModel& beam_model(const Context& ctx) {
  if (ctx.config.problem != ProblemKind::beam) throw UsageError("this command needs the beam problem");
  return static_cast<const NeoHookeanBeamModel&>(*ctx.problem.model);
}

Eigen::MatrixXd evaluation_samples(const Context& ctx, Index k) {
  std::mt19937_64 rng(ctx.config.evaluation.seed);
  return sample_parameters(*ctx.problem.model, ctx.config.train.distributions, k, rng);
}

Predictor oracle_predictor(const Context& ctx) {
  const EnergyModel* model = ctx.problem.model.get();
  const double tol = ctx.config.evaluation.oracle_tol;
  return [model, tol](const Eigen::VectorXd& p) { return fem_oracle(*model, p, tol); };
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

// ---------------------------------------------------------------------------

int cmd_mesh_info(const Source& src, int threads, const std::string& dump) {
  const Context ctx = load_context(src, threads, false);
  const TriMesh& mesh = *ctx.problem.mesh;
  std::cout << "nodes: " << mesh.n_nodes() << '\n'
            << "triangles: " << mesh.n_triangles() << '\n'
            << "free_dofs: " << mesh.n_free() << '\n';
  if (!dump.empty()) write_text_file(dump, mesh_to_json(mesh).dump() + "\n");
  return 0;
}

int cmd_train(const Source& src, int threads, const std::string& out_flag, const std::string& log_flag,
              std::optional<long> iterations) {
  Context ctx = load_context(src, threads, false);
  if (iterations) {
    if (*iterations < 0) throw UsageError("--iterations must be >= 0");
    ctx.config.train.iterations = *iterations;
  }
  const fs::path out = output_path(out_flag, ctx.config, "checkpoint.json");
  const fs::path log = log_flag.empty() ? fs::path(out).replace_extension(".log.csv") : fs::path(log_flag);

  const auto make_checkpoint = [&](const MlpD& net, long done) {
    Checkpoint ckpt{net, {{"config", ctx.config.to_json()}, {"iterations", done}}, json::object()};
    if (ctx.problem.kl_basis) ckpt.extra["kl_basis"] = ctx.problem.kl_basis->to_json();
    return ckpt;
  };
  const auto periodic = [&](const MlpD& net, long done) {
    fs::path p = out;
    p.replace_extension(".iter" + std::to_string(done) + ".json");
    save_checkpoint(make_checkpoint(net, done), p);
  };

  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const TrainResult result = train(ctx.config.train, *ctx.problem.model, periodic, ctx.config.checkpoint_every);
  save_checkpoint(make_checkpoint(result.mlp, ctx.config.train.iterations), out);

  std::ostringstream csv;
  csv.precision(17);
  csv << "iteration,loss,lr\n";
  for (const auto& e : result.log.entries) csv << e.iteration << ',' << e.loss << ',' << e.lr << '\n';
  write_text_file(log, csv.str());

  json summary = {{"checkpoint", out.string()}, {"log", log.string()}, {"iterations", ctx.config.train.iterations}};
  if (!result.log.losses.empty()) summary["final_loss"] = result.log.losses.back();
  print_json(summary);
  return 0;
}

int cmd_eval_errors(const Source& src, int threads, std::optional<Index> k_flag, const std::string& out_flag,
                    const std::string& metric_flag) {
  const Context ctx = load_context(src, threads, true);
  const Index k = k_flag.value_or(ctx.config.evaluation.k);
  if (k < 1) throw UsageError("--k must be >= 1");
  MetricKind kind = ctx.config.problem == ProblemKind::beam ? MetricKind::omega_relative : MetricKind::relative;
  if (metric_flag == "relative") kind = MetricKind::relative;
  if (metric_flag == "omega") kind = MetricKind::omega_relative;

  const Eigen::MatrixXd params = evaluation_samples(ctx, k);
  const Predictor nn = mlp_predictor(ctx.checkpoint->mlp);
  const Predictor oracle = oracle_predictor(ctx);
  const ErrorReport report = kind == MetricKind::relative
                                 ? relative_errors(*ctx.problem.model, nn, oracle, params, threads)
                                 : omega_relative_errors(*ctx.problem.model, nn, oracle, params, threads);

  const fs::path dir = output_path(out_flag, ctx.config, "errors");
  json j = report.to_json();
  j["problem"] = to_string(ctx.config.problem);
  write_text_file(dir / "errors.json", j.dump(2) + "\n");
  write_text_file(dir / "summary.csv", summary_csv(report));
  for (Metric m : {Metric::energy, Metric::l2, Metric::h1}) {
    write_text_file(dir / ("histogram_" + to_string(m) + ".csv"),
                    histogram_csv(report, m, ctx.config.evaluation.bins));
  }
  std::cout << summary_csv(report);
  return 0;
}

int cmd_qoi(const Source& src, int threads, const std::string& kind, const std::string& x0_flag,
            std::optional<Index> k_flag, const std::string& out_flag) {
  const Context ctx = load_context(src, threads, true);
  const Index k = k_flag.value_or(ctx.config.evaluation.k);
  if (k < 1) throw UsageError("--k must be >= 1");
  Eigen::Vector2d x0 = ctx.config.evaluation.x0;
  if (!x0_flag.empty()) {
    const auto v = parse_list(x0_flag, 2, "--x0");
    x0 = Eigen::Vector2d(v[0], v[1]);
  }
  const Eigen::MatrixXd params = evaluation_samples(ctx, k);
  const Predictor nn = mlp_predictor(ctx.checkpoint->mlp);
  const Predictor fem = oracle_predictor(ctx);
  const TriMesh& mesh = *ctx.problem.mesh;
  double q_nn = 0.0, q_fem = 0.0;
  json j = {{"kind", kind}, {"k", k}};
  if (kind == "l2") {
    q_nn = qoi_l2(mesh, nn, params, threads);
    q_fem = qoi_l2(mesh, fem, params, threads);
  } else {
    q_nn = qoi_point(mesh, nn, x0, params, threads);
    q_fem = qoi_point(mesh, fem, x0, params, threads);
    j["x0"] = {x0.x(), x0.y()};
  }
  j["nn"] = q_nn;
  j["fem"] = q_fem;
  j["relative_difference"] = q_fem != 0.0 ? std::abs(q_nn - q_fem) / std::abs(q_fem) : std::abs(q_nn - q_fem);
  if (!out_flag.empty()) write_text_file(out_flag, j.dump(2) + "\n");
  print_json(j);
  return 0;
}

int cmd_newton(const Source& src, int threads, const std::string& force_flag, const std::string& warm,
               const std::string& out_flag, const std::string& solution_flag, const std::string& csv_flag) {
  const Context ctx = load_context(src, threads, warm == "nn");
  const auto& model = beam_model(ctx);
  ForceParams force = right_end_force(ctx.config, 0.0, -1.0);
  if (!force_flag.empty()) force = ForceParams::from_vector(Eigen::Map<const Eigen::VectorXd>(
                               parse_list(force_flag, 3, "--force").data(), 3));
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(ctx.problem.mesh->n_free());
  if (warm == "nn") u0 = ctx.checkpoint->mlp.forward(Eigen::VectorXd(force.to_vector()));
  const NewtonResult r = newton_solve(*model.bind_force(force), u0, ctx.config.newton);

  json j = newton_report_json(r.report);
  j["force"] = {force.p, force.fx, force.fy};
  j["warm_start"] = warm;
  if (!out_flag.empty()) write_text_file(out_flag, j.dump(2) + "\n");
  const Eigen::VectorXd u_full = ctx.problem.mesh->dofs().scatter(r.u);
  if (!solution_flag.empty()) write_text_file(solution_flag, solution_to_json(*ctx.problem.mesh, u_full).dump() + "\n");
  if (!csv_flag.empty()) write_text_file(csv_flag, solution_csv(*ctx.problem.mesh, u_full));
  print_json(j);
  return 0;
}

int cmd_curl(const Source& src, int threads, const std::string& out_flag) {
  const Context ctx = load_context(src, threads, true);
  const auto& model = beam_model(ctx);
  const RunConfig& c = ctx.config;
  const std::vector<ForceParams> schedule = {right_end_force(c, 0.0, -0.99), right_end_force(c, -1.5, 0.0),
                                             right_end_force(c, 0.0, 5.0)};
  const ForceParams intermediate = right_end_force(c, -10.0, -5.0);
  const Eigen::VectorXd warm = ctx.checkpoint->mlp.forward(Eigen::VectorXd(intermediate.to_vector()));
  const CurlResult r = curl_experiment(model, schedule, warm, c.newton);

  const double e0 = r.zero_start.stages.back().final_energy;
  const double e1 = r.warm_start.stages.back().final_energy;
  auto forces = json::array();
  for (const auto& f : schedule) forces.push_back({f.p, f.fx, f.fy});
  json j = {{"schedule", std::move(forces)},
            {"intermediate_force", {intermediate.p, intermediate.fx, intermediate.fy}},
            {"zero_start", schedule_json(r.zero_start)},
            {"warm_start", schedule_json(r.warm_start)},
            {"energy_relative_difference", std::abs(e0 - e1) / std::max(std::abs(e0), 1e-300)},
            {"displacement_max_difference", (r.zero_start.u - r.warm_start.u).cwiseAbs().maxCoeff()}};
  if (!out_flag.empty()) write_text_file(out_flag, j.dump(2) + "\n");
  print_json(j);
  return 0;
}

int cmd_solve(const Source& src, int threads, const std::string& params_flag, const std::string& out_flag,
              const std::string& csv_flag) {
  const Context ctx = load_context(src, threads, false);
  const EnergyModel& model = *ctx.problem.model;
  const auto v = parse_list(params_flag, static_cast<std::size_t>(model.param_dim()), "--params");
  const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
  const Eigen::VectorXd u = fem_oracle(model, p, ctx.config.evaluation.oracle_tol);
  const Eigen::VectorXd u_full = ctx.problem.mesh->dofs().scatter(u);
  const json j = solution_to_json(*ctx.problem.mesh, u_full);
  if (!csv_flag.empty()) write_text_file(csv_flag, solution_csv(*ctx.problem.mesh, u_full));
  const fs::path out = output_path(out_flag, ctx.config, "solution.json");
  write_text_file(out, j.dump() + "\n");
  print_json({{"solution", out.string()}, {"energy", total_energy(*model.bind(p), u_full)}});
  return 0;
}

void print_error(const char* category, const std::string& message, const json& extra = json::object()) {
  json j = {{"error", category}, {"message", message}};
  for (const auto& [key, value] : extra.items()) j[key] = value;
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-trained operator networks for P1 finite element problems"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads for per-sample work")->check(CLI::PositiveNumber);

  Source src;
  std::string out, log, dump, metric, kind = "l2", x0, force, warm = "zero", solution, csv, params;
  std::optional<long> iterations;
  std::optional<Index> k;

  auto* mesh_info = app.add_subcommand("mesh-info", "Print node, triangle and free-DOF counts");
  add_source(mesh_info, src, false);
  mesh_info->add_option("--dump", dump, "Write the mesh as JSON");

  auto* train_cmd = app.add_subcommand("train", "Train a network and write a checkpoint and log");
  add_source(train_cmd, src, false);
  train_cmd->add_option("--out", out, "Checkpoint path");
  train_cmd->add_option("--log", log, "Training log CSV (default: <out>.log.csv)");
  train_cmd->add_option("--iterations", iterations, "Override the configured iteration count");

  auto* eval_cmd = app.add_subcommand("eval-errors", "Learning errors against the FEM oracle");
  add_source(eval_cmd, src, true);
  eval_cmd->add_option("--k", k, "Number of samples");
  eval_cmd->add_option("--out", out, "Output directory");
  eval_cmd->add_option("--metric", metric, "relative or omega (default by problem)")
      ->check(CLI::IsMember({"relative", "omega"}));

  auto* qoi_cmd = app.add_subcommand("qoi", "Paired network/FEM Monte-Carlo quantity of interest");
  add_source(qoi_cmd, src, true);
  qoi_cmd->add_option("--kind", kind, "l2 or point")->check(CLI::IsMember({"l2", "point"}));
  qoi_cmd->add_option("--x0", x0, "Point as x,y");
  qoi_cmd->add_option("--k", k, "Number of samples");
  qoi_cmd->add_option("--out", out, "Write the result JSON");

  auto* newton_cmd = app.add_subcommand("newton", "Newton solve of the beam from a zero or network start");
  add_source(newton_cmd, src, true);
  newton_cmd->add_option("--force", force, "p,Fx,Fy (default: unit downward force at the right end)");
  newton_cmd->add_option("--warm-start", warm, "nn or zero")->check(CLI::IsMember({"nn", "zero"}));
  newton_cmd->add_option("--out", out, "Write the report JSON");
  newton_cmd->add_option("--solution", solution, "Write the solution as JSON");
  newton_cmd->add_option("--csv", csv, "Write the solution as CSV");

  auto* curl_cmd = app.add_subcommand("curl", "Three-stage force schedule versus a network intermediate start");
  add_source(curl_cmd, src, true);
  curl_cmd->add_option("--out", out, "Write the result JSON");

  auto* solve_cmd = app.add_subcommand("solve", "FEM solution for one parameter tuple");
  add_source(solve_cmd, src, true);
  solve_cmd->add_option("--params", params, "Comma-separated parameter tuple")->required();
  solve_cmd->add_option("--out", out, "Solution JSON path");
  solve_cmd->add_option("--csv", csv, "Write the solution as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*mesh_info) return cmd_mesh_info(src, threads, dump);
    if (*train_cmd) return cmd_train(src, threads, out, log, iterations);
    if (*eval_cmd) return cmd_eval_errors(src, threads, k, out, metric);
    if (*qoi_cmd) return cmd_qoi(src, threads, kind, x0, k, out);
    if (*newton_cmd) return cmd_newton(src, threads, force, warm, out, solution, csv);
    if (*curl_cmd) return cmd_curl(src, threads, out);
    if (*solve_cmd) return cmd_solve(src, threads, params, out, csv);
  } catch (const ConfigError& e) {
    print_error("config", e.what(), {{"diagnostics", e.diagnostics}});
    return kExitConfig;
  } catch (const UsageError& e) {
    print_error("usage", e.what());
    return kExitConfig;
  } catch (const TrainingError& e) {
    print_error("compute", e.what(),
                {{"iteration", e.iteration}, {"params", std::vector<double>(e.params.data(), e.params.data() + e.params.size())}});
    return kExitCompute;
  } catch (const NewtonFailure& e) {
    print_error("compute", e.what(), {{"report", newton_report_json(e.partial.report)}});
    return kExitCompute;
  } catch (const std::exception& e) {
    print_error("compute", e.what());
    return kExitCompute;
  }
  return 0;
}
