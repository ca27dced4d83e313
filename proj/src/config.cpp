#include "femol/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace femol {

using nlohmann::json;

ConfigError::ConfigError(std::vector<std::string> diags)
    : std::runtime_error([&] {
        std::string msg = "invalid configuration";
        for (const auto& d : diags) msg += "\n  " + d;
        return msg;
      }()),
      diagnostics(std::move(diags)) {}

namespace {

// Reads one JSON object, remembering which keys were consumed.
class Reader {
 public:
  Reader(const json* j, std::string path, std::vector<std::string>& errors)
      : j_(j), path_(std::move(path)), errors_(&errors) {
    if (j_ != nullptr && !j_->is_object()) {
      fail("", "expected an object");
      j_ = nullptr;
    }
  }

  Reader child(const char* key) {
    seen_.insert(key);
    const json* c = find(key);
    return Reader(c, path_ + "/" + key, *errors_);
  }

  void get(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (v->is_number()) {
        out = v->get<double>();
      } else {
        fail(key, "expected a number");
      }
    }
  }

  void get(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (v->is_boolean()) {
        out = v->get<bool>();
      } else {
        fail(key, "expected a boolean");
      }
    }
  }

  void get(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (v->is_string()) {
        out = v->get<std::string>();
      } else {
        fail(key, "expected a string");
      }
    }
  }

  template <class Int>
    requires std::is_integral_v<Int>
  void get(const char* key, Int& out) {
    const json* v = take(key);
    if (v == nullptr) return;
    if (v->is_number_integer()) {
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned() || v->get<std::int64_t>() >= 0) {
          out = v->get<Int>();
          return;
        }
        fail(key, "expected a non-negative integer");
        return;
      } else {
        out = v->get<Int>();
        return;
      }
    }
    if (v->is_number_float()) {
      const double d = v->get<double>();
      if (std::floor(d) == d && std::abs(d) < 9e15 && (!std::is_unsigned_v<Int> || d >= 0.0)) {
        out = static_cast<Int>(d);
        return;
      }
    }
    fail(key, "expected an integer");
  }

  void get(const char* key, Eigen::Vector2d& out) {
    if (const json* v = take(key)) {
      if (v->is_array() && v->size() == 2 && (*v)[0].is_number() && (*v)[1].is_number()) {
        out = Eigen::Vector2d((*v)[0].get<double>(), (*v)[1].get<double>());
      } else {
        fail(key, "expected [x, y]");
      }
    }
  }

  bool has(const char* key) const { return find(key) != nullptr; }
  void skip(const char* key) { seen_.insert(key); }

  void require(bool ok, const char* key, const std::string& message) {
    if (!ok) fail(key, message);
  }

  void finish() {
    if (j_ == nullptr) return;
    for (const auto& [key, value] : j_->items()) {
      if (!seen_.contains(key)) fail(key.c_str(), "unknown key");
    }
  }

 private:
  const json* find(const char* key) const {
    if (j_ == nullptr) return nullptr;
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }

  const json* take(const char* key) {
    seen_.insert(key);
    return find(key);
  }

  void fail(const char* key, const std::string& message) {
    std::string where = path_;
    if (*key != '\0') where += "/";
    where += key;
    if (where.empty()) where = "/";
    errors_->push_back(where + ": " + message);
  }

  const json* j_;
  std::string path_;
  std::vector<std::string>* errors_;
  std::set<std::string> seen_;
};

RunConfig spike_base() {
  RunConfig c;
  c.problem = ProblemKind::spike;
  c.mesh = MeshSpec{-1.0, 1.0, -1.0, 1.0, 32, 32};
  c.train.width = 256;
  c.train.iterations = 1000000;
  c.train.log_every = 1000;
  c.evaluation.k = 10000;
  return c;
}

RunConfig grf_base() {
  RunConfig c = spike_base();
  c.problem = ProblemKind::grf;
  c.mesh.nx = c.mesh.ny = 64;
  c.train.width = 512;
  return c;
}

RunConfig beam_base(double f_std, bool basic) {
  RunConfig c;
  c.problem = ProblemKind::beam;
  c.mesh.nx = 40;
  c.mesh.ny = 2;
  c.train.width = 256;
  c.train.iterations = 1000000;
  c.train.lr = LrSchedule{1e-4, 0.5, 250000};
  // Glorot outputs are O(1) displacements on a beam 0.05 thick, which inverts
  // most elements; start from the unloaded state instead.
  c.train.output_init_scale = 0.0;
  c.train.distributions.p_min = 0.0;
  c.train.distributions.p_max = c.beam.length;
  c.train.distributions.fx_std = basic ? 0.0 : f_std;
  c.train.distributions.fy_std = f_std;
  c.evaluation.k = 1000;
  return c;
}

RunConfig to_desk(RunConfig c, long iterations) {
  c.train.width = 128;
  c.train.iterations = iterations;
  if (c.train.lr.interval > 0) c.train.lr.interval = std::max<long>(1, c.train.lr.interval * iterations / 1000000);
  return c;
}

// lr 1e-4 keeps kicking the short run into inverted states; each kick leaves
// Adam's second moment huge for tens of thousands of steps.
// The eb16 forces are four times larger and 1e-5 still diverges there.
RunConfig desk_beam(RunConfig c, double lr) {
  c = to_desk(std::move(c), 100000);
  c.train.lr.base = lr;
  return c;
}

const std::map<std::string, RunConfig (*)()>& presets() {
  static const std::map<std::string, RunConfig (*)()> table = {
      {"paper-spike-256", [] { return spike_base(); }},
      {"paper-spike-2048",
       [] {
         RunConfig c = spike_base();
         c.mesh.nx = c.mesh.ny = 128;
         c.train.width = 2048;
         c.train.element_batch = 3277;
         return c;
       }},
      {"paper-grf-512", [] { return grf_base(); }},
      {"paper-beam-bb", [] { return beam_base(1.0, true); }},
      {"paper-beam-eb16", [] { return beam_base(4.0, false); }},
      {"desk-spike",
       [] {
         RunConfig c = to_desk(spike_base(), 100000);
         c.mesh.nx = c.mesh.ny = 16;
         c.evaluation.k = 200;
         return c;
       }},
      {"desk-grf",
       [] {
         RunConfig c = to_desk(grf_base(), 100000);
         c.mesh.nx = c.mesh.ny = 32;
         c.evaluation.k = 1000;
         return c;
       }},
      {"desk-beam-bb", [] { return desk_beam(beam_base(1.0, true), 1e-5); }},
      {"desk-beam-eb16", [] { return desk_beam(beam_base(4.0, false), 3e-6); }},
  };
  return table;
}

void read_config(Reader& r, RunConfig& c) {
  std::string problem = to_string(c.problem);
  r.get("problem", problem);
  try {
    c.problem = problem_kind_from_string(problem);
  } catch (const std::invalid_argument&) {
    r.require(false, "problem", "expected one of spike, grf, beam");
  }
  r.get("seed", c.train.seed);
  r.get("source", c.source);
  r.get("output_dir", c.output_dir);

  {
    Reader m = r.child("mesh");
    m.get("x_min", c.mesh.x_min);
    m.get("x_max", c.mesh.x_max);
    m.get("y_min", c.mesh.y_min);
    m.get("y_max", c.mesh.y_max);
    m.get("nx", c.mesh.nx);
    m.get("ny", c.mesh.ny);
    m.require(c.mesh.nx >= 1, "nx", "must be >= 1");
    m.require(c.mesh.ny >= 1, "ny", "must be >= 1");
    m.require(c.mesh.x_max > c.mesh.x_min, "x_max", "must exceed x_min");
    m.require(c.mesh.y_max > c.mesh.y_min, "y_max", "must exceed y_min");
    m.finish();
  }
  {
    Reader t = r.child("train");
    TrainConfig& tc = c.train;
    t.get("width", tc.width);
    t.get("depth", tc.depth);
    t.get("batch_size", tc.batch_size);
    t.get("element_batch", tc.element_batch);
    t.get("subset_scaling", tc.subset_scaling);
    if (t.has("paper_literal_subset_sum")) {
      bool literal = !tc.subset_scaling;
      t.get("paper_literal_subset_sum", literal);
      t.require(!(t.has("subset_scaling") && literal == tc.subset_scaling), "paper_literal_subset_sum",
                "contradicts subset_scaling");
      tc.subset_scaling = !literal;
    }
    t.get("output_init_scale", tc.output_init_scale);
    t.get("iterations", tc.iterations);
    t.get("log_every", tc.log_every);
    t.get("checkpoint_every", c.checkpoint_every);
    t.require(tc.width >= 1, "width", "must be >= 1");
    t.require(tc.depth >= 1, "depth", "must be >= 1");
    t.require(tc.batch_size >= 1, "batch_size", "must be >= 1");
    t.require(tc.output_init_scale >= 0.0, "output_init_scale", "must be >= 0");
    t.require(tc.iterations >= 0, "iterations", "must be >= 0");
    t.require(tc.log_every >= 0, "log_every", "must be >= 0");
    t.require(c.checkpoint_every >= 0, "checkpoint_every", "must be >= 0");
    const Index n_tri = 2 * c.mesh.nx * c.mesh.ny;
    t.require(tc.element_batch >= 0 && tc.element_batch <= n_tri, "element_batch",
              "must lie in [0, " + std::to_string(n_tri) + "] (0 uses all elements)");
    {
      Reader l = t.child("lr");
      l.get("base", tc.lr.base);
      l.get("factor", tc.lr.factor);
      l.get("interval", tc.lr.interval);
      l.require(tc.lr.base > 0.0, "base", "must be positive");
      l.require(tc.lr.factor > 0.0, "factor", "must be positive");
      l.require(tc.lr.interval >= 0, "interval", "must be >= 0");
      l.finish();
    }
    {
      Reader d = t.child("distributions");
      ParamDistributions& pd = tc.distributions;
      d.get("center_min", pd.center_min);
      d.get("center_max", pd.center_max);
      d.get("radius_min", pd.radius_min);
      d.get("radius_max", pd.radius_max);
      d.get("p_min", pd.p_min);
      d.get("p_max", pd.p_max);
      d.get("fx_std", pd.fx_std);
      d.get("fy_std", pd.fy_std);
      d.require(pd.center_min <= pd.center_max, "center_max", "must be >= center_min");
      d.require(pd.radius_min > 0.0, "radius_min", "must be positive");
      d.require(pd.radius_min <= pd.radius_max, "radius_max", "must be >= radius_min");
      d.require(pd.p_min <= pd.p_max, "p_max", "must be >= p_min");
      d.require(pd.fx_std >= 0.0, "fx_std", "must be >= 0");
      d.require(pd.fy_std >= 0.0, "fy_std", "must be >= 0");
      d.finish();
    }
    t.finish();
  }
  {
    Reader g = r.child("grf");
    g.get("n_kl", c.grf.n_kl);
    g.get("mu", c.grf.mu);
    g.get("sigma", c.grf.sigma);
    g.get("correlation_length", c.grf.correlation_length);
    const Index n_nodes = (c.mesh.nx + 1) * (c.mesh.ny + 1);
    g.require(c.grf.n_kl >= 1 && c.grf.n_kl <= n_nodes, "n_kl", "must lie in [1, number of mesh nodes]");
    g.require(c.grf.sigma >= 0.0, "sigma", "must be >= 0");
    g.require(c.grf.correlation_length > 0.0, "correlation_length", "must be positive");
    g.finish();
  }
  {
    Reader b = r.child("beam");
    b.get("length", c.beam.length);
    b.get("height", c.beam.height);
    b.get("traction_length", c.beam.traction_length);
    b.get("young", c.beam.young);
    b.get("poisson", c.beam.poisson);
    b.get("j_floor", c.beam.j_floor);
    b.require(c.beam.length > 0.0, "length", "must be positive");
    b.require(c.beam.height > 0.0, "height", "must be positive");
    b.require(c.beam.traction_length > 0.0, "traction_length", "must be positive");
    b.require(c.beam.young > 0.0, "young", "must be positive");
    b.require(c.beam.poisson > -1.0 && c.beam.poisson < 0.5, "poisson", "must lie in (-1, 0.5)");
    b.require(c.beam.j_floor > 0.0 && c.beam.j_floor < 1.0, "j_floor", "must lie in (0, 1)");
    b.finish();
  }
  {
    Reader e = r.child("evaluation");
    e.get("k", c.evaluation.k);
    e.get("bins", c.evaluation.bins);
    e.get("x0", c.evaluation.x0);
    e.get("seed", c.evaluation.seed);
    e.get("oracle_tol", c.evaluation.oracle_tol);
    e.require(c.evaluation.k >= 1, "k", "must be >= 1");
    e.require(c.evaluation.bins >= 1, "bins", "must be >= 1");
    e.require(c.evaluation.oracle_tol > 0.0, "oracle_tol", "must be positive");
    e.finish();
  }
  {
    Reader n = r.child("newton");
    n.get("tol", c.newton.tol);
    n.get("energy_stagnation", c.newton.energy_stagnation);
    n.get("max_iterations", c.newton.max_iterations);
    n.get("max_halvings", c.newton.max_halvings);
    n.get("sufficient_decrease", c.newton.sufficient_decrease);
    n.require(c.newton.tol > 0.0, "tol", "must be positive");
    n.require(c.newton.energy_stagnation >= 0.0, "energy_stagnation", "must be >= 0");
    n.require(c.newton.max_iterations >= 0, "max_iterations", "must be >= 0");
    n.require(c.newton.max_halvings >= 0, "max_halvings", "must be >= 0");
    n.require(c.newton.sufficient_decrease >= 0.0 && c.newton.sufficient_decrease < 1.0, "sufficient_decrease",
              "must lie in [0, 1)");
    n.finish();
  }
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : presets()) names.push_back(name);
  return names;
}

RunConfig preset_config(const std::string& name) {
  const auto it = presets().find(name);
  if (it == presets().end()) {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError({"/preset: unknown preset '" + name + "' (known: " + known + ")"});
  }
  RunConfig c = it->second();
  c.preset = name;
  return c;
}

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ConfigError({"/: expected an object"});
  RunConfig c;
  std::vector<std::string> errors;
  if (auto it = j.find("preset"); it != j.end()) {
    if (!it->is_string()) throw ConfigError({"/preset: expected a string"});
    c = preset_config(it->get<std::string>());
  } else if (auto p = j.find("problem"); p != j.end() && p->is_string()) {
    // Without a preset the problem kind picks the paper-scale defaults.
    const std::string kind = p->get<std::string>();
    if (kind == "grf") c = grf_base();
    if (kind == "beam") c = beam_base(1.0, true);
    if (kind == "spike") c = spike_base();
  }
  Reader r(&j, "", errors);
  r.skip("preset");
  read_config(r, c);
  r.finish();
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path.string()});
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({path.string() + ": JSON parse error: " + e.what()});
  }
  return parse_run_config(j);
}

json RunConfig::to_json() const {
  json j;
  if (!preset.empty()) j["preset"] = preset;
  j["problem"] = to_string(problem);
  j["seed"] = train.seed;
  j["source"] = source;
  j["output_dir"] = output_dir;
  j["mesh"] = {{"x_min", mesh.x_min}, {"x_max", mesh.x_max}, {"y_min", mesh.y_min},
               {"y_max", mesh.y_max}, {"nx", mesh.nx},       {"ny", mesh.ny}};
  const auto& d = train.distributions;
  j["train"] = {
      {"width", train.width},
      {"depth", train.depth},
      {"batch_size", train.batch_size},
      {"element_batch", train.element_batch},
      {"subset_scaling", train.subset_scaling},
      {"output_init_scale", train.output_init_scale},
      {"iterations", train.iterations},
      {"log_every", train.log_every},
      {"checkpoint_every", checkpoint_every},
      {"lr", {{"base", train.lr.base}, {"factor", train.lr.factor}, {"interval", train.lr.interval}}},
      {"distributions",
       {{"center_min", d.center_min},
        {"center_max", d.center_max},
        {"radius_min", d.radius_min},
        {"radius_max", d.radius_max},
        {"p_min", d.p_min},
        {"p_max", d.p_max},
        {"fx_std", d.fx_std},
        {"fy_std", d.fy_std}}},
  };
  j["grf"] = {{"n_kl", grf.n_kl}, {"mu", grf.mu}, {"sigma", grf.sigma}, {"correlation_length", grf.correlation_length}};
  j["beam"] = {{"length", beam.length},   {"height", beam.height},   {"traction_length", beam.traction_length},
               {"young", beam.young},     {"poisson", beam.poisson}, {"j_floor", beam.j_floor}};
  j["evaluation"] = {{"k", evaluation.k},
                     {"bins", evaluation.bins},
                     {"x0", {evaluation.x0.x(), evaluation.x0.y()}},
                     {"seed", evaluation.seed},
                     {"oracle_tol", evaluation.oracle_tol}};
  j["newton"] = {{"tol", newton.tol},
                 {"energy_stagnation", newton.energy_stagnation},
                 {"max_iterations", newton.max_iterations},
                 {"max_halvings", newton.max_halvings},
                 {"sufficient_decrease", newton.sufficient_decrease}};
  return j;
}

TriMesh build_mesh(const RunConfig& config) {
  if (config.problem == ProblemKind::beam) {
    return build_beam_mesh(config.beam.length, config.beam.height, config.mesh.nx, config.mesh.ny);
  }
  const auto& m = config.mesh;
  return build_structured_rect(m.x_min, m.x_max, m.y_min, m.y_max, m.nx, m.ny,
                               {EdgeTag::left, EdgeTag::right, EdgeTag::top, EdgeTag::bottom});
}

Problem build_problem(const RunConfig& config, const json* kl_basis) {
  Problem p;
  p.mesh = std::make_unique<TriMesh>(build_mesh(config));
  switch (config.problem) {
    case ProblemKind::spike:
      p.model = std::make_unique<SpikePoissonModel>(*p.mesh, config.source);
      break;
    case ProblemKind::grf: {
      if (kl_basis != nullptr) {
        auto basis = std::make_shared<KlBasis>(KlBasis::from_json(*kl_basis));
        if (basis->eigenvectors.rows() != p.mesh->n_nodes() || basis->size() != config.grf.n_kl) {
          throw ConfigError({"/kl_basis: stored basis does not match the mesh or n_kl"});
        }
        p.kl_basis = std::move(basis);
      } else {
        p.kl_basis = std::make_shared<KlBasis>(build_kl_basis(*p.mesh, config.grf.n_kl, config.grf.mu,
                                                              config.grf.sigma, config.grf.correlation_length));
      }
      p.model = std::make_unique<GrfPoissonModel>(*p.mesh, p.kl_basis, config.source);
      break;
    }
    case ProblemKind::beam: {
      const auto material =
          NeoHookeanMaterial::from_young_poisson(config.beam.young, config.beam.poisson, config.beam.j_floor);
      p.model = std::make_unique<NeoHookeanBeamModel>(*p.mesh, material, config.beam.traction_length);
      break;
    }
  }
  return p;
}

}  // namespace femol
