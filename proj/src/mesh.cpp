#include "femol/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace femol {

std::string to_string(EdgeTag tag) {
  switch (tag) {
    case EdgeTag::left: return "left";
    case EdgeTag::right: return "right";
    case EdgeTag::top: return "top";
    case EdgeTag::bottom: return "bottom";
  }
  return "?";
}

EdgeTag edge_tag_from_string(const std::string& name) {
  if (name == "left") return EdgeTag::left;
  if (name == "right") return EdgeTag::right;
  if (name == "top") return EdgeTag::top;
  if (name == "bottom") return EdgeTag::bottom;
  throw std::invalid_argument("unknown edge tag '" + name + "'");
}

DofMap::DofMap(Index n_nodes, int components, const std::vector<bool>& node_fixed)
    : components_(components) {
  full_to_free_.assign(static_cast<std::size_t>(n_nodes * components), -1);
  for (Index n = 0; n < n_nodes; ++n) {
    if (node_fixed[static_cast<std::size_t>(n)]) continue;
    for (int c = 0; c < components; ++c) {
      const Index full = n * components + c;
      full_to_free_[static_cast<std::size_t>(full)] = static_cast<Index>(free_to_full_.size());
      free_to_full_.push_back(full);
    }
  }
}

Eigen::VectorXd DofMap::scatter(const Eigen::VectorXd& free, const Eigen::VectorXd& dirichlet) const {
  if (free.size() != n_free()) {
    throw std::invalid_argument("scatter: free vector has length " + std::to_string(free.size()) +
                                ", expected " + std::to_string(n_free()));
  }
  if (dirichlet.size() != 0 && dirichlet.size() != n_full()) {
    throw std::invalid_argument("scatter: Dirichlet vector length mismatch");
  }
  Eigen::VectorXd full = dirichlet.size() == 0 ? Eigen::VectorXd::Zero(n_full()) : dirichlet;
  for (Index k = 0; k < n_free(); ++k) full[full_index(k)] = free[k];
  return full;
}

Eigen::VectorXd DofMap::gather(const Eigen::VectorXd& full) const {
  if (full.size() != n_full()) {
    throw std::invalid_argument("gather: full vector has length " + std::to_string(full.size()) +
                                ", expected " + std::to_string(n_full()));
  }
  Eigen::VectorXd free(n_free());
  for (Index k = 0; k < n_free(); ++k) free[k] = full[full_index(k)];
  return free;
}

TriMesh::TriMesh(std::vector<Eigen::Vector2d> nodes, std::vector<std::array<Index, 3>> triangles,
                 std::vector<BoundaryEdge> boundary_edges, std::set<EdgeTag> dirichlet_tags,
                 int components)
    : nodes_(std::move(nodes)),
      triangles_(std::move(triangles)),
      boundary_edges_(std::move(boundary_edges)) {
  if (components != 1 && components != 2) {
    throw std::invalid_argument("TriMesh: components must be 1 or 2");
  }
  std::vector<bool> fixed(nodes_.size(), false);
  for (const auto& e : boundary_edges_) {
    if (dirichlet_tags.contains(e.tag)) {
      fixed[static_cast<std::size_t>(e.a)] = true;
      fixed[static_cast<std::size_t>(e.b)] = true;
    }
  }
  for (std::size_t n = 0; n < fixed.size(); ++n) {
    if (fixed[n]) dirichlet_nodes_.push_back(static_cast<Index>(n));
  }
  dofs_ = DofMap(n_nodes(), components, fixed);

  areas_.resize(triangles_.size());
  grads_.resize(triangles_.size());
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    p1_geometry<double>(nodes_[static_cast<std::size_t>(tri[0])],
                        nodes_[static_cast<std::size_t>(tri[1])],
                        nodes_[static_cast<std::size_t>(tri[2])], areas_[t], grads_[t]);
    if (!(areas_[t] > 0.0)) {
      throw std::invalid_argument("TriMesh: triangle " + std::to_string(t) +
                                  " has non-positive signed area");
    }
    for (int i = 0; i < 3; ++i) {
      const double len = (nodes_[static_cast<std::size_t>(tri[i])] -
                          nodes_[static_cast<std::size_t>(tri[(i + 1) % 3])])
                             .norm();
      h_ = std::max(h_, len);
    }
  }
}

double TriMesh::area() const {
  double sum = 0.0;
  for (double a : areas_) sum += a;
  return sum;
}

Eigen::AlignedBox2d TriMesh::bounding_box() const {
  Eigen::AlignedBox2d box;
  for (const auto& p : nodes_) box.extend(p);
  return box;
}

ElementGeometry TriMesh::element_geometry(Index t) const {
  if (t < 0 || t >= n_triangles()) {
    throw std::out_of_range("element_geometry: triangle index " + std::to_string(t) +
                            " out of range");
  }
  ElementGeometry g;
  g.area = element_area(t);
  g.grad_basis = element_grad(t);
  g.vertex_ids = triangle(t);
  return g;
}

std::array<Index, 6> TriMesh::element_dofs(Index t) const {
  const auto& tri = triangle(t);
  const int c = components();
  std::array<Index, 6> out{};
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < c; ++k) out[static_cast<std::size_t>(i * c + k)] = tri[static_cast<std::size_t>(i)] * c + k;
  }
  return out;
}

Index TriMesh::locate(const Eigen::Vector2d& point, Eigen::Vector3d& barycentric, double tol) const {
  for (Index t = 0; t < n_triangles(); ++t) {
    const auto& tri = triangle(t);
    const Eigen::Vector2d& x0 = node(tri[0]);
    const auto& g = element_grad(t);
    const Eigen::Vector2d d = point - x0;
    const double l1 = g.row(1).dot(d);
    const double l2 = g.row(2).dot(d);
    const double l0 = 1.0 - l1 - l2;
    if (l0 >= -tol && l1 >= -tol && l2 >= -tol) {
      barycentric = Eigen::Vector3d(l0, l1, l2);
      return t;
    }
  }
  return -1;
}

TriMesh build_structured_rect(double x_min, double x_max, double y_min, double y_max, Index nx,
                              Index ny, const std::set<EdgeTag>& dirichlet, int components) {
  if (nx < 1 || ny < 1) {
    throw std::invalid_argument("build_structured_rect: cell counts must be >= 1");
  }
  if (!(x_min < x_max) || !(y_min < y_max)) {
    throw std::invalid_argument("build_structured_rect: empty rectangle");
  }
  const auto id = [nx](Index i, Index j) { return j * (nx + 1) + i; };

  std::vector<Eigen::Vector2d> nodes;
  nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (Index j = 0; j <= ny; ++j) {
    // Endpoints are set exactly so boundary coordinates carry no rounding.
    const double y = j == ny ? y_max : y_min + (y_max - y_min) * static_cast<double>(j) / static_cast<double>(ny);
    for (Index i = 0; i <= nx; ++i) {
      const double x = i == nx ? x_max : x_min + (x_max - x_min) * static_cast<double>(i) / static_cast<double>(nx);
      nodes.emplace_back(x, y);
    }
  }

  std::vector<std::array<Index, 3>> tris;
  tris.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (Index j = 0; j < ny; ++j) {
    for (Index i = 0; i < nx; ++i) {
      const Index n00 = id(i, j), n10 = id(i + 1, j), n01 = id(i, j + 1), n11 = id(i + 1, j + 1);
      tris.push_back({n00, n10, n11});
      tris.push_back({n00, n11, n01});
    }
  }

  std::vector<BoundaryEdge> edges;
  for (Index i = 0; i < nx; ++i) edges.push_back({id(i, 0), id(i + 1, 0), EdgeTag::bottom});
  for (Index j = 0; j < ny; ++j) edges.push_back({id(nx, j), id(nx, j + 1), EdgeTag::right});
  for (Index i = nx; i > 0; --i) edges.push_back({id(i, ny), id(i - 1, ny), EdgeTag::top});
  for (Index j = ny; j > 0; --j) edges.push_back({id(0, j), id(0, j - 1), EdgeTag::left});

  return TriMesh(std::move(nodes), std::move(tris), std::move(edges), dirichlet, components);
}

TriMesh build_beam_mesh(double length, double height, Index nx, Index ny) {
  return build_structured_rect(0.0, length, 0.0, height, nx, ny, {EdgeTag::left}, 2);
}

TriMesh renumber_nodes(const TriMesh& mesh, std::span<const Index> permutation,
                       const std::set<EdgeTag>& dirichlet) {
  if (static_cast<Index>(permutation.size()) != mesh.n_nodes()) {
    throw std::invalid_argument("renumber_nodes: permutation length mismatch");
  }
  std::vector<Index> old_to_new(permutation.size(), -1);
  for (std::size_t k = 0; k < permutation.size(); ++k) {
    old_to_new[static_cast<std::size_t>(permutation[k])] = static_cast<Index>(k);
  }
  std::vector<Eigen::Vector2d> nodes(permutation.size());
  for (std::size_t k = 0; k < permutation.size(); ++k) nodes[k] = mesh.node(permutation[k]);
  auto tris = mesh.triangles();
  for (auto& tri : tris) {
    for (auto& v : tri) v = old_to_new[static_cast<std::size_t>(v)];
  }
  auto edges = mesh.boundary_edges();
  for (auto& e : edges) {
    e.a = old_to_new[static_cast<std::size_t>(e.a)];
    e.b = old_to_new[static_cast<std::size_t>(e.b)];
  }
  return TriMesh(std::move(nodes), std::move(tris), std::move(edges), dirichlet, mesh.components());
}

std::vector<Index> sample_element_batch(const TriMesh& mesh, Index count, std::mt19937_64& rng) {
  const Index n = mesh.n_triangles();
  if (count < 1 || count > n) {
    throw std::invalid_argument("sample_element_batch: count " + std::to_string(count) +
                                " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  // Partial Fisher-Yates: the first `count` slots form the sample.
  for (Index k = 0; k < count; ++k) {
    std::uniform_int_distribution<Index> pick(k, n - 1);
    std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

}  // namespace femol
