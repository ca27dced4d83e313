#include "femol/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace femol {

nlohmann::json mesh_to_json(const TriMesh& mesh) {
  auto nodes = nlohmann::json::array();
  for (const auto& x : mesh.nodes()) nodes.push_back({x.x(), x.y()});
  auto triangles = nlohmann::json::array();
  for (const auto& t : mesh.triangles()) triangles.push_back({t[0], t[1], t[2]});
  return {{"nodes", std::move(nodes)}, {"triangles", std::move(triangles)}, {"dirichlet", mesh.dirichlet_nodes()}};
}

nlohmann::json solution_to_json(const TriMesh& mesh, const Eigen::VectorXd& u_full) {
  if (u_full.size() != mesh.dofs().n_full()) throw std::invalid_argument("solution_to_json: length mismatch");
  const int c = mesh.components();
  auto nodes = nlohmann::json::array();
  auto values = nlohmann::json::array();
  for (Index i = 0; i < mesh.n_nodes(); ++i) {
    nodes.push_back({mesh.node(i).x(), mesh.node(i).y()});
    auto v = nlohmann::json::array();
    for (int k = 0; k < c; ++k) v.push_back(u_full[c * i + k]);
    values.push_back(std::move(v));
  }
  return {{"components", c}, {"nodes", std::move(nodes)}, {"values", std::move(values)}};
}

std::string solution_csv(const TriMesh& mesh, const Eigen::VectorXd& u_full) {
  if (u_full.size() != mesh.dofs().n_full()) throw std::invalid_argument("solution_csv: length mismatch");
  const int c = mesh.components();
  std::ostringstream out;
  out.precision(17);
  out << (c == 1 ? "node_x,node_y,value\n" : "node_x,node_y,u_x,u_y\n");
  for (Index i = 0; i < mesh.n_nodes(); ++i) {
    out << mesh.node(i).x() << ',' << mesh.node(i).y();
    for (int k = 0; k < c; ++k) out << ',' << u_full[c * i + k];
    out << '\n';
  }
  return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace femol
