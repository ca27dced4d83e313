#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "femol/mesh.hpp"

namespace femol {

/// {"nodes":[[x,y],...],"triangles":[[i,j,k],...],"dirichlet":[...]}
nlohmann::json mesh_to_json(const TriMesh& mesh);

/// {"components":c,"nodes":[[x,y],...],"values":[[v0,...],...]} for a full
/// nodal vector.
nlohmann::json solution_to_json(const TriMesh& mesh, const Eigen::VectorXd& u_full);

/// node_x,node_y,value (scalar) or node_x,node_y,u_x,u_y (vector), one row per node.
std::string solution_csv(const TriMesh& mesh, const Eigen::VectorXd& u_full);

/// Writes `text` to `path`, creating parent directories. Throws std::runtime_error.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace femol
