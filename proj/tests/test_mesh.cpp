#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "femol/mesh.hpp"

namespace femol {
namespace {

const std::set<EdgeTag> kAllEdges = {EdgeTag::left, EdgeTag::right, EdgeTag::top, EdgeTag::bottom};

TEST(StructuredRect, PaperSpikeMeshHas961FreeDofs) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 32, 32, kAllEdges);
  EXPECT_EQ(mesh.n_nodes(), 33 * 33);
  EXPECT_EQ(mesh.n_triangles(), 2 * 32 * 32);
  EXPECT_EQ(mesh.n_free(), 961);
  EXPECT_NEAR(mesh.h(), std::sqrt(2.0) / 16.0, 1e-15);
}

TEST(StructuredRect, FineMeshCounts) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 128, 128, kAllEdges);
  EXPECT_EQ(mesh.n_free(), 16129);
  EXPECT_EQ(mesh.n_triangles(), 32768);
}

TEST(StructuredRect, GrfMeshCount) {
  EXPECT_EQ(build_structured_rect(-1, 1, -1, 1, 64, 64, kAllEdges).n_free(), 3969);
}

TEST(StructuredRect, SingleCell) {
  const TriMesh mesh = build_structured_rect(0, 1, 0, 1, 1, 1, kAllEdges);
  EXPECT_EQ(mesh.n_nodes(), 4);
  EXPECT_EQ(mesh.n_triangles(), 2);
  EXPECT_EQ(mesh.n_free(), 0);
}

TEST(StructuredRect, RejectsBadCellCounts) {
  EXPECT_THROW(build_structured_rect(0, 1, 0, 1, 0, 3, kAllEdges), std::invalid_argument);
  EXPECT_THROW(build_structured_rect(0, 1, 0, 1, 3, -1, kAllEdges), std::invalid_argument);
  EXPECT_THROW(build_structured_rect(1, 0, 0, 1, 3, 3, kAllEdges), std::invalid_argument);
}

TEST(StructuredRect, DirichletNodesAreExactlyThoseOnTaggedEdges) {
  const TriMesh mesh = build_structured_rect(0, 2, 0, 1, 4, 3, {EdgeTag::left, EdgeTag::top});
  std::set<Index> fixed(mesh.dirichlet_nodes().begin(), mesh.dirichlet_nodes().end());
  for (Index i = 0; i < mesh.n_nodes(); ++i) {
    const auto& x = mesh.node(i);
    const bool on_tagged = x.x() == 0.0 || x.y() == 1.0;
    EXPECT_EQ(fixed.contains(i), on_tagged) << "node " << i;
    EXPECT_EQ(mesh.dofs().is_free(i), !on_tagged);
  }
}

TEST(StructuredRect, TrianglesArePositivelyOriented) {
  const TriMesh mesh = build_structured_rect(-1, 3, 0, 1, 7, 5, kAllEdges);
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    const Eigen::Vector2d e1 = mesh.node(tri[1]) - mesh.node(tri[0]);
    const Eigen::Vector2d e2 = mesh.node(tri[2]) - mesh.node(tri[0]);
    EXPECT_GT(e1.x() * e2.y() - e1.y() * e2.x(), 0.0);
  }
}

TEST(StructuredRect, AreasSumToRectangle) {
  const TriMesh mesh = build_structured_rect(-0.3, 1.7, 0.25, 1.0, 13, 9, kAllEdges);
  double sum = 0.0;
  for (Index t = 0; t < mesh.n_triangles(); ++t) sum += mesh.element_area(t);
  EXPECT_NEAR(sum, 2.0 * 0.75, 1e-12 * 1.5);
  EXPECT_NEAR(mesh.area(), 1.5, 1e-12);
}

TEST(StructuredRect, MeshSizeIsLongestEdge) {
  const TriMesh mesh = build_structured_rect(0, 3, 0, 1, 3, 4, kAllEdges);
  double h = 0.0;
  for (const auto& tri : mesh.triangles()) {
    for (int i = 0; i < 3; ++i) h = std::max(h, (mesh.node(tri[i]) - mesh.node(tri[(i + 1) % 3])).norm());
  }
  EXPECT_DOUBLE_EQ(mesh.h(), h);
  EXPECT_NEAR(h, std::hypot(1.0, 0.25), 1e-15);
}

TEST(StructuredRect, BoundaryEdgesBelongToExactlyOneTriangle) {
  const TriMesh mesh = build_structured_rect(0, 1, 0, 1, 6, 4, kAllEdges);
  std::map<std::pair<Index, Index>, int> edge_count;
  for (const auto& tri : mesh.triangles()) {
    for (int i = 0; i < 3; ++i) {
      const Index a = tri[i], b = tri[(i + 1) % 3];
      ++edge_count[{std::min(a, b), std::max(a, b)}];
    }
  }
  EXPECT_EQ(mesh.boundary_edges().size(), static_cast<std::size_t>(2 * (6 + 4)));
  for (const auto& e : mesh.boundary_edges()) {
    EXPECT_EQ((edge_count[{std::min(e.a, e.b), std::max(e.a, e.b)}]), 1);
  }
  // Every edge that occurs once is on the boundary list.
  std::size_t once = 0;
  for (const auto& [edge, count] : edge_count) once += count == 1;
  EXPECT_EQ(once, mesh.boundary_edges().size());
}

TEST(StructuredRect, FreeDofMapIsBijection) {
  const TriMesh mesh = build_structured_rect(0, 1, 0, 1, 5, 5, {EdgeTag::bottom});
  const DofMap& map = mesh.dofs();
  std::set<Index> seen;
  for (Index full = 0; full < map.n_full(); ++full) {
    if (!map.is_free(full)) continue;
    const Index f = map.free_index(full);
    ASSERT_GE(f, 0);
    ASSERT_LT(f, map.n_free());
    EXPECT_TRUE(seen.insert(f).second);
    EXPECT_EQ(map.full_index(f), full);
  }
  EXPECT_EQ(static_cast<Index>(seen.size()), map.n_free());
  for (Index node : mesh.dirichlet_nodes()) EXPECT_FALSE(map.is_free(node));
}

TEST(BeamMesh, PaperBeamCounts) {
  const TriMesh mesh = build_beam_mesh(1.0, 0.05, 40, 2);
  EXPECT_EQ(mesh.n_nodes(), 123);
  EXPECT_EQ(mesh.n_free(), 240);
  EXPECT_EQ(mesh.dofs().n_full(), 246);
  EXPECT_EQ(mesh.components(), 2);
  EXPECT_EQ(mesh.dirichlet_nodes().size(), 3u);
  for (Index node : mesh.dirichlet_nodes()) EXPECT_EQ(mesh.node(node).x(), 0.0);
}

TEST(BeamMesh, SingleCellBeam) {
  const TriMesh mesh = build_beam_mesh(1.0, 0.05, 1, 1);
  EXPECT_EQ(mesh.n_nodes(), 4);
  EXPECT_EQ(mesh.dirichlet_nodes().size(), 2u);
  EXPECT_EQ(mesh.n_free(), 4);
}

TEST(BeamMesh, AreaMatchesRectangle) {
  for (auto [l, h] : {std::pair{1.0, 0.05}, std::pair{2.5, 0.3}, std::pair{0.1, 0.01}}) {
    const TriMesh mesh = build_beam_mesh(l, h, 40, 2);
    double sum = 0.0;
    for (Index t = 0; t < mesh.n_triangles(); ++t) sum += mesh.element_area(t);
    EXPECT_NEAR(sum, l * h, 1e-12 * l * h);
  }
}

TEST(ElementGeometry, UnitRightTriangle) {
  const TriMesh mesh({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, {}, {}, 1);
  const ElementGeometry g = mesh.element_geometry(0);
  EXPECT_DOUBLE_EQ(g.area, 0.5);
  EXPECT_DOUBLE_EQ(g.grad_basis(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(g.grad_basis(0, 1), -1.0);
  EXPECT_DOUBLE_EQ(g.grad_basis(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(g.grad_basis(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(g.grad_basis(2, 0), 0.0);
  EXPECT_DOUBLE_EQ(g.grad_basis(2, 1), 1.0);
}

TEST(ElementGeometry, TranslationInvariant) {
  const TriMesh a({{0, 0}, {1, 0.2}, {0.3, 1}}, {{0, 1, 2}}, {}, {}, 1);
  const TriMesh b({{5, -2}, {6, -1.8}, {5.3, -1}}, {{0, 1, 2}}, {}, {}, 1);
  const ElementGeometry ga = a.element_geometry(0), gb = b.element_geometry(0);
  EXPECT_NEAR(ga.area, gb.area, 1e-14);
  EXPECT_LT((ga.grad_basis - gb.grad_basis).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ElementGeometry, GradientsSumToZero) {
  const TriMesh mesh = build_structured_rect(-1, 2, 0, 0.7, 9, 5, {});
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    EXPECT_LT(mesh.element_geometry(t).grad_basis.colwise().sum().norm(), 1e-12);
  }
}

TEST(ElementGeometry, OutOfRangeThrows) {
  const TriMesh mesh = build_structured_rect(0, 1, 0, 1, 2, 2, {});
  EXPECT_THROW(mesh.element_geometry(8), std::out_of_range);
  EXPECT_THROW(mesh.element_geometry(-1), std::out_of_range);
}

TEST(ElementGeometry, RejectsDegenerateTriangle) {
  EXPECT_THROW(TriMesh({{0, 0}, {1, 0}, {2, 0}}, {{0, 1, 2}}, {}, {}, 1), std::invalid_argument);
}

TEST(SampleElementBatch, ExhaustiveDrawCoversEveryTriangle) {
  const TriMesh mesh = build_structured_rect(0, 1, 0, 1, 4, 4, {});
  std::mt19937_64 rng(3);
  auto all = sample_element_batch(mesh, mesh.n_triangles(), rng);
  std::sort(all.begin(), all.end());
  std::vector<Index> expected(static_cast<std::size_t>(mesh.n_triangles()));
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(all, expected);
}

TEST(SampleElementBatch, PaperBatchIsDistinct) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 128, 128, {});
  std::mt19937_64 rng(11);
  const auto batch = sample_element_batch(mesh, 3277, rng);
  EXPECT_EQ(batch.size(), 3277u);
  EXPECT_EQ(std::set<Index>(batch.begin(), batch.end()).size(), 3277u);
}

TEST(SampleElementBatch, Deterministic) {
  const TriMesh mesh = build_structured_rect(0, 1, 0, 1, 8, 8, {});
  std::mt19937_64 a(5), b(5);
  EXPECT_EQ(sample_element_batch(mesh, 17, a), sample_element_batch(mesh, 17, b));
}

TEST(SampleElementBatch, RangeChecked) {
  const TriMesh mesh = build_structured_rect(0, 1, 0, 1, 2, 2, {});
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_element_batch(mesh, 0, rng), std::invalid_argument);
  EXPECT_THROW(sample_element_batch(mesh, 9, rng), std::invalid_argument);
}

TEST(SampleElementBatch, SingleDrawsAreUniform) {
  const TriMesh mesh = build_structured_rect(0, 1, 0, 1, 4, 4, {});
  const Index n = mesh.n_triangles();
  const int draws = 100000;
  std::vector<int> counts(static_cast<std::size_t>(n), 0);
  std::mt19937_64 rng(2024);
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(sample_element_batch(mesh, 1, rng)[0])];
  const double p = 1.0 / static_cast<double>(n);
  const double se = std::sqrt(p * (1.0 - p) / draws);
  for (int c : counts) EXPECT_LT(std::abs(c / static_cast<double>(draws) - p), 5.0 * se);
}

TEST(Locate, FindsContainingTriangle) {
  const TriMesh mesh = build_structured_rect(-1, 1, -1, 1, 6, 6, {});
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const Eigen::Vector2d x(u(rng), u(rng));
    Eigen::Vector3d bary;
    const Index t = mesh.locate(x, bary);
    ASSERT_GE(t, 0);
    EXPECT_NEAR(bary.sum(), 1.0, 1e-14);
    EXPECT_GE(bary.minCoeff(), -1e-12);
    const auto& tri = mesh.triangle(t);
    const Eigen::Vector2d back =
        bary[0] * mesh.node(tri[0]) + bary[1] * mesh.node(tri[1]) + bary[2] * mesh.node(tri[2]);
    EXPECT_LT((back - x).norm(), 1e-13);
  }
  Eigen::Vector3d bary;
  EXPECT_EQ(mesh.locate({1.5, 0.0}, bary), -1);
}

TEST(Renumber, SameGeometryDifferentLabels) {
  const TriMesh mesh = build_structured_rect(0, 1, 0, 1, 3, 3, kAllEdges);
  std::vector<Index> perm(static_cast<std::size_t>(mesh.n_nodes()));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(4);
  std::shuffle(perm.begin(), perm.end(), rng);
  const TriMesh other = renumber_nodes(mesh, perm, kAllEdges);
  EXPECT_EQ(other.n_free(), mesh.n_free());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    EXPECT_EQ(other.node(static_cast<Index>(k)), mesh.node(perm[k]));
  }
  EXPECT_NEAR(other.area(), mesh.area(), 1e-15);
}

}  // namespace
}  // namespace femol
