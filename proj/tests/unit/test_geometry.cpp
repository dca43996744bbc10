#include <gtest/gtest.h>

#include <set>

#include "lcbf/errors.hpp"
#include "lcbf/geometry.hpp"
#include "support/oracles.hpp"
#include "support/suites.hpp"

namespace lcbf {
namespace {

using suites::jet_engine_region;
using suites::vec2;

RegionSpec unit_square() {
  RegionSpec r;
  r.state_space = Box(vec2(0, 0), vec2(1, 1));
  return r;
}

TEST(Region, JetEngineMembership) {
  const RegionSpec r = jet_engine_region();
  EXPECT_TRUE(contains(r, vec2(0.5, 1.0)));
  EXPECT_FALSE(contains(r, vec2(-0.5, -1.5)));
  EXPECT_FALSE(contains(r, vec2(10, 10)));
  // Closed boxes on both sides of the boundary.
  EXPECT_FALSE(contains(r, vec2(0.0, 1.0)));
  EXPECT_FALSE(contains(r, vec2(1.0, 2.0)));
  EXPECT_TRUE(contains(r, vec2(3.0, -4.0)));
}

TEST(Region, RejectsUnsafeBoxOutsideStateSpace) {
  RegionSpec r = unit_square();
  r.unsafe.emplace_back(vec2(2, 2), vec2(3, 3));
  EXPECT_THROW(r.validate(), ContractViolation);
  EXPECT_THROW(Box(vec2(1, 0), vec2(0, 1)), ContractViolation);
}

TEST(Grid, SmallLattices) {
  EXPECT_EQ(build_grid(unit_square(), Vec::Constant(2, 0.5)).size(), 9u);
  RegionSpec r = unit_square();
  r.unsafe.emplace_back(vec2(0, 0.6), vec2(1, 1));
  EXPECT_EQ(build_grid(r, Vec::Constant(2, 0.5)).size(), 6u);
  r.unsafe.emplace_back(vec2(0, 0), vec2(1, 1));
  EXPECT_THROW(build_grid(r, Vec::Constant(2, 0.5)), DegenerateRegion);
}

TEST(Grid, JetEngineMatchesMembershipScan) {
  const RegionSpec r = jet_engine_region();
  const AllowableGrid grid = build_grid(r, Vec::Constant(2, 0.1));
  std::size_t expect = 0;
  for (int i = 0; i <= 40; ++i) {
    for (int j = 0; j <= 80; ++j) {
      const Vec x = vec2(-1.0 + 0.1 * i, -4.0 + 0.1 * j);
      bool ok = true;
      for (const Box& u : r.unsafe) ok = ok && !oracle::in_closed_box(u, x);
      expect += ok;
    }
  }
  EXPECT_EQ(grid.size(), expect);
  std::set<AllowableGrid::Coord> seen;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    EXPECT_TRUE(contains(r, grid.nodes[k]));
    EXPECT_TRUE(seen.insert(grid.coords[k]).second);
    EXPECT_EQ(grid.locate(grid.nodes[k]), static_cast<int>(k));
  }
  EXPECT_FALSE(grid.locate(vec2(-0.5, -1.5)).has_value());
}

TEST(Graph, DegreesAndEdgeCount) {
  const AllowableGrid grid = build_grid(unit_square(), Vec::Constant(2, 0.5));
  const StateGraph g = gen_graph(grid);
  const int center = *grid.locate(vec2(0.5, 0.5));
  const int corner = *grid.locate(vec2(0, 0));
  EXPECT_EQ(g.adjacency[center].size(), 4u);
  EXPECT_EQ(g.adjacency[corner].size(), 2u);

  const AllowableGrid jet = build_grid(jet_engine_region(), Vec::Constant(2, 0.1));
  const StateGraph jg = gen_graph(jet);
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < jet.size(); ++a) {
    for (std::size_t b = a + 1; b < jet.size(); ++b) {
      const double d = (jet.nodes[a] - jet.nodes[b]).cwiseAbs().sum();
      pairs += std::abs(d - 0.1) < 1e-9;
    }
  }
  EXPECT_EQ(jg.edge_count(), pairs);
  for (std::size_t a = 0; a < jg.size(); ++a) {
    for (int b : jg.adjacency[a]) {
      const auto& back = jg.adjacency[static_cast<std::size_t>(b)];
      EXPECT_NE(std::find(back.begin(), back.end(), static_cast<int>(a)), back.end());
    }
  }
}

TEST(Graph, SingleNode) {
  RegionSpec r;
  r.state_space = Box(vec2(0, 0), vec2(0.05, 0.05));
  const AllowableGrid grid = build_grid(r, Vec::Constant(2, 0.1));
  ASSERT_EQ(grid.size(), 1u);
  const StateGraph g = gen_graph(grid);
  EXPECT_TRUE(g.adjacency[0].empty());
  EXPECT_EQ(bfs_traverse(g, 0), std::vector<int>{0});
}

TEST(Bfs, PathGraphAndContract) {
  StateGraph g;
  g.adjacency = {{1}, {0, 2}, {1}};
  EXPECT_EQ(bfs_traverse(g, 0), (std::vector<int>{0, 1, 2}));
  EXPECT_THROW(bfs_traverse(g, 3), ContractViolation);
}

TEST(Bfs, JetEngineMatchesUnionFind) {
  const RegionSpec r = jet_engine_region();
  const AllowableGrid grid = build_grid(r, Vec::Constant(2, 0.1));
  const StateGraph g = gen_graph(grid);
  const int start = *grid.locate(vec2(0.5, 1.0));
  const std::vector<int> order = bfs_traverse(g, start);
  EXPECT_EQ(order.size(), oracle::lattice_component_size(r, 0.1, vec2(0.5, 1.0)));
  EXPECT_EQ(order, bfs_traverse(g, start));
}

TEST(Bfs, RandomGridsMatchUnionFind) {
  const auto res = suites::bfs_suite();
  EXPECT_TRUE(res.passed()) << res.first_failure;
}

TEST(Sampling, InteriorAndDeterministic) {
  const RegionSpec r = jet_engine_region();
  const auto a = sample_interior(r, 200, 7);
  ASSERT_EQ(a.size(), 200u);
  for (const Vec& x : a) EXPECT_TRUE(contains(r, x));
  const auto b = sample_interior(r, 200, 7);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k], b[k]);
  const auto one = sample_interior(unit_square(), 1, 3);
  EXPECT_TRUE(unit_square().state_space.contains(one[0]));
  EXPECT_THROW(sample_interior(r, 0, 1), ContractViolation);
}

TEST(GrahamScan, SmallCases) {
  using P = Eigen::Vector2d;
  const auto square = graham_scan({P(0, 0), P(1, 0), P(1, 1), P(0, 1), P(0.5, 0.5)});
  ASSERT_EQ(square.size(), 4u);
  EXPECT_EQ(square[0], P(0, 0));
  EXPECT_EQ(square[1], P(1, 0));
  EXPECT_EQ(square[2], P(1, 1));
  EXPECT_EQ(square[3], P(0, 1));
  // Collinear boundary points are dropped.
  EXPECT_EQ(graham_scan({P(0, 0), P(0.5, 0), P(1, 0), P(0, 1)}).size(), 3u);
  EXPECT_THROW(graham_scan({P(0, 0), P(1, 1)}), DegenerateHull);
  EXPECT_THROW(graham_scan({P(0, 0), P(1, 1), P(2, 2)}), DegenerateHull);
}

TEST(GrahamScan, MatchesBruteForceHull) {
  const auto res = suites::hull_suite();
  EXPECT_TRUE(res.passed()) << res.first_failure;
}

TEST(GrahamScan, ConvexAndCoversLargeSets) {
  oracle::Rng rng(17);
  for (int s = 0; s < 20; ++s) {
    std::vector<Eigen::Vector2d> pts;
    for (int i = 0; i < 200; ++i) pts.emplace_back(oracle::uniform(rng, -3, 3), oracle::uniform(rng, -1, 1));
    const auto hull = graham_scan(pts);
    const Halfspaces hs = hull_to_halfspaces(hull);
    for (const auto& p : pts) EXPECT_GE((hs.A * p + hs.b).minCoeff(), -1e-9);
    for (std::size_t i = 0; i < hull.size(); ++i) {
      EXPECT_GT(oracle::orient(hull[i], hull[(i + 1) % hull.size()], hull[(i + 2) % hull.size()]), 0.0);
    }
  }
}

TEST(Halfspaces, SquareAndTriangle) {
  using P = Eigen::Vector2d;
  const Halfspaces sq = hull_to_halfspaces({P(0, 0), P(1, 0), P(1, 1), P(0, 1)});
  ASSERT_EQ(sq.A.rows(), 4);
  const Vec h = sq.A * vec2(0.5, 0.5) + sq.b;
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(h[i], 0.5, 1e-12);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(sq.A.row(i).norm(), 1.0, 1e-12);

  const Halfspaces tri = hull_to_halfspaces({P(0, 0), P(1, 0), P(0, 1)});
  for (const P& v : {P(0, 0), P(1, 0), P(0, 1)}) {
    const Vec hv = tri.A * v + tri.b;
    EXPECT_GE(hv.minCoeff(), -1e-12);
    EXPECT_EQ((hv.array().abs() < 1e-12).count(), 2);
  }
  EXPECT_THROW(hull_to_halfspaces({P(0, 0), P(1, 0)}), DegenerateHull);
}

TEST(Halfspaces, RoundTripOnProbeGrid) {
  oracle::Rng rng(23);
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < 30; ++i) pts.emplace_back(oracle::uniform(rng, 0, 1), oracle::uniform(rng, 0, 1));
  const auto hull = graham_scan(pts);
  const Halfspaces hs = hull_to_halfspaces(hull);
  // Winding test against the CCW vertex list.
  const auto inside_hull = [&](const Eigen::Vector2d& p) {
    for (std::size_t i = 0; i < hull.size(); ++i) {
      if (oracle::orient(hull[i], hull[(i + 1) % hull.size()], p) < -1e-12) return false;
    }
    return true;
  };
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j <= 100; ++j) {
      const Eigen::Vector2d p(0.01 * i, 0.01 * j);
      const double h = (hs.A * p + hs.b).minCoeff();
      if (std::abs(h) < 1e-9) continue;  // boundary band
      EXPECT_EQ(h > 0, inside_hull(p)) << p.transpose();
    }
  }
}

TEST(Clip, BoxAgainstHalfplane) {
  Mat A(1, 2);
  A << 1, 0;
  Vec b(1);
  b << -0.5;  // x >= 0.5
  const auto poly = clip_polygon(A, b, Box(vec2(0, 0), vec2(1, 1)));
  ASSERT_EQ(poly.size(), 4u);
  for (const auto& v : poly) EXPECT_GE(v.x(), 0.5 - 1e-12);
  b << -2.0;
  EXPECT_TRUE(clip_polygon(A, b, Box(vec2(0, 0), vec2(1, 1))).empty());
}

TEST(BoundingBox, FourRows) {
  const Halfspaces hs = bounding_box_halfspaces({vec2(0, 0), vec2(2, 1)});
  ASSERT_EQ(hs.A.rows(), 4);
  const Vec h = hs.A * vec2(1, 0.5) + hs.b;
  EXPECT_GT(h.minCoeff(), 0.0);
  EXPECT_NEAR((hs.A * vec2(2, 1) + hs.b).minCoeff(), 0.0, 1e-12);
}

}  // namespace
}  // namespace lcbf
