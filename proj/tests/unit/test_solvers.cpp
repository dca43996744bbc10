#include <gtest/gtest.h>

#include <vector>

#include "lcbf/solvers.hpp"
#include "support/oracles.hpp"

namespace lcbf {
namespace {

Mat rows(std::initializer_list<std::initializer_list<double>> r) {
  Mat m(static_cast<int>(r.size()), static_cast<int>(r.begin()->size()));
  int i = 0;
  for (const auto& row : r) {
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

TEST(Lp, BoxCorner) {
  // min -x - y on the unit box
  const Mat G = rows({{1, 0}, {-1, 0}, {0, 1}, {0, -1}});
  const Vec h = vec({1, 0, 1, 0});
  const LpResult r = solve_lp(G, h, vec({-1, -1}));
  ASSERT_EQ(r.status, LpStatus::kOptimal);
  EXPECT_NEAR(r.x[0], 1.0, 1e-12);
  EXPECT_NEAR(r.x[1], 1.0, 1e-12);
  EXPECT_NEAR(r.objective, -2.0, 1e-12);
}

TEST(Lp, Infeasible) {
  const Mat G = rows({{1}, {-1}});
  const LpResult r = solve_lp(G, vec({-1, -1}), vec({1}));
  EXPECT_EQ(r.status, LpStatus::kInfeasible);
}

TEST(Lp, Unbounded) {
  const Mat G = rows({{-1}});
  const LpResult r = solve_lp(G, vec({0}), vec({-1}));
  EXPECT_EQ(r.status, LpStatus::kUnbounded);
}

TEST(Lp, RandomAgainstVertexEnumeration) {
  oracle::Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const int k = 4 + static_cast<int>(rng() % 8);
    Mat G(k + 4, 2);
    Vec h(k + 4);
    for (int i = 0; i < k; ++i) {
      const Vec a = oracle::unit_vec(rng, 2);
      G.row(i) = a.transpose();
      h[i] = oracle::uniform(rng, -0.2, 1.0);
    }
    G.bottomRows(4) = rows({{1, 0}, {-1, 0}, {0, 1}, {0, -1}});
    h.tail(4).setConstant(2.0);
    const Vec c = oracle::unit_vec(rng, 2);
    // Brute force: every pairwise intersection that satisfies all rows.
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < G.rows(); ++i) {
      for (int j = i + 1; j < G.rows(); ++j) {
        Eigen::Matrix2d M;
        M << G.row(i), G.row(j);
        if (std::abs(M.determinant()) < 1e-12) continue;
        const Eigen::Vector2d v = M.inverse() * Eigen::Vector2d(h[i], h[j]);
        if (((G * v - h).array() <= 1e-9).all()) best = std::min(best, c.dot(v));
      }
    }
    const LpResult r = solve_lp(G, h, c);
    if (std::isinf(best)) {
      EXPECT_EQ(r.status, LpStatus::kInfeasible) << "case " << t;
    } else {
      ASSERT_EQ(r.status, LpStatus::kOptimal) << "case " << t;
      EXPECT_NEAR(r.objective, best, 1e-8) << "case " << t;
      EXPECT_LE((G * r.x - h).maxCoeff(), 1e-9);
    }
  }
}

TEST(Lp, IncrementalMatchesFull) {
  oracle::Rng rng(37);
  for (int t = 0; t < 100; ++t) {
    const int n = 3;
    const int k = 60;
    Mat G(k + 2 * n, n);
    Vec h(k + 2 * n);
    for (int i = 0; i < k; ++i) {
      G.row(i) = oracle::unit_vec(rng, n).transpose();
      h[i] = oracle::uniform(rng, 0.1, 1.0);
    }
    std::vector<int> seed;
    for (int j = 0; j < n; ++j) {
      G.row(k + 2 * j) = Vec::Unit(n, j).transpose();
      G.row(k + 2 * j + 1) = -Vec::Unit(n, j).transpose();
      h[k + 2 * j] = h[k + 2 * j + 1] = 5.0;
      seed.push_back(k + 2 * j);
      seed.push_back(k + 2 * j + 1);
    }
    const Vec c = oracle::unit_vec(rng, n);
    const LpResult full = solve_lp(G, h, c);
    const LpResult inc = solve_lp_incremental(G, h, c, seed);
    ASSERT_EQ(full.status, inc.status);
    EXPECT_NEAR(full.objective, inc.objective, 1e-8);
  }
}

TEST(ProjectionQp, InteriorTargetReturnedExactly) {
  const Mat G = rows({{1, 0}, {0, 1}});
  const Vec target = vec({0.123456789, -0.5});
  const auto r = solve_projection_qp(G, vec({1, 1}), target);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->u, target);
  EXPECT_TRUE(r->active.empty());
}

TEST(ProjectionQp, ProjectsOntoHalfplane) {
  const Mat G = rows({{1, 1}});
  const auto r = solve_projection_qp(G, vec({0}), vec({1, 1}));
  ASSERT_TRUE(r);
  EXPECT_NEAR(r->u[0], 0.0, 1e-12);
  EXPECT_NEAR(r->u[1], 0.0, 1e-12);
  EXPECT_EQ(r->active, std::vector<int>{0});
}

TEST(ProjectionQp, InfeasibleIsEmpty) {
  const Mat G = rows({{1}, {-1}});
  EXPECT_FALSE(solve_projection_qp(G, vec({-1, -1}), vec({0})));
}

}  // namespace
}  // namespace lcbf
