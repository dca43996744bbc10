#include "lcbf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <sstream>

#include "lcbf/errors.hpp"

namespace lcbf {
namespace {

double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a,
             const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

Box::Box(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) {
    throw ContractViolation("Box: lower and upper have different dimensions");
  }
  for (int i = 0; i < lower.size(); ++i) {
    if (!(lower[i] <= upper[i])) {
      std::ostringstream msg;
      msg << "Box: lower[" << i << "] = " << lower[i] << " exceeds upper["
          << i << "] = " << upper[i];
      throw ContractViolation(msg.str());
    }
  }
}

bool Box::contains(const Vec& x) const {
  if (x.size() != lower.size()) return false;
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] || x[i] > upper[i]) return false;
  }
  return true;
}

Box Box::inflated(double margin) const {
  Box out;
  out.lower = lower.array() - margin;
  out.upper = upper.array() + margin;
  return out;
}

bool Box::intersects(const Box& other) const {
  for (int i = 0; i < dim(); ++i) {
    if (other.upper[i] < lower[i] || other.lower[i] > upper[i]) return false;
  }
  return true;
}

std::optional<Box> Box::intersection(const Box& other) const {
  if (!intersects(other)) return std::nullopt;
  return Box(lower.cwiseMax(other.lower), upper.cwiseMin(other.upper));
}

void RegionSpec::validate() const {
  if (state_space.dim() == 0) {
    throw ContractViolation("RegionSpec: empty state space");
  }
  for (std::size_t k = 0; k < unsafe.size(); ++k) {
    if (unsafe[k].dim() != state_space.dim()) {
      throw ContractViolation("RegionSpec: unsafe box " + std::to_string(k) +
                              " has the wrong dimension");
    }
    if (!state_space.intersects(unsafe[k])) {
      throw ContractViolation("RegionSpec: unsafe box " + std::to_string(k) +
                              " does not intersect the state space");
    }
  }
}

bool contains(const RegionSpec& region, const Vec& x) {
  if (!region.state_space.contains(x)) return false;
  for (const Box& u : region.unsafe) {
    if (u.contains(x)) return false;
  }
  return true;
}

Vec AllowableGrid::lattice_point(const Coord& c) const {
  Vec x(origin.size());
  for (int j = 0; j < x.size(); ++j) {
    x[j] = origin[j] + static_cast<double>(c[j]) * resolution[j];
  }
  return x;
}

std::optional<int> AllowableGrid::locate(const Vec& x) const {
  if (x.size() != origin.size()) return std::nullopt;
  Coord c(x.size());
  for (int j = 0; j < x.size(); ++j) {
    c[j] = std::llround((x[j] - origin[j]) / resolution[j]);
  }
  const auto it = index.find(c);
  if (it == index.end()) return std::nullopt;
  const Vec& p = nodes[it->second];
  for (int j = 0; j < x.size(); ++j) {
    if (std::abs(p[j] - x[j]) > 0.5 * resolution[j]) return std::nullopt;
  }
  return it->second;
}

AllowableGrid build_grid(const RegionSpec& region, const Vec& resolution) {
  region.validate();
  const int n = region.dim();
  if (resolution.size() != n) {
    throw ContractViolation("build_grid: resolution dimension mismatch");
  }
  for (int j = 0; j < n; ++j) {
    if (!(resolution[j] > 0.0)) {
      throw ContractViolation("build_grid: resolution must be positive");
    }
  }

  AllowableGrid grid;
  grid.origin = region.state_space.lower;
  grid.resolution = resolution;
  grid.extent.resize(n);
  for (int j = 0; j < n; ++j) {
    const double span = region.state_space.upper[j] - region.state_space.lower[j];
    grid.extent[j] =
        static_cast<std::int64_t>(std::floor(span / resolution[j] + 1e-9)) + 1;
  }

  // Odometer over the lattice, first axis slowest.
  AllowableGrid::Coord c(n, 0);
  while (true) {
    Vec x = grid.lattice_point(c);
    if (contains(region, x)) {
      grid.index.emplace(c, static_cast<int>(grid.nodes.size()));
      grid.nodes.push_back(std::move(x));
      grid.coords.push_back(c);
    }
    int axis = n - 1;
    while (axis >= 0 && ++c[axis] == grid.extent[axis]) {
      c[axis] = 0;
      --axis;
    }
    if (axis < 0) break;
  }
  if (grid.nodes.empty()) {
    throw DegenerateRegion("build_grid: no lattice point lies in the allowable set");
  }
  return grid;
}

std::size_t StateGraph::edge_count() const {
  std::size_t degree_sum = 0;
  for (const auto& nbrs : adjacency) degree_sum += nbrs.size();
  return degree_sum / 2;
}

StateGraph gen_graph(const AllowableGrid& grid) {
  StateGraph graph;
  graph.adjacency.resize(grid.size());
  const std::size_t n = grid.origin.size();
  for (std::size_t id = 0; id < grid.size(); ++id) {
    AllowableGrid::Coord c = grid.coords[id];
    auto& nbrs = graph.adjacency[id];
    for (std::size_t j = 0; j < n; ++j) {
      for (int step : {-1, 1}) {
        c[j] += step;
        const auto it = grid.index.find(c);
        if (it != grid.index.end()) nbrs.push_back(it->second);
        c[j] -= step;
      }
    }
    std::sort(nbrs.begin(), nbrs.end());
  }
  return graph;
}

std::vector<int> bfs_traverse(const StateGraph& graph, int start) {
  if (start < 0 || static_cast<std::size_t>(start) >= graph.size()) {
    throw ContractViolation("bfs_traverse: start node " + std::to_string(start) +
                            " is not in the graph");
  }
  std::vector<char> seen(graph.size(), 0);
  std::vector<int> order;
  std::deque<int> queue{start};
  seen[start] = 1;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    order.push_back(v);
    for (int w : graph.adjacency[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        queue.push_back(w);
      }
    }
  }
  return order;
}

std::vector<Vec> sample_interior(const RegionSpec& region, int count,
                                 std::uint64_t seed, double margin) {
  if (count < 1) throw ContractViolation("sample_interior: count must be >= 1");
  region.validate();
  const Box inner = region.state_space.inflated(-margin);
  for (int j = 0; j < inner.dim(); ++j) {
    if (inner.lower[j] > inner.upper[j]) {
      throw DegenerateRegion("sample_interior: state space thinner than the margin");
    }
  }
  std::vector<Box> keep_out;
  keep_out.reserve(region.unsafe.size());
  for (const Box& u : region.unsafe) keep_out.push_back(u.inflated(margin));

  std::mt19937_64 rng(seed);
  std::vector<std::uniform_real_distribution<double>> axis;
  for (int j = 0; j < inner.dim(); ++j) {
    axis.emplace_back(inner.lower[j], inner.upper[j]);
  }
  std::vector<Vec> out;
  out.reserve(count);
  const double max_draws = 1e6 * static_cast<double>(count);
  double draws = 0;
  Vec x(inner.dim());
  while (static_cast<int>(out.size()) < count) {
    if (draws++ >= max_draws) {
      throw DegenerateRegion("sample_interior: rejection sampling exhausted");
    }
    for (int j = 0; j < x.size(); ++j) x[j] = axis[j](rng);
    bool ok = true;
    for (const Box& u : keep_out) {
      if (u.contains(x)) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(x);
  }
  return out;
}

std::vector<Eigen::Vector2d> graham_scan(std::vector<Eigen::Vector2d> points) {
  std::sort(points.begin(), points.end(),
            [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
              return a.y() < b.y() || (a.y() == b.y() && a.x() < b.x());
            });
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < 3) {
    throw DegenerateHull("graham_scan: need at least 3 distinct points");
  }

  // Grid coordinates are inexact, so orientation uses a tolerance scaled by
  // the squared extent of the point set.
  double extent = 0.0;
  for (const auto& p : points) extent = std::max(extent, (p - points.front()).norm());
  const double eps = 1e-10 * extent * extent;

  const Eigen::Vector2d pivot = points.front();
  std::sort(points.begin() + 1, points.end(),
            [&pivot, eps](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
              const double c = cross(pivot, a, b);
              if (std::abs(c) > eps) return c > 0.0;
              return (a - pivot).squaredNorm() < (b - pivot).squaredNorm();
            });
  // Points on the final ray are visited farthest-first so the closing edge
  // drops the nearer ones.
  std::size_t tail = points.size() - 1;
  while (tail > 1 && std::abs(cross(pivot, points[tail - 1], points.back())) <= eps) --tail;
  std::reverse(points.begin() + static_cast<std::ptrdiff_t>(tail), points.end());

  std::vector<Eigen::Vector2d> hull;
  for (const auto& p : points) {
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), p) <= eps) {
      hull.pop_back();
    }
    hull.push_back(p);
  }
  while (hull.size() >= 3 && cross(hull[hull.size() - 2], hull.back(), hull.front()) <= eps) {
    hull.pop_back();
  }
  if (hull.size() < 3) {
    throw DegenerateHull("graham_scan: all points are collinear");
  }
  return hull;
}

Halfspaces hull_to_halfspaces(const std::vector<Eigen::Vector2d>& vertices) {
  const std::size_t count = vertices.size();
  if (count < 3) throw DegenerateHull("hull_to_halfspaces: need at least 3 vertices");
  Halfspaces out{Mat(count, 2), Vec(count)};
  for (std::size_t i = 0; i < count; ++i) {
    const Eigen::Vector2d& p = vertices[i];
    const Eigen::Vector2d edge = vertices[(i + 1) % count] - p;
    const double len = edge.norm();
    if (!(len > 1e-12)) throw DegenerateHull("hull_to_halfspaces: zero-length edge");
    const Eigen::Vector2d normal(-edge.y() / len, edge.x() / len);
    out.A.row(static_cast<int>(i)) = normal.transpose();
    out.b[static_cast<int>(i)] = -normal.dot(p);
  }
  return out;
}

Halfspaces bounding_box_halfspaces(const std::vector<Vec>& points) {
  if (points.empty()) throw ContractViolation("bounding_box_halfspaces: no points");
  const int n = static_cast<int>(points.front().size());
  Vec lo = points.front();
  Vec hi = points.front();
  for (const Vec& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Halfspaces out{Mat::Zero(2 * n, n), Vec(2 * n)};
  for (int j = 0; j < n; ++j) {
    out.A(2 * j, j) = 1.0;
    out.b[2 * j] = -lo[j];
    out.A(2 * j + 1, j) = -1.0;
    out.b[2 * j + 1] = hi[j];
  }
  return out;
}

std::vector<Eigen::Vector2d> clip_polygon(const Mat& A, const Vec& b,
                                          const Box& box) {
  if (A.cols() != 2 || box.dim() != 2) {
    throw ContractViolation("clip_polygon: only defined in two dimensions");
  }
  std::vector<Eigen::Vector2d> poly = {
      {box.lower[0], box.lower[1]},
      {box.upper[0], box.lower[1]},
      {box.upper[0], box.upper[1]},
      {box.lower[0], box.upper[1]}};
  for (int i = 0; i < A.rows() && !poly.empty(); ++i) {
    const Eigen::Vector2d a = A.row(i).transpose();
    const double beta = b[i];
    std::vector<Eigen::Vector2d> next;
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Eigen::Vector2d& p = poly[k];
      const Eigen::Vector2d& q = poly[(k + 1) % poly.size()];
      const double hp = a.dot(p) + beta;
      const double hq = a.dot(q) + beta;
      if (hp >= 0.0) next.push_back(p);
      if ((hp >= 0.0) != (hq >= 0.0)) {
        const double t = hp / (hp - hq);
        next.push_back(p + t * (q - p));
      }
    }
    std::vector<Eigen::Vector2d> dedup;
    for (const auto& p : next) {
      if (dedup.empty() || (p - dedup.back()).norm() > 1e-12) dedup.push_back(p);
    }
    while (dedup.size() > 1 && (dedup.front() - dedup.back()).norm() <= 1e-12) {
      dedup.pop_back();
    }
    poly = std::move(dedup);
  }
  return poly;
}

}  // namespace lcbf
