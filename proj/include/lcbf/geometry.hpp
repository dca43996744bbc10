#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lcbf/types.hpp"

namespace lcbf {

/// Closed axis-aligned box [lower, upper].
struct Box {
  Vec lower;
  Vec upper;

  Box() = default;
  Box(Vec lo, Vec hi);

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vec& x) const;
  /// Box grown by `margin` on every side (shrunk when negative).
  Box inflated(double margin) const;
  bool intersects(const Box& other) const;
  std::optional<Box> intersection(const Box& other) const;
};

/// User-specified allowable set: the state-space box minus a union of closed
/// unsafe boxes.
struct RegionSpec {
  Box state_space;
  std::vector<Box> unsafe;

  /// Throws ContractViolation if an unsafe box misses the state space or has
  /// the wrong dimension.
  void validate() const;
  int dim() const { return state_space.dim(); }
};

bool contains(const RegionSpec& region, const Vec& x);

/// Equally spaced lattice points of the allowable set, anchored at the
/// state-space lower corner.
struct AllowableGrid {
  using Coord = std::vector<std::int64_t>;

  Vec origin;
  Vec resolution;
  std::vector<std::int64_t> extent;  // lattice points per axis
  std::vector<Vec> nodes;
  std::vector<Coord> coords;
  std::map<Coord, int> index;

  std::size_t size() const { return nodes.size(); }
  Vec lattice_point(const Coord& c) const;
  /// Node id of the lattice point nearest x, if that point is an allowable
  /// node and lies within half a cell of x on every axis.
  std::optional<int> locate(const Vec& x) const;
};

AllowableGrid build_grid(const RegionSpec& region, const Vec& resolution);

/// Undirected axis-neighbour graph over grid nodes.
struct StateGraph {
  std::vector<std::vector<int>> adjacency;

  std::size_t size() const { return adjacency.size(); }
  std::size_t edge_count() const;
};

StateGraph gen_graph(const AllowableGrid& grid);

/// Breadth-first order from `start`; neighbours are expanded in ascending id.
std::vector<int> bfs_traverse(const StateGraph& graph, int start);

/// M seeded uniform samples at least `margin` away from every region
/// boundary.
std::vector<Vec> sample_interior(const RegionSpec& region, int count,
                                 std::uint64_t seed, double margin = 1e-6);

/// Convex hull vertices, counter-clockwise from the lowest (then leftmost)
/// point. Collinear boundary points are dropped.
std::vector<Eigen::Vector2d> graham_scan(std::vector<Eigen::Vector2d> points);

struct Halfspaces {
  Mat A;  // rows are unit inward normals
  Vec b;  // A x + b >= 0 inside
};

Halfspaces hull_to_halfspaces(const std::vector<Eigen::Vector2d>& vertices);

/// Halfspaces of the axis-aligned bounding box of `points` (2n rows).
Halfspaces bounding_box_halfspaces(const std::vector<Vec>& points);

/// Vertices (CCW) of {x in box : A x + b >= 0} for 2-D problems, computed by
/// successive halfplane clipping. Empty if the intersection is empty.
std::vector<Eigen::Vector2d> clip_polygon(const Mat& A, const Vec& b,
                                          const Box& box);

}  // namespace lcbf
