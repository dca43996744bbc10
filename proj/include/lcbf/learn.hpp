#pragma once

#include <cstdint>
#include <vector>

#include "lcbf/cbf.hpp"
#include "lcbf/dynamics.hpp"
#include "lcbf/geometry.hpp"
#include "lcbf/types.hpp"

namespace lcbf {

struct SolverOptions {
  int max_rounds = 20;
  /// Alternation stops once a certified iterate changes the objective by less.
  double objective_tol = 1e-6;
  /// Rounds without a drop in total constraint slack before giving up.
  int stall_rounds = 4;
  /// Required barrier-condition margin, per unit norm of the constraint row.
  double margin = 1e-8;
  /// Every point of an excluded box must satisfy min_i h_i <= -separation.
  double separation = 1e-4;
  /// Gap between the state-space box and the excluded frame around it.
  double frame_gap = 1e-3;
  double frame_width = 0.05;
  /// Infinity-norm bound on the change of a row normal per round.
  double trust_region = 0.3;
  double slack_weight = 1e4;
  /// Lattice used to certify admissibility inside the candidate safe set;
  /// anchored at the state-space lower corner like the verification grid.
  double certify_resolution = 0.05;
  double edge_probe_spacing = 0.025;
  int threads = 1;
  /// Retry a failed hull-initialized solve from the incumbent CBF.
  bool retry_from_incumbent = true;
  /// Solve on every k-th visited node (and always on the last one).
  int solve_every = 1;
  /// Solve on every visited node up to this count regardless of solve_every.
  int dense_prefix = 0;
  /// Evaluation budget of the derivative-free normal search run when the
  /// alternation stalls infeasible; 0 disables it.
  int search_evals = 4000;
  /// Caps the search at search_work / (point count) evaluations.
  int search_work = 200000;
  int search_restarts = 20;
  /// Run every restart instead of stopping at the first certified candidate;
  /// the extra candidates are returned as alternatives.
  bool search_all_restarts = false;
  /// Initial simplex size of the normal search, in tangent coordinates.
  double search_step = 0.3;
  /// Seeds the restart directions; set from the run seed by make_problem.
  std::uint64_t search_seed = 0;
};

struct LearnProblem {
  ControlAffineSystem system;
  RegionSpec region;
  std::vector<Vec> samples;
  /// Nominal halfspace count. In 2-D the Graham-scan hull of the visited set
  /// fixes the count actually used by each solve.
  int L = 6;
  double alpha_gain = 1.0;
  SolverOptions options;

  /// Throws ContractViolation when a sample leaves the allowable set or L is
  /// too small for a bounded polytope.
  void validate() const;
};

struct LearnResult {
  PolytopicCbf cbf;
  /// States the solve was posed on: visited states followed by the interior
  /// samples inside their hull.
  std::vector<Vec> points;
  /// witnesses[k] is an admissible input at points[k].
  std::vector<Vec> witnesses;
  bool feasible = false;
  double objective = 0.0;
  long volume_score = 0;
  int rounds = 0;
  /// Other certified candidates met during the solve. iterative_learn scores
  /// them alongside cbf.
  std::vector<PolytopicCbf> alternatives;
};

/// Sum over samples of |A x + b|_1.
double objective(const PolytopicCbf& cbf, const std::vector<Vec>& samples);

/// Number of grid nodes inside the safe set.
long volume_score(const PolytopicCbf& cbf, const AllowableGrid& grid);

/// Alternating solve of the sampled barrier program posed on `visited` (plus
/// the interior samples inside their hull), warm-started from `init`.
/// volume_score is left at zero; the caller owns the scoring grid.
LearnResult solve_cbf_opt(const LearnProblem& problem, const std::vector<Vec>& visited,
                          const PolytopicCbf& init);

/// Polytope used to warm-start a solve on `visited`. In 2-D: the Graham-scan
/// hull, padded to `min_rows` rows by bisecting the widest gaps between
/// normals (evenly spread normals through the states when the hull is
/// degenerate); padded rows touch the states. Otherwise the bounding box.
PolytopicCbf initial_polytope(const std::vector<Vec>& visited, double alpha_gain,
                              int min_rows = 0);

/// Visited counts (1-based) after which a solve runs: every count up to
/// `dense_prefix`, then every `every`-th, and always the last.
std::vector<int> solve_schedule(int every, std::size_t visited_total, int dense_prefix = 0);

struct LearnLogEntry {
  int iteration = 0;
  int visited = 0;
  bool feasible = false;
  double objective = 0.0;
  long volume_score = 0;
  long best_volume_score = 0;
  bool from_incumbent = false;
};

struct LearnRun {
  LearnResult best;
  std::vector<LearnLogEntry> log;
};

/// Breadth-first growth of the visited set from `start`, solving on the
/// scheduled prefixes and keeping the feasible result with the largest
/// volume_score (then smaller objective, then earliest).
LearnRun iterative_learn(const LearnProblem& problem, const AllowableGrid& grid,
                         const StateGraph& graph, const Vec& start);

}  // namespace lcbf
