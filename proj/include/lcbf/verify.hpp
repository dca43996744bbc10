#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "lcbf/cbf.hpp"
#include "lcbf/dynamics.hpp"
#include "lcbf/geometry.hpp"

namespace lcbf {

struct InvarianceTrial {
  Vec x0;
  int facet = 0;  // facet the adversarial nominal pushes against
  double penetration = 0.0;  // max over time of max(0, -min_i h_i)
  bool exited = false;
  bool fallback = false;  // the filter ever had to fall back
};

struct VerifyOptions {
  double resolution = 0.05;
  double admissibility_tol = 1e-6;
  int trials = 100;
  double horizon = 10.0;
  double dt = 0.01;
  double penetration_tol = 1e-2;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct VerificationReport {
  VerifyOptions options;
  std::vector<Vec> containment_violations;
  std::vector<Vec> admissibility_failures;
  std::vector<InvarianceTrial> invariance_trials;
  long probes_in_safe_set = 0;

  bool containment_passed() const { return containment_violations.empty(); }
  bool admissibility_passed() const { return admissibility_failures.empty(); }
  bool invariance_passed() const;
  bool passed() const;
};

/// Lattice points of the state-space box (anchored at its lower corner) that
/// lie in the safe set but not in the allowable set.
std::vector<Vec> check_containment(const PolytopicCbf& cbf, const RegionSpec& region,
                                   double resolution);

/// Lattice points of the state-space box in the safe set with no admissible
/// input at tolerance `tol`.
std::vector<Vec> check_admissibility(const PolytopicCbf& cbf,
                                     const ControlAffineSystem& system,
                                     const RegionSpec& region, double resolution,
                                     double tol = 1e-6, int threads = 1);

/// Closed-loop trials from seeded uniform starts in the safe set, each under
/// the safety filter wrapped around a nominal input that pushes against one
/// facet (facets taken in rotation). Empty when the safe set has no
/// allowable point.
std::vector<InvarianceTrial> check_invariance(const PolytopicCbf& cbf,
                                              const ControlAffineSystem& system,
                                              const RegionSpec& region,
                                              const VerifyOptions& options);

VerificationReport verify_cbf(const PolytopicCbf& cbf, const ControlAffineSystem& system,
                              const RegionSpec& region, const VerifyOptions& options);

nlohmann::json report_to_json(const VerificationReport& report);

}  // namespace lcbf
