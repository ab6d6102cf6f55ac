#pragma once

// Validation studies built on the kinematics: closure angles, the
// perturbative expansion, segmented-vs-direct forward kinematics and the
// tip sensitivity to single-unit perturbations.

#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "scissor/kinematics.h"
#include "scissor/targets.h"

namespace scissor::analysis {

// ---- tip sensitivity ----

struct SensitivityProfile {
  int n_units = 0;
  double epsilon = 0.01;
  int n_samples = 1000;
  double psi = std::numbers::pi / 2;
  uint64_t seed = 0;
  // sigma[j - 1]: variance of the tip displacement when only alpha_j is
  // perturbed by delta ~ U[-epsilon, epsilon] about the straight chain.
  std::vector<double> sigma;
};

// Unit j draws from its own stream derived from (seed, j), so the profile
// does not depend on `threads` (0 = auto, capped by SCISSOR_THREADS).
SensitivityProfile sensitivity_profile(int n_units, double epsilon = 0.01,
                                       int n_samples = 1000,
                                       double psi = std::numbers::pi / 2,
                                       uint64_t seed = 0, int threads = 1);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// Normalized log profile: x_j = j / N and log(sigma_j / max sigma) over the
// interior units j = 2..N-1. The two end units turn the chain axis by only
// half their own rotation, so their variance sits off the interior trend.
struct NormalizedProfile {
  std::vector<double> x;
  std::vector<double> log_sigma;
};
NormalizedProfile normalize_profile(const SensitivityProfile& p);

// Largest |difference| between two normalized profiles over their common
// x range, comparing each point of one with the linear interpolant of the
// other, both ways.
double collapse_deviation(const NormalizedProfile& a, const NormalizedProfile& b);

// ---- closure ----

struct ClosureRow {
  double alpha = 0.0;
  int n_units = 0;
  double psi_theory = 0.0;    // NaN when flagged
  double psi_measured = 0.0;  // NaN when flagged
  bool flagged = false;
  std::string note;
};

// Root of the full-kinematics closure condition: the (N+1)-th unit, placed
// by intersecting pin-joint circles, has turned by exactly 2 pi relative to
// the first. Bisection to machine precision. Throws geometry::NoClosureError
// when no actuation angle closes the ring.
double measured_closure(double alpha, int n_units);

// One row per (alpha, N) pair, alpha-major. Rows without closure are
// flagged rather than thrown.
std::vector<ClosureRow> closure_experiment(const std::vector<double>& alphas,
                                           const std::vector<int>& n_units);

// ---- perturbative expansion ----

struct PerturbationRow {
  int unit = 0;  // 1-based
  Point full;
  Point perturbative;
  double error = 0.0;
};

struct PerturbationReport {
  double alpha0 = 0.0;
  double epsilon = 0.0;
  int n_units = 0;
  double psi = 0.0;
  double max_error = 0.0;
  double chain_length = 0.0;  // sum of center spacings of the full chain
  std::vector<PerturbationRow> rows;
};

// Node-wise distance between the first-order expansion and the exact
// chain for alpha_k = alpha0 + epsilon k.
PerturbationReport perturbation_validation(double alpha0, double epsilon, int n_units,
                                           double psi);

// Least-squares slope of log(max error) against log(epsilon).
double perturbation_slope(double alpha0, const std::vector<double>& epsilons,
                          int n_units, double psi);

// ---- forward kinematics equivalence ----

// Max over the tip of |tip_segmented - assembled chain tip| / l.
double segmented_fk_error(const kinematics::SectionedSpec& spec, double psi);

// ---- trajectory fit ----

struct TrajectoryFit {
  std::vector<Point> aligned;  // trajectory after the rigid motion
  double rotation = 0.0;
  Point translation;
  double max_deviation = 0.0;  // largest distance to the target polyline
  double rms_deviation = 0.0;
  double target_diameter = 0.0;  // largest pairwise distance on the target
};

// Rotation and translation (no scaling, no reflection) that best align the
// trajectory with the target in least squares, pairing points at equal
// fractions of arc length. Deviations are distances from each aligned
// trajectory point to the nearest point of the target polyline. For a
// closed target every cyclic shift of the pairing is tried.
TrajectoryFit fit_trajectory(const std::vector<Point>& trajectory,
                             const targets::TargetCurve& target);

}  // namespace scissor::analysis
