#pragma once

// Target curves: ingestion, normalization, arc-length resampling and signed
// curvature profiles. Counterclockwise traversal has positive curvature.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "scissor/vec2.h"

namespace scissor::targets {

class TargetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TargetCurve {
  std::vector<Point> points;
  // Closed curves join the last point back to the first; the first point is
  // not repeated at the end.
  bool closed = false;
};

struct ArcLengthProfile {
  // m + 1 uniform arc-length values from 0 to total_length.
  std::vector<double> s_grid;
  // Signed curvature per grid point (empty until filled).
  std::vector<double> kappa;
  // Curve points at the grid values. For closed curves nodes.back() equals
  // nodes.front().
  std::vector<Point> nodes;
  double total_length = 0.0;
  double initial_tangent = 0.0;
  bool closed = false;

  double spacing() const { return total_length / (s_grid.size() - 1); }
};

// Throws TargetError unless the curve has at least 4 points and no two
// consecutive points coincide.
void Validate(const TargetCurve& curve);

// Scales isotropically and translates so the larger extent spans [0, 1] and
// the curve is centered in the unit box.
TargetCurve normalize_bbox(const TargetCurve& curve);

// Cubic spline through the points on the cumulative chord-length parameter
// (natural for open curves, periodic for closed ones), resampled at m + 1
// points equally spaced in the spline's arc length. kappa is left empty.
ArcLengthProfile arclength_parameterize(const TargetCurve& curve, int m);

// Default smoothing bandwidth for a profile: twice the grid spacing.
double default_smoothing(const ArcLengthProfile& profile);

// Signed curvature at every node by central differences on the uniform grid
// (wrapped for closed curves, one-sided second-order stencils at the ends of
// open ones), then convolved with a Gaussian of standard deviation
// `smoothing` in arc length. smoothing <= 0 disables the filter.
std::vector<double> curvature_profile(const ArcLengthProfile& profile,
                                      double smoothing);

// arclength_parameterize followed by curvature_profile. A negative
// smoothing selects default_smoothing.
ArcLengthProfile build_profile(const TargetCurve& curve, int m,
                               double smoothing = -1.0);

using Params = std::map<std::string, double>;

// Densely sampled analytic family:
//   line    L (1)                       straight segment along +x
//   circle  R (1)                       closed, counterclockwise, starts at
//                                       the bottom heading +x
//   spiral  c (1), L (3)                curvature c s for s in [0, L]
//   sine    k (3), waves (1), L (3)     curvature k sin(2 pi waves s / L)
//   flower3 a (1)                       closed rose r = a cos(3 theta)
// Every family accepts n, the number of samples (default 2000).
// Throws TargetError for unknown names or parameters.
TargetCurve analytic_target(const std::string& name, const Params& params = {});

// Names accepted by analytic_target.
std::vector<std::string> analytic_names();

// Point list from a file: CSV with x,y per line (an optional header row is
// detected and skipped) or a JSON array of [x, y] pairs (also accepted as
// {"points": [...], "closed": bool}). A CSV curve is closed when its last
// point repeats the first, in which case the repeat is dropped.
TargetCurve load_points(const std::string& path);

// "name" or "name:key=value,key=value" for analytic targets, otherwise a
// file path handled by load_points.
TargetCurve parse_target(const std::string& spec);

// True if `spec` names an analytic target rather than a file.
bool is_analytic(const std::string& spec);

}  // namespace scissor::targets
