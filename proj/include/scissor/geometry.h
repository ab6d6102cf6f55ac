#pragma once

// Geometry of a single scissor unit: two members of length l crossed at a pin
// placed a fraction alpha along each, opened to internal angle phi.
//
// Sign convention: alpha > 0.5 bends the chain counterclockwise, which counts
// as positive curvature.

#include <numbers>
#include <stdexcept>
#include <utility>

#include "scissor/autodiff.h"
#include "scissor/vec2.h"

namespace scissor::geometry {

struct UnitGeometry {
  double alpha = 0.5;
  double l = 1.0;
};

struct UnitState {
  double phi = std::numbers::pi / 2;
};

struct CurvatureReport {
  double kappa_o = 0.0;
  double kappa_t = 0.0;
  double kappa_osc = 0.0;
  double width = 0.0;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NoClosureError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Queries with 0 < phi < kPhiMin are evaluated at kPhiMin.
inline constexpr double kPhiMin = 1e-6;

// Throws DomainError unless 0 < alpha < 1 and l > 0.
void Validate(const UnitGeometry& u);
// Throws DomainError unless 0 < phi < pi.
void Validate(const UnitState& s);

// ---- scalar-generic kernels (no validation) ----

// (2a - 1) / (2 a l (1 - a) sin(phi/2)).
template <typename T>
T effective_curvature(const T& alpha, const T& phi, const T& l) {
  return (2.0 * alpha - 1.0) /
         (2.0 * alpha * l * (1.0 - alpha) * ad::sin(0.5 * phi));
}

// 4 a l (1 - a) cos(phi/2).
template <typename T>
T unit_width(const T& alpha, const T& phi, const T& l) {
  return 4.0 * alpha * l * (1.0 - alpha) * ad::cos(0.5 * phi);
}

// 2 atan((2a - 1) tan((pi - phi)/2)), written with cot(phi/2).
template <typename T>
T unit_rotation_angle(const T& alpha, const T& phi) {
  const T h = 0.5 * phi;
  return 2.0 * ad::atan((2.0 * alpha - 1.0) * ad::cos(h) / ad::sin(h));
}

// ---- validated double API ----

double effective_curvature(const UnitGeometry& u, const UnitState& s);
double unit_width(const UnitGeometry& u, const UnitState& s);

// Face normals N_e and N_w for member orientations t1 = e^{i beta} and
// t2 = e^{i (beta + pi - phi)}.
std::pair<Point, Point> face_normals(const UnitGeometry& u, const UnitState& s,
                                     double beta);

// Turning curvature of a chain of identical units: the angle between
// successive center-to-center chords divided by the chord length.
double turning_curvature(const UnitGeometry& u, const UnitState& s);

// 1 / ((1 - alpha) l cot(phi/2)). Finite at alpha = 0.5.
double osculating_curvature(const UnitGeometry& u, const UnitState& s);

// Relative rotation between adjacent identical units.
double unit_rotation_angle(const UnitGeometry& u, const UnitState& s);

// Actuation angle at which n identical units close into a ring.
double closure_actuation(double alpha, int n_units);

CurvatureReport curvature_report(const UnitGeometry& u, const UnitState& s);

}  // namespace scissor::geometry
