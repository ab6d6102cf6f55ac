#include "scissor/geometry.h"

#include <cmath>
#include <sstream>

namespace scissor::geometry {
namespace {

constexpr double kPi = std::numbers::pi;

double ClampedPhi(const UnitState& s) { return std::max(s.phi, kPhiMin); }

}  // namespace

void Validate(const UnitGeometry& u) {
  if (!(u.alpha > 0.0 && u.alpha < 1.0)) {
    std::ostringstream msg;
    msg << "aspect ratio must lie in (0, 1), got " << u.alpha;
    throw DomainError(msg.str());
  }
  if (!(u.l > 0.0) || !std::isfinite(u.l)) {
    std::ostringstream msg;
    msg << "member length must be positive, got " << u.l;
    throw DomainError(msg.str());
  }
}

void Validate(const UnitState& s) {
  if (!(s.phi > 0.0 && s.phi < kPi)) {
    std::ostringstream msg;
    msg << "internal angle must lie in (0, pi), got " << s.phi;
    throw DomainError(msg.str());
  }
}

double effective_curvature(const UnitGeometry& u, const UnitState& s) {
  Validate(u);
  Validate(s);
  return effective_curvature(u.alpha, ClampedPhi(s), u.l);
}

double unit_width(const UnitGeometry& u, const UnitState& s) {
  Validate(u);
  // phi = pi is a legal fully open state for the width.
  if (!(s.phi > 0.0 && s.phi <= kPi)) Validate(s);
  return unit_width(u.alpha, s.phi, u.l);
}

std::pair<Point, Point> face_normals(const UnitGeometry& u, const UnitState& s,
                                     double beta) {
  Validate(u);
  Validate(s);
  const Point t1 = polar(beta);
  const Point t2 = polar(beta + kPi - s.phi);
  const Point n_e = (u.alpha * u.l) * t1 + ((1.0 - u.alpha) * u.l) * t2;
  const Point n_w = ((1.0 - u.alpha) * u.l) * t1 + (u.alpha * u.l) * t2;
  return {n_e, n_w};
}

double turning_curvature(const UnitGeometry& u, const UnitState& s) {
  Validate(u);
  Validate(s);
  const double phi = ClampedPhi(s);
  const double rot = unit_rotation_angle(u.alpha, phi);
  const double chord = unit_width(u.alpha, phi, u.l) * std::cos(0.5 * rot);
  return rot / chord;
}

double osculating_curvature(const UnitGeometry& u, const UnitState& s) {
  Validate(u);
  Validate(s);
  const double phi = ClampedPhi(s);
  return std::tan(0.5 * phi) / ((1.0 - u.alpha) * u.l);
}

double unit_rotation_angle(const UnitGeometry& u, const UnitState& s) {
  Validate(u);
  Validate(s);
  return unit_rotation_angle(u.alpha, ClampedPhi(s));
}

double closure_actuation(double alpha, int n_units) {
  Validate(UnitGeometry{alpha, 1.0});
  if (n_units < 3) {
    throw DomainError("closure needs at least 3 units");
  }
  const double arg = (2.0 * alpha - 1.0) / std::tan(kPi / n_units);
  if (!(arg > 0.0)) {
    std::ostringstream msg;
    msg << "no closure for alpha = " << alpha << " with " << n_units
        << " units";
    throw NoClosureError(msg.str());
  }
  return 2.0 * std::atan(arg);
}

CurvatureReport curvature_report(const UnitGeometry& u, const UnitState& s) {
  CurvatureReport r;
  r.kappa_o = effective_curvature(u, s);
  r.kappa_t = turning_curvature(u, s);
  r.kappa_osc = osculating_curvature(u, s);
  r.width = unit_width(u, s);
  return r;
}

}  // namespace scissor::geometry
