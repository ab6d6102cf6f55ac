#pragma once

// Forward kinematics of scissor chains.
//
// Pose convention. Unit j has center r_j, internal angle phi_j and an axis
// angle; its members point along t1 = e^{i(axis - phi/2)} and
// t2 = e^{i(axis + phi/2)}. The first unit is symmetric about the base angle
// beta0 (axis_1 = beta0, phi_1 = psi). Member 1 runs from r - (1-a) l t1 to
// r + a l t1 and member 2 from r - a l t2 to r + (1-a) l t2, so the
// a-ends pin to the next unit and centers obey
//   r_{j+1} = r_j + l (a_j t1_j + a_{j+1} t2_{j+1}).
// Axes advance by (rot_j + rot_{j+1}) / 2 with rot the unit rotation angle.
//
// The tip of a chain is the center of its last unit.

#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scissor/autodiff.h"
#include "scissor/geometry.h"
#include "scissor/vec2.h"

namespace scissor::kinematics {

// Arccos arguments may exceed [-1, 1] by this much before an assembly counts
// as infeasible.
inline constexpr double kArccosTolerance = 1e-9;

class InfeasibleAssembly : public std::runtime_error {
 public:
  InfeasibleAssembly(int unit, double excess);
  // Zero-based index of the first unit that cannot be assembled.
  int unit() const { return unit_; }
  // Amount by which the arccos argument left [-1, 1].
  double excess() const { return excess_; }

 private:
  int unit_;
  double excess_;
};

struct ChainSpec {
  std::vector<double> alphas;
  double l = 1.0;
  Point base_position{0.0, 0.0};
  double base_angle = 0.0;
};

struct ChainConfig {
  double psi = 0.0;
  std::vector<double> phis;
  std::vector<Point> centers;
  // Member orientation angles (t1, t2) per unit.
  std::vector<std::pair<double, double>> orientations;

  const Point& tip() const { return centers.back(); }
};

// Pin-joint positions of one unit.
struct UnitJoints {
  Point center;
  Point east_low;   // r + a l t1, shared with the next unit
  Point east_high;  // r + (1-a) l t2, shared with the next unit
  Point west_low;   // r - a l t2
  Point west_high;  // r - (1-a) l t1
};

struct Section {
  int n_units = 1;
  double alpha = 0.5;
};

// Piecewise-constant chain. base_direction is the radial unit vector p1 at
// the first unit; the chain initially heads along p1 turned a quarter turn
// counterclockwise.
struct SectionedSpec {
  std::vector<Section> sections;
  double l = 1.0;
  Point base_position{0.0, 0.0};
  Point base_direction{0.0, -1.0};

  int total_units() const;
  // Equivalent unit-by-unit chain.
  ChainSpec ToChainSpec() const;
};

// Radial direction p1 matching a chain heading of `base_angle`.
Point RadialForHeading(double base_angle);

struct TipTrajectory {
  std::vector<double> psi_grid;
  std::vector<Point> points;
};

// ---------------------------------------------------------------------------
// Scalar-generic kernels. These never throw on infeasibility; instead the
// amount by which arccos arguments overshoot is accumulated in `excess`
// (differentiable) and the first offending unit is reported.

template <typename T>
struct AngleKernelResult {
  std::vector<T> phis;
  T excess = T(0.0);
  int first_infeasible = -1;
  double first_excess = 0.0;
};

// Internal angle of unit j+1 from unit j by the law of cosines on the shared
// quadrilateral diagonal.
template <typename T>
T next_internal_angle(const T& a0, const T& phi0, const T& a1, T* arg_out) {
  const T d = a0 * a0 + (1.0 - a0) * (1.0 - a0) -
              2.0 * a0 * (1.0 - a0) * ad::cos(phi0);
  const T arg = (a1 * a1 + (1.0 - a1) * (1.0 - a1) - d) / (2.0 * a1 * (1.0 - a1));
  *arg_out = arg;
  return ad::acos_clamped(arg, kArccosTolerance);
}

template <typename T>
AngleKernelResult<T> propagate_angles_kernel(std::span<const T> alphas,
                                             const T& psi) {
  AngleKernelResult<T> out;
  out.phis.reserve(alphas.size());
  if (alphas.empty()) return out;
  out.phis.push_back(psi);
  for (size_t j = 0; j + 1 < alphas.size(); ++j) {
    T arg;
    T phi = next_internal_angle(alphas[j], out.phis[j], alphas[j + 1], &arg);
    const double v = ad::value_of(arg);
    double over = 0.0;
    if (v > 1.0 + kArccosTolerance) {
      out.excess = out.excess + (arg - 1.0);
      over = v - 1.0;
    } else if (v < -1.0 - kArccosTolerance) {
      out.excess = out.excess + (-1.0 - arg);
      over = -1.0 - v;
    }
    if (over > 0.0 && out.first_infeasible < 0) {
      out.first_infeasible = static_cast<int>(j + 1);
      out.first_excess = over;
    }
    // A fully folded unit has no finite curvature; hold it at the clamp so
    // downstream terms stay finite. Only infeasible chains get here.
    if (ad::value_of(phi) < geometry::kPhiMin) phi = T(geometry::kPhiMin);
    out.phis.push_back(phi);
  }
  return out;
}

template <typename T>
struct ChainKernelResult {
  std::vector<T> phis;
  std::vector<T> rotations;  // unit rotation angle per unit
  std::vector<T> axes;
  std::vector<Vec2<T>> centers;
  T excess = T(0.0);
  int first_infeasible = -1;
  double first_excess = 0.0;
};

template <typename T>
ChainKernelResult<T> assemble_chain_kernel(std::span<const T> alphas,
                                           const T& l, const Vec2<T>& base,
                                           const T& base_angle, const T& psi) {
  ChainKernelResult<T> out;
  AngleKernelResult<T> ang = propagate_angles_kernel(alphas, psi);
  out.excess = ang.excess;
  out.first_infeasible = ang.first_infeasible;
  out.first_excess = ang.first_excess;
  out.phis = std::move(ang.phis);
  const size_t n = alphas.size();
  out.rotations.reserve(n);
  for (size_t j = 0; j < n; ++j) {
    out.rotations.push_back(geometry::unit_rotation_angle(alphas[j], out.phis[j]));
  }
  out.axes.reserve(n);
  out.centers.reserve(n);
  if (n == 0) return out;
  out.axes.push_back(base_angle);
  out.centers.push_back(base);
  for (size_t j = 0; j + 1 < n; ++j) {
    out.axes.push_back(out.axes[j] + 0.5 * (out.rotations[j] + out.rotations[j + 1]));
    const Vec2<T> t1 = polar(out.axes[j] - 0.5 * out.phis[j]);
    const Vec2<T> t2 = polar(out.axes[j + 1] + 0.5 * out.phis[j + 1]);
    out.centers.push_back(out.centers[j] +
                          l * (alphas[j] * t1 + alphas[j + 1] * t2));
  }
  return out;
}

// Per-section constants of the closed-form tip: they depend on the aspect
// ratio and member length only, so a sweep computes them once.
template <typename T>
struct SectionConstants {
  T asym;       // 2 alpha - 1
  T inv_g;      // 1 / (alpha (1 - alpha))
  T rho_scale;  // 4 alpha (1 - alpha) l
  T half_l;     // l / 2
};

template <typename T>
SectionConstants<T> section_constants(const T& alpha, const T& l) {
  const T g = alpha * (1.0 - alpha);
  return {2.0 * alpha - 1.0, 1.0 / g, 4.0 * g * l, 0.5 * l};
}

// Per-section quantities at one actuation state, from c = cos(phi/2) and
// s = sin(phi/2). All expressions stay regular at alpha = 0.5, where the
// section is straight.
template <typename T>
struct SectionArc {
  T rotation;  // unit rotation angle
  T rho_rot;   // (radius of the center circle) * rotation
  T face_gap;  // face-midpoint radius minus center radius
};

template <typename T>
SectionArc<T> section_arc(const SectionConstants<T>& k, const T& c, const T& s) {
  const T x = k.asym * c / s;
  const T h = ad::atan(x);
  const T ac = ad::atanc(x);
  const T hh = 0.5 * h;
  SectionArc<T> arc;
  arc.rotation = 2.0 * h;
  arc.rho_rot = k.rho_scale * c * ac;
  arc.face_gap =
      k.half_l * (c * ad::sin(hh) * ac * ad::sinc(hh) / ad::cos(h) + k.asym * s);
  return arc;
}

// Moves a point at radius rho, radial direction p = polar(theta), around its
// center of curvature by m unit rotations.
template <typename T>
void advance_on_arc(const SectionArc<T>& arc, double m, const Vec2<T>& p,
                    Vec2<T>* point, T* theta) {
  const T omega = m * arc.rotation;
  const T half = 0.5 * omega;
  *point = *point + (m * arc.rho_rot) *
                        (ad::sinc(omega) * perp(p) - ad::sin(half) * ad::sinc(half) * p);
  *theta = *theta + omega;
}

template <typename T>
struct SegmentedTipResult {
  Vec2<T> tip;
  std::vector<T> phis;  // internal angle per section
  T excess = T(0.0);
  int first_infeasible = -1;  // section index
  double first_excess = 0.0;
};

// A sectioned chain prepared for repeated tip evaluation.
template <typename T>
struct SegmentedChain {
  std::span<const int> counts;
  std::vector<SectionConstants<T>> sections;
  T g_first;  // alpha (1 - alpha) of the first section
  Vec2<T> base;
  T theta0;  // angle of the radial direction p1
};

template <typename T>
SegmentedChain<T> make_segmented_chain(std::span<const int> counts,
                                       std::span<const T> alphas, const T& l,
                                       const Vec2<T>& base, const Vec2<T>& radial) {
  SegmentedChain<T> chain;
  chain.counts = counts;
  chain.sections.reserve(alphas.size());
  for (const T& a : alphas) chain.sections.push_back(section_constants(a, l));
  chain.g_first = alphas[0] * (1.0 - alphas[0]);
  chain.base = base;
  chain.theta0 = ad::atan2(radial.y, radial.x);
  return chain;
}

// Closed-form tip. Within a section the unit centers lie on a circle about
// the section's center of curvature; the walk carries the point on that
// circle from unit 1 to each section interface face, hops to the next
// section's circle along the shared radial line (the center shift), and
// ends at the last unit's center. Internal angles come from the conserved
// quantity alpha (1 - alpha) cos^2(phi / 2).
template <typename T>
SegmentedTipResult<T> segmented_tip_at(const SegmentedChain<T>& chain, const T& psi) {
  SegmentedTipResult<T> out;
  const size_t sections = chain.sections.size();
  const T c_first = ad::cos(0.5 * psi);
  const T conserved = chain.g_first * c_first * c_first;
  Vec2<T> point = chain.base;
  T theta = chain.theta0;
  Vec2<T> p = polar(theta);
  out.phis.reserve(sections);
  for (size_t j = 0; j < sections; ++j) {
    const SectionConstants<T>& k = chain.sections[j];
    T c, s, phi;
    if (j == 0) {
      c = c_first;
      s = ad::sin(0.5 * psi);
      phi = psi;
    } else {
      const T c2 = conserved * k.inv_g;
      const double over = 2.0 * (ad::value_of(c2) - 1.0);
      if (over > kArccosTolerance) {
        out.excess = out.excess + 2.0 * (c2 - 1.0);
        if (out.first_infeasible < 0) {
          out.first_infeasible = static_cast<int>(j);
          out.first_excess = over;
        }
      }
      if (ad::value_of(c2) >= std::cos(0.5 * geometry::kPhiMin) *
                                  std::cos(0.5 * geometry::kPhiMin)) {
        // A fully folded unit has no finite curvature; hold it at the clamp
        // so downstream terms stay finite. Only infeasible chains get here.
        c = T(std::cos(0.5 * geometry::kPhiMin));
        s = T(std::sin(0.5 * geometry::kPhiMin));
        phi = T(geometry::kPhiMin);
      } else {
        c = ad::sqrt(c2);
        const T half = ad::acos(c);
        s = ad::sin(half);
        phi = 2.0 * half;
      }
    }
    out.phis.push_back(phi);
    const double n = chain.counts[j];
    double m;
    if (sections == 1) {
      m = n - 1.0;
    } else if (j == 0 || j + 1 == sections) {
      m = n - 0.5;
    } else {
      m = n;
    }
    try {
      const SectionArc<T> arc = section_arc(k, c, s);
      if (j > 0) point = point - arc.face_gap * p;
      advance_on_arc(arc, m, p, &point, &theta);
      p = polar(theta);
      if (j + 1 < sections) point = point + arc.face_gap * p;
    } catch (const ad::NanError& e) {
      throw ad::NanError("section " + std::to_string(j + 1) + ": " + e.what());
    }
  }
  out.tip = point;
  return out;
}

template <typename T>
SegmentedTipResult<T> segmented_tip_kernel(std::span<const int> counts,
                                           std::span<const T> alphas,
                                           const T& l, const Vec2<T>& base,
                                           const Vec2<T>& radial,
                                           const T& psi) {
  return segmented_tip_at(make_segmented_chain(counts, alphas, l, base, radial), psi);
}

// ---------------------------------------------------------------------------
// Validated double API.

// Internal angles phi_1 = psi, phi_2, ..., phi_N. Throws InfeasibleAssembly.
std::vector<double> propagate_angles(const std::vector<double>& alphas,
                                     double psi);

// Full configuration by the angle recursion. Throws InfeasibleAssembly.
ChainConfig assemble_chain(const ChainSpec& spec, double psi);

// Independent construction: each next center is placed by intersecting the
// two circles fixed by the previous unit's pin joints, without using the
// rotation-angle formula. Throws InfeasibleAssembly.
ChainConfig assemble_by_joints(const ChainSpec& spec, double psi);

// The four pin joints and center of every unit in `config`.
std::vector<UnitJoints> unit_joints(const ChainSpec& spec,
                                    const ChainConfig& config);

// Distance from the center of curvature to the shared face midpoint,
// signed like the curvature. Infinite for alpha = 0.5.
double face_radius(double alpha, double phi, double l = 1.0);

// Translation of the center of curvature across an interface from a section
// with ratio alpha_j at internal angle psi to one with ratio alpha_j1, along
// the interface's radial direction. Zero for equal ratios; throws
// geometry::DomainError when one side is straight and the other is not.
double center_shift(double alpha_j, double alpha_j1, double psi, double l = 1.0);

// Closed-form tip. Throws InfeasibleAssembly.
Point tip_segmented(const SectionedSpec& spec, double psi);

// Tip at n_samples uniformly spaced actuation angles from psi_start to
// psi_end (either order). Errors name the offending sample.
TipTrajectory sweep_tip(const SectionedSpec& spec, double psi_start,
                        double psi_end, int n_samples);

// First-order expansion for the linear profile alpha_k = alpha0 + epsilon k,
// k = 0..n_units-1, about the uniform chain. Base at the origin, heading 0.
// Accurate while |epsilon| n_units is small (about 0.1 or less).
ChainConfig perturbative_config(double alpha0, double epsilon, int n_units,
                                double psi);

// Coefficients of the expansion: phi_k = psi + k eps Lambda and
// rot_k = rot_0 + k eps mu.
struct PerturbationCoefficients {
  double lambda = 0.0;
  double Lambda = 0.0;
  double mu = 0.0;
  double rot0 = 0.0;
};
PerturbationCoefficients perturbation_coefficients(double alpha0, double psi);

}  // namespace scissor::kinematics
