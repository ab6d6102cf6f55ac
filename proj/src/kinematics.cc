#include "scissor/kinematics.h"

#include <cmath>
#include <limits>
#include <sstream>

namespace scissor::kinematics {
namespace {

constexpr double kPi = std::numbers::pi;

void ValidateAlphas(const std::vector<double>& alphas) {
  if (alphas.empty()) throw geometry::DomainError("chain needs at least one unit");
  for (double a : alphas) geometry::Validate(geometry::UnitGeometry{a, 1.0});
}

void ValidatePsi(double psi) { geometry::Validate(geometry::UnitState{psi}); }

void ValidateLength(double l) {
  if (!(l > 0.0) || !std::isfinite(l)) {
    throw geometry::DomainError("member length must be positive");
  }
}

std::string ExcessMessage(int unit, double excess) {
  std::ostringstream msg;
  msg << "assembly infeasible at unit " << unit << " (arccos argument off by "
      << excess << ")";
  return msg.str();
}

}  // namespace

InfeasibleAssembly::InfeasibleAssembly(int unit, double excess)
    : std::runtime_error(ExcessMessage(unit, excess)),
      unit_(unit),
      excess_(excess) {}

int SectionedSpec::total_units() const {
  int n = 0;
  for (const Section& s : sections) n += s.n_units;
  return n;
}

ChainSpec SectionedSpec::ToChainSpec() const {
  ChainSpec spec;
  for (const Section& s : sections) {
    spec.alphas.insert(spec.alphas.end(), s.n_units, s.alpha);
  }
  spec.l = l;
  spec.base_position = base_position;
  // heading = radial turned a quarter turn counterclockwise
  spec.base_angle = std::atan2(base_direction.x, -base_direction.y);
  return spec;
}

Point RadialForHeading(double base_angle) {
  return {std::sin(base_angle), -std::cos(base_angle)};
}

std::vector<double> propagate_angles(const std::vector<double>& alphas,
                                     double psi) {
  ValidateAlphas(alphas);
  ValidatePsi(psi);
  AngleKernelResult<double> r =
      propagate_angles_kernel(std::span<const double>(alphas), psi);
  if (r.first_infeasible >= 0) {
    throw InfeasibleAssembly(r.first_infeasible, r.first_excess);
  }
  return r.phis;
}

ChainConfig assemble_chain(const ChainSpec& spec, double psi) {
  ValidateAlphas(spec.alphas);
  ValidatePsi(psi);
  ValidateLength(spec.l);
  ChainKernelResult<double> r = assemble_chain_kernel(
      std::span<const double>(spec.alphas), spec.l, spec.base_position,
      spec.base_angle, psi);
  if (r.first_infeasible >= 0) {
    throw InfeasibleAssembly(r.first_infeasible, r.first_excess);
  }
  ChainConfig config;
  config.psi = psi;
  config.phis = r.phis;
  config.centers = r.centers;
  config.orientations.reserve(r.axes.size());
  for (size_t j = 0; j < r.axes.size(); ++j) {
    config.orientations.emplace_back(r.axes[j] - 0.5 * r.phis[j],
                                     r.axes[j] + 0.5 * r.phis[j]);
  }
  return config;
}

ChainConfig assemble_by_joints(const ChainSpec& spec, double psi) {
  ValidateAlphas(spec.alphas);
  ValidatePsi(psi);
  ValidateLength(spec.l);
  const double l = spec.l;
  const size_t n = spec.alphas.size();
  ChainConfig config;
  config.psi = psi;
  Point r = spec.base_position;
  Point t1 = polar(spec.base_angle - 0.5 * psi);
  Point t2 = polar(spec.base_angle + 0.5 * psi);
  double theta1 = spec.base_angle - 0.5 * psi;
  config.centers.push_back(r);
  config.phis.push_back(psi);
  config.orientations.emplace_back(theta1, theta1 + psi);
  for (size_t j = 0; j + 1 < n; ++j) {
    const double a = spec.alphas[j];
    const double b = spec.alphas[j + 1];
    const Point low = r + (a * l) * t1;
    const Point high = r + ((1.0 - a) * l) * t2;
    // next center: distance b l from `low`, (1-b) l from `high`
    const double r0 = b * l;
    const double r1 = (1.0 - b) * l;
    const Point d = high - low;
    const double dist = norm(d);
    const double along = (dist * dist + r0 * r0 - r1 * r1) / (2.0 * dist);
    double h2 = r0 * r0 - along * along;
    if (h2 < -kArccosTolerance * l * l) {
      throw InfeasibleAssembly(static_cast<int>(j + 1), -h2 / (l * l));
    }
    h2 = std::max(h2, 0.0);
    const Point u = (1.0 / dist) * d;
    const Point base_pt = low + along * u;
    const Point off = std::sqrt(h2) * perp(u);
    // take the intersection on the far side of the face from r
    const Point c1 = base_pt + off;
    const Point c2 = base_pt - off;
    const double s1 = cross(d, c1 - low);
    const double s0 = cross(d, r - low);
    const Point next = (s1 * s0 < 0.0) ? c1 : c2;
    const Point n2 = (1.0 / r0) * (next - low);
    const Point n1 = (1.0 / r1) * (next - high);
    const double th1 = std::atan2(n1.y, n1.x);
    double phi = std::atan2(cross(n1, n2), dot(n1, n2));
    // keep theta1 continuous along the chain
    theta1 = theta1 + std::remainder(th1 - theta1, 2.0 * kPi);
    config.centers.push_back(next);
    config.phis.push_back(phi);
    config.orientations.emplace_back(theta1, theta1 + phi);
    r = next;
    t1 = n1;
    t2 = n2;
  }
  return config;
}

std::vector<UnitJoints> unit_joints(const ChainSpec& spec,
                                    const ChainConfig& config) {
  std::vector<UnitJoints> joints;
  joints.reserve(config.centers.size());
  for (size_t j = 0; j < config.centers.size(); ++j) {
    const double a = spec.alphas[j];
    const double l = spec.l;
    const Point& r = config.centers[j];
    const Point t1 = polar(config.orientations[j].first);
    const Point t2 = polar(config.orientations[j].second);
    UnitJoints u;
    u.center = r;
    u.east_low = r + (a * l) * t1;
    u.east_high = r + ((1.0 - a) * l) * t2;
    u.west_low = r - (a * l) * t2;
    u.west_high = r - ((1.0 - a) * l) * t1;
    joints.push_back(u);
  }
  return joints;
}

double face_radius(double alpha, double phi, double l) {
  const double a = 2.0 * alpha - 1.0;
  if (a == 0.0) return std::numeric_limits<double>::infinity();
  const double h = 0.5 * geometry::unit_rotation_angle(alpha, phi);
  return 0.5 * l * std::sin(0.5 * phi) / (a * std::cos(h));
}

double center_shift(double alpha_j, double alpha_j1, double psi, double l) {
  geometry::Validate(geometry::UnitGeometry{alpha_j, l});
  geometry::Validate(geometry::UnitGeometry{alpha_j1, l});
  ValidatePsi(psi);
  if (alpha_j == alpha_j1) return 0.0;
  if (alpha_j == 0.5 || alpha_j1 == 0.5) {
    throw geometry::DomainError(
        "center shift undefined: a straight section has no finite center");
  }
  const std::vector<double> phis = propagate_angles({alpha_j, alpha_j1}, psi);
  return face_radius(alpha_j, phis[0], l) - face_radius(alpha_j1, phis[1], l);
}

namespace {

void ValidateSections(const SectionedSpec& spec) {
  if (spec.sections.empty()) throw geometry::DomainError("no sections");
  for (const Section& s : spec.sections) {
    if (s.n_units < 1) throw geometry::DomainError("section with no units");
    geometry::Validate(geometry::UnitGeometry{s.alpha, spec.l});
  }
  if (spec.total_units() < 2) {
    throw geometry::DomainError("sectioned chain needs at least 2 units");
  }
  const double len = norm(spec.base_direction);
  if (!(std::abs(len - 1.0) < 1e-9)) {
    throw geometry::DomainError("base direction must be a unit vector");
  }
}

}  // namespace

Point tip_segmented(const SectionedSpec& spec, double psi) {
  ValidateSections(spec);
  ValidatePsi(psi);
  std::vector<int> counts;
  std::vector<double> alphas;
  for (const Section& s : spec.sections) {
    counts.push_back(s.n_units);
    alphas.push_back(s.alpha);
  }
  SegmentedTipResult<double> r = segmented_tip_kernel(
      std::span<const int>(counts), std::span<const double>(alphas), spec.l,
      spec.base_position, spec.base_direction, psi);
  if (r.first_infeasible >= 0) {
    throw InfeasibleAssembly(r.first_infeasible, r.first_excess);
  }
  return r.tip;
}

TipTrajectory sweep_tip(const SectionedSpec& spec, double psi_start,
                        double psi_end, int n_samples) {
  ValidatePsi(psi_start);
  ValidatePsi(psi_end);
  if (n_samples < 2) throw geometry::DomainError("sweep needs at least 2 samples");
  if (psi_start == psi_end) throw geometry::DomainError("empty sweep range");
  TipTrajectory traj;
  traj.psi_grid.reserve(n_samples);
  traj.points.reserve(n_samples);
  for (int k = 0; k < n_samples; ++k) {
    const double t = static_cast<double>(k) / (n_samples - 1);
    const double psi = psi_start + (psi_end - psi_start) * t;
    traj.psi_grid.push_back(psi);
    try {
      traj.points.push_back(tip_segmented(spec, psi));
    } catch (const InfeasibleAssembly& e) {
      std::ostringstream msg;
      msg << "sweep sample " << k << " (psi = " << psi << "): " << e.what();
      throw std::runtime_error(msg.str());
    }
  }
  return traj;
}

PerturbationCoefficients perturbation_coefficients(double alpha0, double psi) {
  PerturbationCoefficients c;
  const double a0 = 2.0 * alpha0 - 1.0;
  const double t = std::tan(0.5 * (kPi - psi));
  c.lambda = a0 / (alpha0 * (alpha0 - 1.0));
  c.Lambda = c.lambda / std::tan(0.5 * psi);
  c.rot0 = 2.0 * std::atan(a0 * t);
  const double sec2 = 1.0 + t * t;
  c.mu = 2.0 / (1.0 + a0 * a0 * t * t) * (2.0 * t - a0 * 0.5 * c.Lambda * sec2);
  return c;
}

ChainConfig perturbative_config(double alpha0, double epsilon, int n_units,
                                double psi) {
  geometry::Validate(geometry::UnitGeometry{alpha0, 1.0});
  ValidatePsi(psi);
  if (n_units < 1) throw geometry::DomainError("chain needs at least one unit");
  const PerturbationCoefficients c = perturbation_coefficients(alpha0, psi);
  ChainConfig config;
  config.psi = psi;
  std::vector<double> alphas(n_units);
  for (int k = 0; k < n_units; ++k) {
    alphas[k] = alpha0 + epsilon * k;
    const double phi = psi + k * epsilon * c.Lambda;
    const double axis = k * c.rot0 + 0.5 * epsilon * c.mu * k * k;
    config.phis.push_back(phi);
    config.orientations.emplace_back(axis - 0.5 * phi, axis + 0.5 * phi);
  }
  config.centers.push_back({0.0, 0.0});
  for (int k = 0; k + 1 < n_units; ++k) {
    const Point t1 = polar(config.orientations[k].first);
    const Point t2 = polar(config.orientations[k + 1].second);
    config.centers.push_back(config.centers[k] +
                             alphas[k] * t1 + alphas[k + 1] * t2);
  }
  return config;
}

}  // namespace scissor::kinematics
