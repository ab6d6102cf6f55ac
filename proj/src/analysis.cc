#include "scissor/analysis.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include "scissor/geometry.h"
#include "scissor/optimize.h"

namespace scissor::analysis {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

uint64_t SplitMix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Sample variance with a fixed summation order.
double Variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

std::vector<double> Ranks(const std::vector<double>& v) {
  std::vector<size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&v](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (size_t i = 0; i < idx.size();) {
    size_t k = i;
    while (k + 1 < idx.size() && v[idx[k + 1]] == v[idx[i]]) ++k;
    const double avg = 0.5 * static_cast<double>(i + k) + 1.0;
    for (size_t m = i; m <= k; ++m) r[idx[m]] = avg;
    i = k + 1;
  }
  return r;
}

double Interp(const std::vector<double>& x, const std::vector<double>& y, double q) {
  const auto it = std::upper_bound(x.begin(), x.end(), q);
  size_t i = static_cast<size_t>(std::distance(x.begin(), it));
  i = std::clamp<size_t>(i, 1, x.size() - 1);
  const double t = (q - x[i - 1]) / (x[i] - x[i - 1]);
  return y[i - 1] + t * (y[i] - y[i - 1]);
}

double OneWay(const NormalizedProfile& a, const NormalizedProfile& b) {
  const double lo = std::max(a.x.front(), b.x.front());
  const double hi = std::min(a.x.back(), b.x.back());
  double worst = 0.0;
  for (size_t i = 0; i < a.x.size(); ++i) {
    if (a.x[i] < lo || a.x[i] > hi) continue;
    worst = std::max(worst, std::abs(a.log_sigma[i] - Interp(b.x, b.log_sigma, a.x[i])));
  }
  return worst;
}

// Unwrapped turn of the (N+1)-th unit relative to the first, minus 2 pi.
double ClosureResidual(double alpha, int n_units, double psi) {
  kinematics::ChainSpec spec;
  spec.alphas.assign(static_cast<size_t>(n_units) + 1, alpha);
  const kinematics::ChainConfig c = kinematics::assemble_by_joints(spec, psi);
  return c.orientations.back().first - c.orientations.front().first - 2.0 * kPi;
}

// Polyline with cumulative arc length, evaluated at fractions of its length.
class ArcPolyline {
 public:
  ArcPolyline(std::vector<Point> pts, bool closed) : pts_(std::move(pts)), closed_(closed) {
    if (closed_) pts_.push_back(pts_.front());
    s_.assign(pts_.size(), 0.0);
    for (size_t i = 1; i < pts_.size(); ++i) s_[i] = s_[i - 1] + norm(pts_[i] - pts_[i - 1]);
  }
  double length() const { return s_.back(); }
  // f in [0, 1]; wrapped for closed curves.
  Point At(double f) const {
    if (closed_) f -= std::floor(f);
    const double q = std::clamp(f, 0.0, 1.0) * length();
    size_t i = static_cast<size_t>(std::upper_bound(s_.begin(), s_.end(), q) - s_.begin());
    i = std::clamp<size_t>(i, 1, s_.size() - 1);
    const double seg = s_[i] - s_[i - 1];
    const double t = seg > 0.0 ? (q - s_[i - 1]) / seg : 0.0;
    return pts_[i - 1] + t * (pts_[i] - pts_[i - 1]);
  }
  double Distance(const Point& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 1; i < pts_.size(); ++i) {
      const Point d = pts_[i] - pts_[i - 1];
      const double dd = dot(d, d);
      const double t = dd > 0.0 ? std::clamp(dot(p - pts_[i - 1], d) / dd, 0.0, 1.0) : 0.0;
      best = std::min(best, norm(p - (pts_[i - 1] + t * d)));
    }
    return best;
  }

 private:
  std::vector<Point> pts_;
  bool closed_;
  std::vector<double> s_;
};

struct RigidMotion {
  double angle = 0.0;
  Point shift;
  double residual = 0.0;
};

// Least-squares rotation + translation taking a onto b.
RigidMotion Kabsch(const std::vector<Point>& a, const std::vector<Point>& b) {
  Point ca, cb;
  for (size_t i = 0; i < a.size(); ++i) {
    ca = ca + a[i];
    cb = cb + b[i];
  }
  ca = (1.0 / a.size()) * ca;
  cb = (1.0 / b.size()) * cb;
  double sc = 0.0, sd = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    sc += cross(a[i] - ca, b[i] - cb);
    sd += dot(a[i] - ca, b[i] - cb);
  }
  RigidMotion m;
  m.angle = std::atan2(sc, sd);
  m.shift = cb - rotate(ca, m.angle);
  for (size_t i = 0; i < a.size(); ++i) {
    const Point r = rotate(a[i], m.angle) + m.shift - b[i];
    m.residual += dot(r, r);
  }
  return m;
}

}  // namespace

SensitivityProfile sensitivity_profile(int n_units, double epsilon, int n_samples,
                                       double psi, uint64_t seed, int threads) {
  if (n_units < 1) throw std::invalid_argument("sensitivity: n_units must be >= 1");
  if (!(epsilon > 0.0) || epsilon >= 0.45) {
    throw std::invalid_argument("sensitivity: epsilon must be in (0, 0.45)");
  }
  if (n_samples < 2) throw std::invalid_argument("sensitivity: n_samples must be >= 2");
  SensitivityProfile out;
  out.n_units = n_units;
  out.epsilon = epsilon;
  out.n_samples = n_samples;
  out.psi = psi;
  out.seed = seed;
  out.sigma.assign(n_units, 0.0);

  kinematics::ChainSpec base;
  base.alphas.assign(n_units, 0.5);
  const Point tip0 = kinematics::assemble_chain(base, psi).tip();

  std::atomic<int> next{0};
  auto worker = [&]() {
    kinematics::ChainSpec spec = base;
    std::vector<double> d(n_samples);
    for (int j = next++; j < n_units; j = next++) {
      std::mt19937_64 rng(SplitMix64(seed ^ SplitMix64(static_cast<uint64_t>(j) + 1)));
      for (int s = 0; s < n_samples; ++s) {
        const double delta = epsilon * (2.0 * optimize::uniform01(rng()) - 1.0);
        spec.alphas[j] = 0.5 + delta;
        d[s] = norm(kinematics::assemble_chain(spec, psi).tip() - tip0);
      }
      spec.alphas[j] = 0.5;
      out.sigma[j] = Variance(d);
    }
  };
  const int n_threads = std::min(optimize::resolve_threads(threads), n_units);
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  return out;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("spearman: need two equal-length samples of size >= 2");
  }
  const std::vector<double> rx = Ranks(x), ry = Ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = 0.5 * (n + 1.0);
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

NormalizedProfile normalize_profile(const SensitivityProfile& p) {
  if (p.n_units < 4) throw std::invalid_argument("normalize_profile: need N >= 4");
  const auto first = p.sigma.begin() + 1;
  const auto last = p.sigma.end() - 1;
  const double peak = *std::max_element(first, last);
  NormalizedProfile out;
  for (int j = 2; j < p.n_units; ++j) {
    out.x.push_back(static_cast<double>(j) / p.n_units);
    out.log_sigma.push_back(std::log(p.sigma[j - 1] / peak));
  }
  return out;
}

double collapse_deviation(const NormalizedProfile& a, const NormalizedProfile& b) {
  return std::max(OneWay(a, b), OneWay(b, a));
}

double measured_closure(double alpha, int n_units) {
  if (n_units < 3) throw geometry::DomainError("closure needs at least 3 units");
  double lo = 1e-3, hi = kPi - 1e-3;
  double f_lo = ClosureResidual(alpha, n_units, lo);
  const double f_hi = ClosureResidual(alpha, n_units, hi);
  if (!(f_lo > 0.0 && f_hi < 0.0)) {
    throw geometry::NoClosureError("no actuation angle closes the ring for alpha = " +
                                   std::to_string(alpha));
  }
  while (true) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double f = ClosureResidual(alpha, n_units, mid);
    if (f == 0.0) return mid;
    if ((f > 0.0) == (f_lo > 0.0)) {
      lo = mid;
      f_lo = f;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<ClosureRow> closure_experiment(const std::vector<double>& alphas,
                                           const std::vector<int>& n_units) {
  std::vector<ClosureRow> rows;
  for (double a : alphas) {
    for (int n : n_units) {
      ClosureRow row;
      row.alpha = a;
      row.n_units = n;
      try {
        row.psi_theory = geometry::closure_actuation(a, n);
        row.psi_measured = measured_closure(a, n);
      } catch (const std::exception& e) {
        row.psi_theory = kNan;
        row.psi_measured = kNan;
        row.flagged = true;
        row.note = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

PerturbationReport perturbation_validation(double alpha0, double epsilon, int n_units,
                                           double psi) {
  PerturbationReport out;
  out.alpha0 = alpha0;
  out.epsilon = epsilon;
  out.n_units = n_units;
  out.psi = psi;
  kinematics::ChainSpec spec;
  for (int k = 0; k < n_units; ++k) spec.alphas.push_back(alpha0 + epsilon * k);
  const kinematics::ChainConfig full = kinematics::assemble_chain(spec, psi);
  const kinematics::ChainConfig pert =
      kinematics::perturbative_config(alpha0, epsilon, n_units, psi);
  for (int k = 0; k < n_units; ++k) {
    PerturbationRow row;
    row.unit = k + 1;
    row.full = full.centers[k];
    row.perturbative = pert.centers[k];
    row.error = norm(row.full - row.perturbative);
    out.max_error = std::max(out.max_error, row.error);
    if (k > 0) out.chain_length += norm(full.centers[k] - full.centers[k - 1]);
    out.rows.push_back(row);
  }
  return out;
}

double perturbation_slope(double alpha0, const std::vector<double>& epsilons, int n_units,
                          double psi) {
  if (epsilons.size() < 2) throw std::invalid_argument("slope needs two or more epsilons");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double e : epsilons) {
    const double x = std::log(e);
    const double y = std::log(perturbation_validation(alpha0, e, n_units, psi).max_error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(epsilons.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double segmented_fk_error(const kinematics::SectionedSpec& spec, double psi) {
  const Point a = kinematics::tip_segmented(spec, psi);
  const Point b = kinematics::assemble_chain(spec.ToChainSpec(), psi).tip();
  return norm(a - b) / spec.l;
}

TrajectoryFit fit_trajectory(const std::vector<Point>& trajectory,
                             const targets::TargetCurve& target) {
  if (trajectory.size() < 2) throw std::invalid_argument("fit_trajectory: need two points");
  targets::Validate(target);
  const ArcPolyline traj(trajectory, false);
  const ArcPolyline tgt(target.points, target.closed);
  constexpr int kPairs = 200;
  std::vector<Point> a(kPairs), b(kPairs);
  for (int i = 0; i < kPairs; ++i) a[i] = traj.At(static_cast<double>(i) / (kPairs - 1));
  RigidMotion best;
  best.residual = std::numeric_limits<double>::infinity();
  const int shifts = target.closed ? kPairs : 1;
  for (int k = 0; k < shifts; ++k) {
    const double offset = static_cast<double>(k) / kPairs;
    for (int i = 0; i < kPairs; ++i) b[i] = tgt.At(offset + static_cast<double>(i) / (kPairs - 1));
    const RigidMotion m = Kabsch(a, b);
    if (m.residual < best.residual) best = m;
  }
  TrajectoryFit fit;
  fit.rotation = best.angle;
  fit.translation = best.shift;
  double ss = 0.0;
  for (const Point& p : trajectory) {
    const Point q = rotate(p, best.angle) + best.shift;
    const double d = tgt.Distance(q);
    fit.aligned.push_back(q);
    fit.max_deviation = std::max(fit.max_deviation, d);
    ss += d * d;
  }
  fit.rms_deviation = std::sqrt(ss / trajectory.size());
  for (size_t i = 0; i < target.points.size(); ++i) {
    for (size_t j = i + 1; j < target.points.size(); ++j) {
      fit.target_diameter = std::max(fit.target_diameter, norm(target.points[i] - target.points[j]));
    }
  }
  return fit;
}

}  // namespace scissor::analysis
