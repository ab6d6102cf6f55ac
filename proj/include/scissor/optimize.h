#pragma once

// Inverse design: static shape morphing and tip-trajectory writing.
//
// Decision variables live in an unconstrained space and are mapped to
// physical parameters by transform_params, so every iterate is admissible.
// Losses are scalar-generic templates; the double instantiation evaluates
// and the ad::Var instantiation differentiates.

#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "scissor/autodiff.h"
#include "scissor/geometry.h"
#include "scissor/kinematics.h"
#include "scissor/targets.h"

namespace scissor::optimize {

// Loss assigned to infeasible assemblies, plus the (differentiable) amount
// by which the assembly condition is violated.
inline constexpr double kInfeasiblePenalty = 1e6;

struct AlphaBounds {
  double min = 0.05;
  double max = 0.95;
};

// Throws std::invalid_argument unless 0 < min < 0.5 < max < 1.
void Validate(const AlphaBounds& b);

// alpha = min + (max - min) * logistic(raw).
template <typename T>
T alpha_from_raw(const T& raw, const AlphaBounds& b) {
  return b.min + (b.max - b.min) * ad::logistic(raw);
}
double raw_from_alpha(double alpha, const AlphaBounds& b);

// l = exp(raw), or l_max * logistic(raw) when l_max > 0.
template <typename T>
T length_from_raw(const T& raw, double l_max = 0.0) {
  if (l_max > 0.0) return l_max * ad::logistic(raw);
  return ad::exp(raw);
}
double raw_from_length(double l, double l_max = 0.0);

// Physical values for a named unconstrained vector. Entries named alpha_*
// pass through alpha_from_raw, l through length_from_raw and psi through
// the actuation map below; anything else is copied.
ad::ParamVector transform_params(const ad::ParamVector& unconstrained,
                                 const AlphaBounds& bounds, double l_max = 0.0);

// Actuation angle kept inside (kPsiMargin, pi - kPsiMargin).
inline constexpr double kPsiMargin = 0.05;
template <typename T>
T psi_from_raw(const T& raw) {
  return kPsiMargin + (std::numbers::pi - 2.0 * kPsiMargin) * ad::logistic(raw);
}
double raw_from_psi(double psi);

// Sweep range with psi_min < psi_max, both inside (kPsiMargin, pi - kPsiMargin):
// psi_max = m + (pi - 2m) s(x), psi_min = m + (psi_max - m) s(y).
template <typename T>
std::pair<T, T> psi_range_from_raw(const T& x, const T& y) {
  const T hi = kPsiMargin + (std::numbers::pi - 2.0 * kPsiMargin) * ad::logistic(x);
  const T lo = kPsiMargin + (hi - kPsiMargin) * ad::logistic(y);
  return {hi, lo};
}
std::pair<double, double> raw_from_psi_range(double psi_max, double psi_min);

// ---------------------------------------------------------------------------
// Optimizer

struct OptimizerConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_iterations = 5000;
  // Stop when the loss changed by less than this over `window` iterations.
  double tolerance = 1e-10;
  int window = 100;
  uint64_t seed = 0;
  // Polled every iteration; a set flag stops the run early.
  const std::atomic<bool>* cancel = nullptr;
};

struct AdamResult {
  std::vector<double> best_x;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
  bool cancelled = false;
  std::string message;
};

using Objective = std::function<ad::ValueAndGradient(const std::vector<double>&)>;

// Adam from x0; returns the best iterate seen. Non-finite losses end the run
// with a message instead of throwing.
AdamResult adam(const Objective& objective, std::vector<double> x0,
                const OptimizerConfig& config);

// ---------------------------------------------------------------------------
// Results

struct RunResult {
  std::string kind;  // "morph" or "write"
  std::vector<std::string> names;  // unconstrained parameter names
  std::vector<double> raw;         // unconstrained optimum
  std::vector<double> alphas;      // per unit (morph) or per section (write)
  std::vector<int> units_per_section;  // write only
  double l = 1.0;
  double psi = 0.0;    // morph: deployed actuation angle
  double beta0 = 0.0;  // morph: base heading
  Point base{0.0, 0.0};
  double psi_max = 0.0;  // write: sweep start
  double psi_min = 0.0;  // write: sweep end
  int n_psi_samples = 0;
  double loss = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  uint64_t seed = 0;
  int iterations = 0;
  bool converged = false;
  bool feasible = false;
  bool cancelled = false;
  std::string message;
};

// ---------------------------------------------------------------------------
// Shape morphing

struct MorphWeights {
  double kappa = 1.0;
  double tip = 1.0;
  double rot = 0.1;
};

struct MorphProblem {
  // Target sampled at n_units nodes (m = n_units - 1) with kappa filled.
  targets::ArcLengthProfile target;
  int n_units = 20;
  MorphWeights weights;
  AlphaBounds bounds;
  // Upper bound on the member length; 0 leaves it unbounded.
  double l_max = 0.0;
};

// Builds a morph problem for `curve` (no bbox normalization).
MorphProblem make_morph_problem(const targets::TargetCurve& curve, int n_units,
                                double smoothing = -1.0);

void Validate(const MorphProblem& p);

// Parameter names: l, psi, beta0, alpha_1..alpha_N.
std::vector<std::string> morph_param_names(int n_units);

struct MorphDecoded {
  std::vector<double> alphas;
  double l, psi, beta0;
};
MorphDecoded decode_morph(const std::vector<double>& raw, const MorphProblem& p);

template <typename T>
struct MorphTerms {
  T total, curvature, tip, rotation, excess;
};

// lambda_k sum_j (kappa_o(alpha_j, phi_j, l) - kappa_j^t)^2
//   + lambda_tip |r_N - p_{N-1}|^2 + lambda_rot (beta0 - theta^t)^2,
// with unit j matched to target node j - 1 and the base pinned at p_0.
// Infeasible assemblies return kInfeasiblePenalty + excess.
template <typename T>
MorphTerms<T> morph_terms(std::span<const T> raw, const MorphProblem& p) {
  const int n = p.n_units;
  const T l = length_from_raw(raw[0], p.l_max);
  const T psi = psi_from_raw(raw[1]);
  const T beta0 = raw[2];
  std::vector<T> alphas;
  alphas.reserve(n);
  for (int j = 0; j < n; ++j) alphas.push_back(alpha_from_raw(raw[3 + j], p.bounds));
  const Vec2<T> base{T(p.target.nodes[0].x), T(p.target.nodes[0].y)};
  const kinematics::ChainKernelResult<T> chain = kinematics::assemble_chain_kernel(
      std::span<const T>(alphas), l, base, beta0, psi);
  MorphTerms<T> out;
  out.excess = chain.excess;
  T curv = T(0.0);
  for (int j = 0; j < n; ++j) {
    const T k = geometry::effective_curvature(alphas[j], chain.phis[j], l);
    const T d = k - p.target.kappa[j];
    curv = curv + d * d;
  }
  const Vec2<T> miss = chain.centers.back() -
                       Vec2<T>{T(p.target.nodes[n - 1].x), T(p.target.nodes[n - 1].y)};
  const T rot = beta0 - p.target.initial_tangent;
  out.curvature = curv;
  out.tip = dot(miss, miss);
  out.rotation = rot * rot;
  if (chain.first_infeasible >= 0) {
    out.total = kInfeasiblePenalty + chain.excess;
  } else {
    out.total = p.weights.kappa * out.curvature + p.weights.tip * out.tip +
                p.weights.rot * out.rotation;
  }
  return out;
}

template <typename T>
T morph_loss(std::span<const T> raw, const MorphProblem& p) {
  return morph_terms(raw, p).total;
}
double morph_loss(const ad::ParamVector& params, const MorphProblem& p);

// Initial unconstrained vector: alphas drawn from the seed (seed 0 draws in
// (0.45, 0.55), other seeds across the bounds), psi = pi/2, l from the
// target node spacing and beta0 = target heading.
std::vector<double> morph_initial(const MorphProblem& p, uint64_t seed);

// Adam on morph_loss from `init` (morph_initial(seed) when empty). The
// feasibility flag requires an assemblable chain whose tip lands within 5%
// of the target length of the last node.
RunResult solve_morph(const MorphProblem& p, const OptimizerConfig& config,
                      std::vector<double> init = {});

// Deployed configuration of a morph result.
kinematics::ChainConfig morph_shape(const RunResult& r);

// ---------------------------------------------------------------------------
// Trajectory writing

struct WriteWeights {
  double smooth = 1e-2;
  double length = 1.0;
  double steric = 10.0;
};

enum class PsiMode { kFixed, kJoint };

struct WriteProblem {
  // Target normalized to the unit box, resampled with kappa filled.
  targets::ArcLengthProfile target;
  std::vector<int> units_per_section;
  WriteWeights weights;
  double phi_min = 0.1;
  double psi_max = 3.0;
  double psi_min = 0.3;
  int n_psi_samples = 400;
  PsiMode psi_mode = PsiMode::kJoint;
  AlphaBounds bounds;
};

// Splits n_units into `sections` near-equal sections (earlier sections get
// the remainder) and normalizes the target to the unit box. sections = 0
// gives one section per unit.
WriteProblem make_write_problem(const targets::TargetCurve& curve, int n_units,
                                int sections = 0, double smoothing = -1.0);

void Validate(const WriteProblem& p);

// Parameter names: alpha_1..alpha_M, l, then psi_max_raw, psi_min_raw in
// joint mode.
std::vector<std::string> write_param_names(const WriteProblem& p);

template <typename T>
struct WriteTerms {
  T total, mismatch, smooth, length, steric, excess;
  T trajectory_length;
};

// Non-uniform three-point first and second derivatives of f on knots s.
template <typename T>
void ThreePointDerivatives(const std::vector<T>& s, const std::vector<T>& f,
                           std::vector<T>* d1, std::vector<T>* d2) {
  const size_t n = s.size();
  d1->assign(n, T(0.0));
  d2->assign(n, T(0.0));
  for (size_t i = 1; i + 1 < n; ++i) {
    const T h1 = s[i] - s[i - 1];
    const T h2 = s[i + 1] - s[i];
    const T h12 = h1 + h2;
    (*d1)[i] = -h2 / (h1 * h12) * f[i - 1] + (h2 - h1) / (h1 * h2) * f[i] +
               h1 / (h2 * h12) * f[i + 1];
    (*d2)[i] = 2.0 * (f[i - 1] / (h1 * h12) - f[i] / (h1 * h2) + f[i + 1] / (h2 * h12));
  }
  (*d1)[0] = (*d1)[1];
  (*d2)[0] = (*d2)[1];
  (*d1)[n - 1] = (*d1)[n - 2];
  (*d2)[n - 1] = (*d2)[n - 2];
}

// Tip trajectory of the sweep, with the per-section internal angles at
// every sample and the accumulated assembly excess.
template <typename T>
struct SweepKernelResult {
  std::vector<Vec2<T>> tips;
  std::vector<std::vector<T>> phis;  // [sample][section]
  T excess = T(0.0);
  int first_infeasible_sample = -1;
};

template <typename T>
SweepKernelResult<T> sweep_kernel(std::span<const int> counts,
                                  std::span<const T> alphas, const T& l,
                                  const T& psi_start, const T& psi_end, int samples) {
  SweepKernelResult<T> out;
  out.tips.reserve(samples);
  out.phis.reserve(samples);
  const Vec2<T> base{T(0.0), T(0.0)};
  const Vec2<T> radial{T(0.0), T(-1.0)};
  const kinematics::SegmentedChain<T> chain =
      kinematics::make_segmented_chain(counts, alphas, l, base, radial);
  for (int k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) / (samples - 1);
    const T psi = psi_start + (psi_end - psi_start) * t;
    kinematics::SegmentedTipResult<T> r;
    try {
      r = kinematics::segmented_tip_at(chain, psi);
    } catch (const ad::NanError& e) {
      throw ad::NanError("psi sample " + std::to_string(k) + " (psi = " +
                         std::to_string(ad::value_of(psi)) + "): " + e.what());
    }
    if (r.first_infeasible >= 0 && out.first_infeasible_sample < 0) {
      out.first_infeasible_sample = k;
    }
    out.excess = out.excess + r.excess;
    out.tips.push_back(r.tip);
    out.phis.push_back(std::move(r.phis));
  }
  return out;
}

// Curvature-matched writing loss:
//   mean_i (kappa_tip(s_i) - kappa^t(s_i))^2 + lambda_sm sum (alpha_{j+1} - alpha_j)^2
//   + lambda_L ((L - L^t) / L^t)^2 + lambda_phi sum_k sum_j N_j max(0, phi_min - phi_j(psi_k))^2.
// Both curvatures are made dimensionless by their own curve length, so the
// mismatch compares shapes on s in [0, 1]. The tip curvature comes from the
// sweep's cumulative arc length, three-point differences and linear
// interpolation onto the target grid.
template <typename T>
WriteTerms<T> write_terms(std::span<const T> raw, const WriteProblem& p) {
  const size_t m = p.units_per_section.size();
  std::vector<T> alphas;
  alphas.reserve(m);
  for (size_t j = 0; j < m; ++j) alphas.push_back(alpha_from_raw(raw[j], p.bounds));
  const T l = length_from_raw(raw[m]);
  T psi_hi = T(p.psi_max), psi_lo = T(p.psi_min);
  if (p.psi_mode == PsiMode::kJoint) {
    std::tie(psi_hi, psi_lo) = psi_range_from_raw(raw[m + 1], raw[m + 2]);
  }
  const int samples = p.n_psi_samples;
  const SweepKernelResult<T> sweep =
      sweep_kernel(std::span<const int>(p.units_per_section), std::span<const T>(alphas), l,
                   psi_hi, psi_lo, samples);

  WriteTerms<T> out;
  out.excess = sweep.excess;
  // cumulative arc length; the tiny floor keeps sqrt differentiable when
  // consecutive samples coincide
  std::vector<T> s(samples), x(samples), y(samples);
  s[0] = T(0.0);
  for (int k = 1; k < samples; ++k) {
    const Vec2<T> d = sweep.tips[k] - sweep.tips[k - 1];
    s[k] = s[k - 1] + ad::sqrt(dot(d, d) + 1e-24);
  }
  const T length = s[samples - 1];
  out.trajectory_length = length;
  for (int k = 0; k < samples; ++k) {
    s[k] = s[k] / length;
    x[k] = sweep.tips[k].x / length;
    y[k] = sweep.tips[k].y / length;
  }
  std::vector<T> x1, x2, y1, y2;
  ThreePointDerivatives(s, x, &x1, &x2);
  ThreePointDerivatives(s, y, &y1, &y2);
  std::vector<T> kappa(samples);
  for (int k = 0; k < samples; ++k) {
    const T sp2 = x1[k] * x1[k] + y1[k] * y1[k];
    kappa[k] = (x1[k] * y2[k] - y1[k] * x2[k]) / (sp2 * ad::sqrt(sp2));
  }
  const double lt = p.target.total_length;
  const size_t grid = p.target.s_grid.size();
  T mismatch = T(0.0);
  for (size_t i = 0; i < grid; ++i) {
    const T q = T(p.target.s_grid[i] / lt);
    const T k = ad::interp_linear(std::span<const T>(s), std::span<const T>(kappa), q);
    const T d = k - p.target.kappa[i] * lt;
    mismatch = mismatch + d * d;
  }
  out.mismatch = mismatch / static_cast<double>(grid);
  T smooth = T(0.0);
  for (size_t j = 0; j + 1 < m; ++j) {
    const T d = alphas[j + 1] - alphas[j];
    smooth = smooth + d * d;
  }
  out.smooth = smooth;
  const T rel = (length - lt) / lt;
  out.length = rel * rel;
  T steric = T(0.0);
  for (int k = 0; k < samples; ++k) {
    for (size_t j = 0; j < m; ++j) {
      const T gap = p.phi_min - sweep.phis[k][j];
      if (ad::value_of(gap) > 0.0) {
        steric = steric + static_cast<double>(p.units_per_section[j]) * gap * gap;
      }
    }
  }
  out.steric = steric;
  if (sweep.first_infeasible_sample >= 0) {
    out.total = kInfeasiblePenalty + sweep.excess;
  } else {
    out.total = out.mismatch + p.weights.smooth * out.smooth +
                p.weights.length * out.length + p.weights.steric * out.steric;
  }
  return out;
}

template <typename T>
T write_loss(std::span<const T> raw, const WriteProblem& p) {
  return write_terms(raw, p).total;
}
double write_loss(const ad::ParamVector& params, const WriteProblem& p);

// Initial unconstrained vector for a restart seed. Joint mode starts the
// range at (psi_max, psi_min) of the problem.
std::vector<double> write_initial(const WriteProblem& p, uint64_t seed);

RunResult solve_write(const WriteProblem& p, const OptimizerConfig& config,
                      std::vector<double> init = {});

// Sectioned chain of a write result, based at the origin with the default
// radial direction.
kinematics::SectionedSpec write_spec(const RunResult& r);
// Tip trajectory of a write result over its sweep range.
kinematics::TipTrajectory write_trajectory(const RunResult& r);

// ---------------------------------------------------------------------------
// Grid search

struct GridRow {
  int n_units = 0;
  uint64_t seed = 0;
  double loss = std::numeric_limits<double>::infinity();
  bool feasible = false;
  bool failed = false;
  std::string message;
};

struct GridSearchResult {
  RunResult best;
  std::vector<GridRow> table;       // ordered by (N, seed)
  std::vector<RunResult> runs;      // aligned with table
  bool cancelled = false;
};

struct GridSearchOptions {
  std::vector<int> n_candidates;  // total unit counts
  int restarts = 15;
  // 0 keeps one section per unit; otherwise min(sections, N) sections.
  int sections = 0;
  // Worker threads; 0 uses the hardware concurrency.
  int threads = 1;
  // Called from worker threads as each cell finishes (serialized).
  std::function<void(const GridRow&)> on_row;
};

// N = 10, 15, ..., 100.
std::vector<int> default_grid();

// n_units split into `sections` near-equal counts, earlier sections taking
// the remainder; sections = 0 (or more than n_units) gives one per unit.
std::vector<int> split_units(int n_units, int sections);

// For each N, `restarts` solves with seeds config.seed + r. Failed runs get
// infinite loss. The result does not depend on thread count or scheduling.
// base.units_per_section is replaced per cell.
GridSearchResult grid_search(const WriteProblem& base,
                             const GridSearchOptions& options,
                             const OptimizerConfig& config);

// Seeded uniform double in [0, 1) from the top 53 bits of mt19937_64, so
// draws are identical on every standard library.
double uniform01(uint64_t bits);

// Threads to use given a request (0 = auto) and the SCISSOR_THREADS cap.
int resolve_threads(int requested);

}  // namespace scissor::optimize
