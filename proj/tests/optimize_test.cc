#include "scissor/optimize.h"

#include <cmath>
#include <numbers>
#include <random>

#include "gtest/gtest.h"

namespace scissor::optimize {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(Transform, Midpoint) {
  const AlphaBounds b{0.1, 0.8};
  EXPECT_DOUBLE_EQ(alpha_from_raw(0.0, b), 0.45);
  EXPECT_EQ(length_from_raw(0.0), 1.0);
  EXPECT_DOUBLE_EQ(length_from_raw(0.0, 3.0), 1.5);
}

TEST(Transform, BoundsApproachedNotAttained) {
  const AlphaBounds b;
  for (double raw : {-30.0, -10.0, 10.0, 30.0}) {
    const double a = alpha_from_raw(raw, b);
    EXPECT_GT(a, b.min);
    EXPECT_LT(a, b.max);
  }
  EXPECT_NEAR(alpha_from_raw(30.0, b), b.max, 1e-12);
  EXPECT_NEAR(alpha_from_raw(-30.0, b), b.min, 1e-12);
  EXPECT_GT(length_from_raw(-30.0), 0.0);
}

TEST(Transform, RoundTrips) {
  const AlphaBounds b;
  for (double a : {0.06, 0.3, 0.5, 0.77, 0.94}) {
    EXPECT_NEAR(alpha_from_raw(raw_from_alpha(a, b), b), a, 1e-13);
  }
  EXPECT_NEAR(length_from_raw(raw_from_length(0.37)), 0.37, 1e-15);
  EXPECT_NEAR(length_from_raw(raw_from_length(0.37, 2.0), 2.0), 0.37, 1e-14);
  EXPECT_NEAR(psi_from_raw(raw_from_psi(1.3)), 1.3, 1e-14);
  const auto [x, y] = raw_from_psi_range(3.0, 0.3);
  const auto [hi, lo] = psi_range_from_raw(x, y);
  EXPECT_NEAR(hi, 3.0, 1e-13);
  EXPECT_NEAR(lo, 0.3, 1e-13);
  EXPECT_THROW(raw_from_psi_range(0.3, 3.0), std::invalid_argument);
}

TEST(Transform, PsiRangeIsOrdered) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const auto [hi, lo] = psi_range_from_raw(n(rng), n(rng));
    EXPECT_GE(lo, kPsiMargin);
    EXPECT_LE(lo, hi);
    EXPECT_LE(hi, kPi - kPsiMargin);
  }
}

TEST(Transform, NamedParameters) {
  ad::ParamVector u;
  u.Add("alpha_1", 0.0);
  u.Add("l", 0.0);
  u.Add("psi", 0.0);
  u.Add("beta0", 0.25);
  u.Add("psi_max_raw", 2.0);
  u.Add("psi_min_raw", -1.0);
  const ad::ParamVector p = transform_params(u, AlphaBounds{});
  EXPECT_DOUBLE_EQ(p.Get("alpha_1"), 0.5);
  EXPECT_EQ(p.Get("l"), 1.0);
  EXPECT_NEAR(p.Get("psi"), kPi / 2, 1e-15);
  EXPECT_EQ(p.Get("beta0"), 0.25);
  const auto [hi, lo] = psi_range_from_raw(2.0, -1.0);
  EXPECT_EQ(p.Get("psi_max"), hi);
  EXPECT_EQ(p.Get("psi_min"), lo);
  EXPECT_THROW(Validate(AlphaBounds{0.6, 0.9}), std::invalid_argument);
}

TEST(Adam, MinimizesQuadratic) {
  Objective f = [](const std::vector<double>& x) {
    return ad::grad(
        [](auto v) { return (v[0] - 1.0) * (v[0] - 1.0) + 4.0 * (v[1] + 2.0) * (v[1] + 2.0); },
        std::span<const double>(x));
  };
  OptimizerConfig cfg;
  cfg.learning_rate = 0.05;
  const AdamResult r = adam(f, {0.0, 0.0}, cfg);
  EXPECT_NEAR(r.best_x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.best_x[1], -2.0, 1e-4);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.best_loss, *std::min_element(r.trace.begin(), r.trace.end()));
  const AdamResult again = adam(f, {0.0, 0.0}, cfg);
  EXPECT_EQ(again.best_x, r.best_x);
  EXPECT_EQ(again.trace, r.trace);
}

TEST(Adam, CancelStopsImmediately) {
  std::atomic<bool> cancel{true};
  OptimizerConfig cfg;
  cfg.cancel = &cancel;
  Objective f = [](const std::vector<double>& x) {
    return ad::grad([](auto v) { return v[0] * v[0]; }, std::span<const double>(x));
  };
  const AdamResult r = adam(f, {1.0}, cfg);
  EXPECT_TRUE(r.cancelled);
  EXPECT_EQ(r.iterations, 0);
}

TEST(Adam, NanStopsWithMessage) {
  Objective f = [](const std::vector<double>& x) {
    return ad::grad([](auto v) { return ad::sqrt(v[0]); }, std::span<const double>(x));
  };
  const AdamResult r = adam(f, {-1.0}, OptimizerConfig{});
  EXPECT_NE(r.message.find("sqrt"), std::string::npos);
  EXPECT_FALSE(r.converged);
}

// ---- morphing ----

using targets::TargetCurve;

MorphProblem StraightProblem(int n, double length) {
  TargetCurve line = targets::analytic_target("line", {{"L", length}});
  return make_morph_problem(line, n);
}

std::vector<double> RawFor(const MorphProblem& p, const std::vector<double>& alphas, double l,
                           double psi, double beta0) {
  std::vector<double> raw = {raw_from_length(l, p.l_max), raw_from_psi(psi), beta0};
  for (double a : alphas) raw.push_back(raw_from_alpha(a, p.bounds));
  return raw;
}

TEST(MorphLoss, StraightTargetIsZero) {
  const int n = 12;
  const MorphProblem p = StraightProblem(n, 4.0);
  const double psi = kPi / 2;
  const double l = 4.0 / ((n - 1) * std::cos(psi / 2));
  const std::vector<double> raw = RawFor(p, std::vector<double>(n, 0.5), l, psi, 0.0);
  const MorphTerms<double> t = morph_terms(std::span<const double>(raw), p);
  EXPECT_LT(t.total, 1e-20);
  EXPECT_EQ(t.rotation, 0.0);
  EXPECT_LT(t.curvature, 1e-20);
}

TEST(MorphLoss, UniformAlphaMatchesCircleCurvature) {
  MorphProblem p = make_morph_problem(targets::analytic_target("circle", {{"R", 2}}), 16);
  std::fill(p.target.kappa.begin(), p.target.kappa.end(), 0.5);
  const double psi = 1.4, l = 0.6;
  // invert kappa_o(alpha) = 1/R by bisection on the face-rotation formula
  double lo = 0.5, hi = 0.95;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double k = (2 * mid - 1) / (2 * mid * l * (1 - mid) * std::sin(psi / 2));
    (k < 0.5 ? lo : hi) = mid;
  }
  const double alpha = 0.5 * (lo + hi);
  const std::vector<double> raw = RawFor(p, std::vector<double>(16, alpha), l, psi, 0.0);
  const MorphTerms<double> t = morph_terms(std::span<const double>(raw), p);
  EXPECT_LT(t.curvature, 1e-20);
  EXPECT_GT(t.tip, 0.0);
}

TEST(MorphLoss, PerturbingOptimumIncreasesLoss) {
  const MorphProblem p = make_morph_problem(targets::analytic_target("spiral"), 12);
  OptimizerConfig cfg;
  const RunResult r = solve_morph(p, cfg);
  for (size_t i = 3; i < r.raw.size(); ++i) {
    for (double d : {-0.02, 0.02}) {
      std::vector<double> x = r.raw;
      x[i] += d;
      EXPECT_GT(morph_loss(std::span<const double>(x), p), r.loss) << "alpha " << i - 2;
    }
  }
}

TEST(MorphLoss, InfeasibleIsPenalizedNotThrown) {
  const MorphProblem p = StraightProblem(6, 3.0);
  // the most asymmetric unit is not first, so the chain cannot assemble
  std::vector<double> alphas = {0.5, 0.5, 0.07, 0.5, 0.5, 0.5};
  const std::vector<double> raw = RawFor(p, alphas, 1.0, 0.6, 0.0);
  const double v = morph_loss(std::span<const double>(raw), p);
  EXPECT_GE(v, kInfeasiblePenalty);
  const ad::ValueAndGradient g = ad::grad(
      [&p](std::span<const ad::Var> x) { return morph_loss(x, p); }, std::span<const double>(raw));
  EXPECT_EQ(g.value, v);
  for (double d : g.gradient) EXPECT_TRUE(std::isfinite(d));
}

TEST(MorphLoss, GradientMatchesFiniteDifferences) {
  const MorphProblem p = make_morph_problem(targets::analytic_target("sine"), 10);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ua(0.45, 0.55), up(1.0, 2.2), ul(0.2, 0.6);
  int checked = 0;
  while (checked < 20) {
    std::vector<double> alphas(10);
    for (double& a : alphas) a = ua(rng);
    const std::vector<double> raw = RawFor(p, alphas, ul(rng), up(rng), 0.3);
    if (morph_loss(std::span<const double>(raw), p) >= kInfeasiblePenalty) continue;
    auto f = [&p](auto x) { return morph_loss(x, p); };
    const ad::FiniteDiffReport r = ad::finite_diff_check(f, raw);
    EXPECT_TRUE(r.passed);
    EXPECT_LT(r.max_relative_error, 1e-5);
    ++checked;
  }
}

double CurvatureRmsRatio(const MorphProblem& p, const RunResult& r) {
  const kinematics::ChainConfig c = morph_shape(r);
  double se = 0, kmax = 0;
  for (int j = 0; j < p.n_units; ++j) {
    const double k = geometry::effective_curvature(r.alphas[j], c.phis[j], r.l);
    se += (k - p.target.kappa[j]) * (k - p.target.kappa[j]);
    kmax = std::max(kmax, std::abs(p.target.kappa[j]));
  }
  return std::sqrt(se / p.n_units) / kmax;
}

TEST(SolveMorph, SpiralConverges) {
  const MorphProblem p = make_morph_problem(targets::analytic_target("spiral"), 20);
  const RunResult r = solve_morph(p, OptimizerConfig{});
  EXPECT_TRUE(r.feasible) << r.message;
  EXPECT_LT(CurvatureRmsRatio(p, r), 0.05);
  EXPECT_EQ(r.loss, *std::min_element(r.trace.begin(), r.trace.end()));
  for (double a : r.alphas) {
    EXPECT_GT(a, p.bounds.min);
    EXPECT_LT(a, p.bounds.max);
  }
}

TEST(SolveMorph, SineCrossesSymmetryWhereCurvatureChangesSign) {
  const MorphProblem p = make_morph_problem(targets::analytic_target("sine"), 20);
  const RunResult r = solve_morph(p, OptimizerConfig{});
  double kmax = 0;
  for (double k : p.target.kappa) kmax = std::max(kmax, std::abs(k));
  for (int j = 0; j < p.n_units; ++j) {
    if (std::abs(p.target.kappa[j]) < 0.1 * kmax) continue;
    EXPECT_EQ(r.alphas[j] > 0.5, p.target.kappa[j] > 0) << "unit " << j + 1;
  }
}

TEST(SolveMorph, StationaryAtSolution) {
  const MorphProblem p = make_morph_problem(targets::analytic_target("spiral"), 20);
  const RunResult r = solve_morph(p, OptimizerConfig{});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  const double h = 1e-6;
  for (int d = 0; d < 10; ++d) {
    std::vector<double> dir(r.raw.size());
    double len = 0;
    for (double& v : dir) {
      v = n(rng);
      len += v * v;
    }
    std::vector<double> xp = r.raw, xm = r.raw;
    for (size_t i = 0; i < dir.size(); ++i) {
      xp[i] += h * dir[i] / std::sqrt(len);
      xm[i] -= h * dir[i] / std::sqrt(len);
    }
    const double fp = morph_loss(std::span<const double>(xp), p);
    const double fm = morph_loss(std::span<const double>(xm), p);
    EXPECT_GE((fp - r.loss) / h, -1e-4);
    EXPECT_GE((fm - r.loss) / h, -1e-4);
  }
}

TEST(SolveMorph, TooFewUnitsForLengthIsFlagged) {
  MorphProblem p = make_morph_problem(targets::analytic_target("line", {{"L", 20}}), 5);
  p.l_max = 1.0;
  OptimizerConfig cfg;
  cfg.max_iterations = 1500;
  const RunResult r = solve_morph(p, cfg);
  EXPECT_FALSE(r.feasible);
  EXPECT_LT(r.l, 1.0);
}

TEST(SolveMorph, Deterministic) {
  const MorphProblem p = make_morph_problem(targets::analytic_target("sine"), 10);
  OptimizerConfig cfg;
  cfg.max_iterations = 300;
  cfg.seed = 4;
  const RunResult a = solve_morph(p, cfg);
  const RunResult b = solve_morph(p, cfg);
  EXPECT_EQ(a.raw, b.raw);
  EXPECT_EQ(a.trace, b.trace);
}

// ---- writing ----

WriteProblem SmallWrite(int n_units, int samples = 80) {
  WriteProblem p;
  p.n_psi_samples = samples;
  p.units_per_section = split_units(n_units, 0);
  p.target = targets::build_profile(
      targets::normalize_bbox(targets::analytic_target("circle")), samples - 1);
  return p;
}

TEST(SplitUnits, Shapes) {
  EXPECT_EQ(split_units(8, 0), std::vector<int>(8, 1));
  EXPECT_EQ(split_units(10, 3), (std::vector<int>{4, 3, 3}));
  EXPECT_EQ(split_units(3, 5), std::vector<int>(3, 1));
  EXPECT_THROW(split_units(1, 0), std::invalid_argument);
}

TEST(MakeWriteProblem, NormalizesTarget) {
  const WriteProblem p = make_write_problem(targets::analytic_target("circle", {{"R", 7}}), 8);
  EXPECT_NEAR(p.target.total_length, kPi, 1e-4);
  EXPECT_EQ(p.target.s_grid.size(), 400u);
  for (double k : p.target.kappa) EXPECT_NEAR(k, 2.0, 1e-3);
}

TEST(WriteLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ua(0.4, 0.6), ul(-1.0, 0.0), ux(1.0, 3.0),
      uy(-3.0, -1.0);
  for (int mode = 0; mode < 2; ++mode) {
    WriteProblem p = SmallWrite(6);
    p.psi_mode = mode == 0 ? PsiMode::kFixed : PsiMode::kJoint;
    int checked = 0;
    while (checked < 10) {
      std::vector<double> raw;
      for (int j = 0; j < 6; ++j) raw.push_back(raw_from_alpha(ua(rng), p.bounds));
      raw.push_back(ul(rng));
      if (mode == 1) {
        raw.push_back(ux(rng));
        raw.push_back(uy(rng));
      }
      if (write_loss(std::span<const double>(raw), p) >= kInfeasiblePenalty) continue;
      // loss values are O(100); a 1e-5 step keeps roundoff in the reference small
      auto f = [&p](auto x) { return write_loss(x, p); };
      const ad::FiniteDiffReport r = ad::finite_diff_check(f, raw, 1e-5);
      EXPECT_TRUE(r.passed) << "mode " << mode;
      EXPECT_LT(r.max_relative_error, 1e-5);
      ++checked;
    }
  }
}

TEST(WriteLoss, ZeroWeightsLeaveMismatch) {
  WriteProblem p = SmallWrite(5);
  p.weights = {0.0, 0.0, 0.0};
  std::vector<double> raw = write_initial(p, 0);
  const WriteTerms<double> t = write_terms(std::span<const double>(raw), p);
  ASSERT_LT(t.total, kInfeasiblePenalty);
  EXPECT_NEAR(t.total, t.mismatch, 1e-12 * t.mismatch);
}

TEST(WriteLoss, StericTermActsOnlyOnViolation) {
  WriteProblem p = SmallWrite(4);
  p.psi_mode = PsiMode::kFixed;
  p.phi_min = 0.1;
  std::vector<double> raw = {0.1, 0.0, -0.1, 0.05, 0.0};
  p.psi_min = 0.3;
  EXPECT_EQ(write_terms(std::span<const double>(raw), p).steric, 0.0);
  p.psi_min = 0.08;
  const WriteTerms<double> t = write_terms(std::span<const double>(raw), p);
  EXPECT_GT(t.steric, 0.0);
}

TEST(WriteLoss, UniformChainHasNoSmoothnessCost) {
  WriteProblem p = SmallWrite(6);
  std::vector<double> raw(6, raw_from_alpha(0.6, p.bounds));
  raw.push_back(0.0);
  const auto [x, y] = raw_from_psi_range(3.0, 0.3);
  raw.push_back(x);
  raw.push_back(y);
  EXPECT_EQ(write_terms(std::span<const double>(raw), p).smooth, 0.0);
}

TEST(WriteLoss, SingleSectionTracesMonotoneCurvature) {
  // A single section with constant alpha cannot follow a circle exactly:
  // its tip curvature varies monotonically along the sweep.
  WriteProblem p = SmallWrite(2, 120);
  p.units_per_section = {6};
  p.psi_mode = PsiMode::kFixed;
  OptimizerConfig cfg;
  cfg.max_iterations = 800;
  const RunResult r = solve_write(p, cfg);
  const WriteTerms<double> t = write_terms(std::span<const double>(r.raw), p);
  EXPECT_GT(t.mismatch, 1e-3);
  EXPECT_LT(t.mismatch, 2.0 * 4 * kPi * kPi);
  const kinematics::TipTrajectory traj = write_trajectory(r);
  std::vector<double> turn;
  for (size_t k = 2; k < traj.points.size(); ++k) {
    const Point a = traj.points[k - 1] - traj.points[k - 2];
    const Point b = traj.points[k] - traj.points[k - 1];
    turn.push_back(std::atan2(cross(a, b), dot(a, b)) / (0.5 * (norm(a) + norm(b))));
  }
  int changes = 0;
  for (size_t k = 2; k < turn.size(); ++k) {
    if ((turn[k] - turn[k - 1]) * (turn[k - 1] - turn[k - 2]) < 0) ++changes;
  }
  EXPECT_LE(changes, 2);
}

TEST(WriteLoss, InfeasibleSweepIsPenalized) {
  WriteProblem p = SmallWrite(3);
  p.psi_mode = PsiMode::kFixed;
  const std::vector<double> raw = {raw_from_alpha(0.5, p.bounds), raw_from_alpha(0.9, p.bounds),
                                   raw_from_alpha(0.5, p.bounds), 0.0};
  const ad::ValueAndGradient g = ad::grad(
      [&p](std::span<const ad::Var> x) { return write_loss(x, p); }, std::span<const double>(raw));
  EXPECT_GE(g.value, kInfeasiblePenalty);
  for (double d : g.gradient) EXPECT_TRUE(std::isfinite(d));
}

TEST(SolveWrite, SameSeedIsBitIdentical) {
  const WriteProblem p = SmallWrite(5);
  OptimizerConfig cfg;
  cfg.max_iterations = 150;
  cfg.seed = 7;
  const RunResult a = solve_write(p, cfg);
  const RunResult b = solve_write(p, cfg);
  EXPECT_EQ(a.raw, b.raw);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.loss, *std::min_element(a.trace.begin(), a.trace.end()));
  for (double al : a.alphas) {
    EXPECT_GT(al, p.bounds.min);
    EXPECT_LT(al, p.bounds.max);
  }
}

TEST(SolveWrite, TrajectoryMatchesLossSweep) {
  const WriteProblem p = SmallWrite(5);
  OptimizerConfig cfg;
  cfg.max_iterations = 50;
  const RunResult r = solve_write(p, cfg);
  const kinematics::TipTrajectory t = write_trajectory(r);
  ASSERT_EQ(t.points.size(), static_cast<size_t>(p.n_psi_samples));
  EXPECT_EQ(t.psi_grid.front(), r.psi_max);
  EXPECT_EQ(t.psi_grid.back(), r.psi_min);
}

TEST(GridSearch, SingleCellEqualsSolveWrite) {
  const WriteProblem p = SmallWrite(4);
  OptimizerConfig cfg;
  cfg.max_iterations = 100;
  cfg.seed = 2;
  GridSearchOptions opt;
  opt.n_candidates = {4};
  opt.restarts = 1;
  const GridSearchResult g = grid_search(p, opt, cfg);
  const RunResult direct = solve_write(p, cfg);
  ASSERT_EQ(g.table.size(), 1u);
  EXPECT_EQ(g.best.raw, direct.raw);
  EXPECT_EQ(g.best.loss, direct.loss);
  EXPECT_EQ(g.table[0].seed, 2u);
}

TEST(GridSearch, TableMinimumIsBestAndThreadIndependent) {
  const WriteProblem p = SmallWrite(4);
  OptimizerConfig cfg;
  cfg.max_iterations = 80;
  GridSearchOptions opt;
  opt.n_candidates = {3, 4, 5};
  opt.restarts = 3;
  int rows_seen = 0;
  opt.on_row = [&rows_seen](const GridRow&) { ++rows_seen; };
  const GridSearchResult one = grid_search(p, opt, cfg);
  EXPECT_EQ(rows_seen, 9);
  opt.threads = 3;
  opt.on_row = nullptr;
  const GridSearchResult three = grid_search(p, opt, cfg);
  ASSERT_EQ(one.table.size(), 9u);
  ASSERT_EQ(three.table.size(), 9u);
  double min_loss = one.table[0].loss;
  for (size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(one.table[i].n_units, three.table[i].n_units);
    EXPECT_EQ(one.table[i].seed, three.table[i].seed);
    EXPECT_EQ(one.table[i].loss, three.table[i].loss);
    min_loss = std::min(min_loss, one.table[i].loss);
  }
  EXPECT_EQ(one.best.loss, min_loss);
  EXPECT_EQ(one.table[0].n_units, 3);
  EXPECT_EQ(one.table[8].seed, 2u);
}

TEST(GridSearch, CancelledSearchKeepsCompletedRows) {
  const WriteProblem p = SmallWrite(4);
  std::atomic<bool> cancel{false};
  OptimizerConfig cfg;
  cfg.max_iterations = 40;
  cfg.cancel = &cancel;
  GridSearchOptions opt;
  opt.n_candidates = {3, 4};
  opt.restarts = 3;
  opt.on_row = [&cancel](const GridRow&) { cancel = true; };
  const GridSearchResult g = grid_search(p, opt, cfg);
  EXPECT_TRUE(g.cancelled);
  EXPECT_EQ(g.table.size(), 1u);
}

TEST(GridSearch, DefaultGrid) {
  const std::vector<int> g = default_grid();
  EXPECT_EQ(g.size(), 19u);
  EXPECT_EQ(g.front(), 10);
  EXPECT_EQ(g.back(), 100);
}

TEST(ResolveThreads, EnvironmentCap) {
  setenv("SCISSOR_THREADS", "2", 1);
  EXPECT_EQ(resolve_threads(8), 2);
  EXPECT_EQ(resolve_threads(1), 1);
  setenv("SCISSOR_THREADS", "junk", 1);
  EXPECT_EQ(resolve_threads(3), 3);
  unsetenv("SCISSOR_THREADS");
  EXPECT_GE(resolve_threads(0), 1);
}

TEST(Uniform01, Range) {
  EXPECT_EQ(uniform01(0), 0.0);
  EXPECT_LT(uniform01(~0ull), 1.0);
}

}  // namespace
}  // namespace scissor::optimize
