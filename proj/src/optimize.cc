#include "scissor/optimize.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

namespace scissor::optimize {
namespace {

constexpr double kPi = std::numbers::pi;

double Logit(double p) { return std::log(p / (1.0 - p)); }

// Inverse of the logistic map onto (lo, hi), clamped just inside the range.
double RawFor(double value, double lo, double hi) {
  double u = (value - lo) / (hi - lo);
  u = std::clamp(u, 1e-12, 1.0 - 1e-12);
  return Logit(u);
}

std::vector<double> DrawAlphas(int count, const AlphaBounds& b, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> alphas(count);
  for (double& a : alphas) {
    const double u = uniform01(rng());
    a = (seed == 0) ? 0.45 + 0.1 * u : b.min + (b.max - b.min) * u;
  }
  return alphas;
}

template <typename Loss>
Objective MakeObjective(Loss loss) {
  return [loss](const std::vector<double>& x) {
    return ad::grad([&](std::span<const ad::Var> v) { return loss(v); },
                    std::span<const double>(x));
  };
}

}  // namespace

double uniform01(uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

int resolve_threads(int requested) {
  int n = requested > 0 ? requested
                        : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("SCISSOR_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) n = std::min<long>(n, cap);
  }
  return std::max(1, n);
}

void Validate(const AlphaBounds& b) {
  if (!(b.min > 0.0 && b.min < 0.5 && b.max > 0.5 && b.max < 1.0)) {
    throw std::invalid_argument("alpha bounds must satisfy 0 < min < 0.5 < max < 1");
  }
}

double raw_from_alpha(double alpha, const AlphaBounds& b) {
  return RawFor(alpha, b.min, b.max);
}

double raw_from_length(double l, double l_max) {
  if (!(l > 0.0)) throw std::invalid_argument("member length must be positive");
  if (l_max > 0.0) return RawFor(l, 0.0, l_max);
  return std::log(l);
}

double raw_from_psi(double psi) { return RawFor(psi, kPsiMargin, kPi - kPsiMargin); }

std::pair<double, double> raw_from_psi_range(double psi_max, double psi_min) {
  if (!(psi_min < psi_max)) throw std::invalid_argument("need psi_min < psi_max");
  return {RawFor(psi_max, kPsiMargin, kPi - kPsiMargin),
          RawFor(psi_min, kPsiMargin, psi_max)};
}

ad::ParamVector transform_params(const ad::ParamVector& unconstrained,
                                 const AlphaBounds& bounds, double l_max) {
  ad::ParamVector out;
  const int hi = unconstrained.Find("psi_max_raw");
  const int lo = unconstrained.Find("psi_min_raw");
  for (size_t i = 0; i < unconstrained.size(); ++i) {
    const std::string& name = unconstrained.names()[i];
    const double v = unconstrained[i];
    if (name.rfind("alpha_", 0) == 0) {
      out.Add(name, alpha_from_raw(v, bounds));
    } else if (name == "l") {
      out.Add(name, length_from_raw(v, l_max));
    } else if (name == "psi") {
      out.Add(name, psi_from_raw(v));
    } else if (name == "psi_max_raw" || name == "psi_min_raw") {
      if (hi < 0 || lo < 0) throw std::invalid_argument("psi range needs both endpoints");
      if (static_cast<int>(i) == hi) {
        const auto [pmax, pmin] = psi_range_from_raw(unconstrained[hi], unconstrained[lo]);
        out.Add("psi_max", pmax);
        out.Add("psi_min", pmin);
      }
    } else {
      out.Add(name, v);
    }
  }
  return out;
}

AdamResult adam(const Objective& objective, std::vector<double> x,
                const OptimizerConfig& config) {
  AdamResult out;
  const size_t n = x.size();
  std::vector<double> m(n, 0.0), v(n, 0.0);
  out.best_x = x;
  double b1t = 1.0, b2t = 1.0;
  for (int it = 1; it <= config.max_iterations; ++it) {
    if (config.cancel != nullptr && config.cancel->load(std::memory_order_relaxed)) {
      out.cancelled = true;
      out.message = "cancelled";
      break;
    }
    ad::ValueAndGradient g;
    try {
      g = objective(x);
    } catch (const ad::NanError& e) {
      out.message = std::string("stopped at iteration ") + std::to_string(it) + ": " + e.what();
      break;
    }
    out.iterations = it;
    if (!std::isfinite(g.value)) {
      out.message = "non-finite loss at iteration " + std::to_string(it);
      break;
    }
    out.trace.push_back(g.value);
    if (g.value < out.best_loss) {
      out.best_loss = g.value;
      out.best_x = x;
    }
    if (!std::all_of(g.gradient.begin(), g.gradient.end(),
                     [](double d) { return std::isfinite(d); })) {
      out.message = "non-finite gradient at iteration " + std::to_string(it);
      break;
    }
    const size_t k = out.trace.size();
    if (config.window > 0 && k > static_cast<size_t>(config.window) &&
        std::abs(out.trace[k - 1] - out.trace[k - 1 - config.window]) < config.tolerance) {
      out.converged = true;
      break;
    }
    b1t *= config.beta1;
    b2t *= config.beta2;
    for (size_t i = 0; i < n; ++i) {
      const double gi = g.gradient[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      const double mh = m[i] / (1.0 - b1t);
      const double vh = v[i] / (1.0 - b2t);
      x[i] -= config.learning_rate * mh / (std::sqrt(vh) + config.epsilon);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Morphing

MorphProblem make_morph_problem(const targets::TargetCurve& curve, int n_units,
                                double smoothing) {
  if (n_units < 4) throw std::invalid_argument("morphing needs at least 4 units");
  MorphProblem p;
  p.n_units = n_units;
  // nodes are spaced for the chain, curvature is measured on a finer grid
  // so that it does not depend on the unit count
  p.target = targets::arclength_parameterize(curve, n_units - 1);
  const targets::ArcLengthProfile fine = targets::build_profile(
      curve, std::max(200, 4 * (n_units - 1)), smoothing < 0 ? -1.0 : smoothing);
  p.target.kappa.resize(p.target.s_grid.size());
  std::vector<double> fine_s = fine.s_grid;
  for (size_t j = 0; j < p.target.s_grid.size(); ++j) {
    p.target.kappa[j] = ad::interp_linear(std::span<const double>(fine_s),
                                          std::span<const double>(fine.kappa),
                                          p.target.s_grid[j]);
  }
  return p;
}

void Validate(const MorphProblem& p) {
  Validate(p.bounds);
  if (p.n_units < 2) throw std::invalid_argument("morphing needs at least 2 units");
  if (p.target.nodes.size() != static_cast<size_t>(p.n_units) ||
      p.target.kappa.size() != p.target.nodes.size()) {
    throw std::invalid_argument("morph target must have one node and curvature per unit");
  }
  if (p.weights.kappa < 0 || p.weights.tip < 0 || p.weights.rot < 0) {
    throw std::invalid_argument("morph weights must be nonnegative");
  }
  if (p.l_max < 0) throw std::invalid_argument("l_max must be nonnegative");
}

std::vector<std::string> morph_param_names(int n_units) {
  std::vector<std::string> names = {"l", "psi", "beta0"};
  for (int j = 1; j <= n_units; ++j) names.push_back("alpha_" + std::to_string(j));
  return names;
}

MorphDecoded decode_morph(const std::vector<double>& raw, const MorphProblem& p) {
  MorphDecoded d;
  d.l = length_from_raw(raw[0], p.l_max);
  d.psi = psi_from_raw(raw[1]);
  d.beta0 = raw[2];
  for (int j = 0; j < p.n_units; ++j) d.alphas.push_back(alpha_from_raw(raw[3 + j], p.bounds));
  return d;
}

double morph_loss(const ad::ParamVector& params, const MorphProblem& p) {
  return morph_loss(std::span<const double>(params.values()), p);
}

std::vector<double> morph_initial(const MorphProblem& p, uint64_t seed) {
  const double psi = kPi / 2;
  // symmetric units advance l cos(psi / 2) per unit
  double l = p.target.spacing() / std::cos(0.5 * psi);
  if (p.l_max > 0.0) l = std::min(l, 0.9 * p.l_max);
  std::vector<double> raw = {raw_from_length(l, p.l_max), raw_from_psi(psi),
                             p.target.initial_tangent};
  for (double a : DrawAlphas(p.n_units, p.bounds, seed)) {
    raw.push_back(raw_from_alpha(a, p.bounds));
  }
  return raw;
}

RunResult solve_morph(const MorphProblem& p, const OptimizerConfig& config,
                      std::vector<double> init) {
  Validate(p);
  if (init.empty()) init = morph_initial(p, config.seed);
  if (init.size() != static_cast<size_t>(p.n_units + 3)) {
    throw std::invalid_argument("morph initial vector has the wrong size");
  }
  const AdamResult a = adam(
      MakeObjective([&p](std::span<const ad::Var> v) { return morph_loss(v, p); }), init,
      config);
  RunResult r;
  r.kind = "morph";
  r.names = morph_param_names(p.n_units);
  r.raw = a.best_x;
  const MorphDecoded d = decode_morph(r.raw, p);
  r.alphas = d.alphas;
  r.l = d.l;
  r.psi = d.psi;
  r.beta0 = d.beta0;
  r.base = p.target.nodes.front();
  r.loss = morph_loss(std::span<const double>(r.raw), p);
  r.trace = a.trace;
  r.seed = config.seed;
  r.iterations = a.iterations;
  r.converged = a.converged;
  r.cancelled = a.cancelled;
  r.message = a.message;
  try {
    const kinematics::ChainConfig c = morph_shape(r);
    const double miss = norm(c.tip() - p.target.nodes.back());
    r.feasible = miss <= 0.05 * p.target.total_length;
    if (!r.feasible && r.message.empty()) {
      r.message = "tip misses the target end by " + std::to_string(miss);
    }
  } catch (const kinematics::InfeasibleAssembly& e) {
    r.feasible = false;
    if (r.message.empty()) r.message = e.what();
  }
  return r;
}

kinematics::ChainConfig morph_shape(const RunResult& r) {
  kinematics::ChainSpec spec{r.alphas, r.l, r.base, r.beta0};
  return kinematics::assemble_chain(spec, r.psi);
}

// ---------------------------------------------------------------------------
// Writing

std::vector<int> split_units(int n_units, int sections) {
  if (n_units < 2) throw std::invalid_argument("writing needs at least 2 units");
  if (sections <= 0 || sections > n_units) sections = n_units;
  std::vector<int> out(sections, n_units / sections);
  for (int j = 0; j < n_units % sections; ++j) ++out[j];
  return out;
}

WriteProblem make_write_problem(const targets::TargetCurve& curve, int n_units,
                                int sections, double smoothing) {
  WriteProblem p;
  p.units_per_section = split_units(n_units, sections);
  p.target = targets::build_profile(targets::normalize_bbox(curve), p.n_psi_samples - 1,
                                    smoothing);
  return p;
}

void Validate(const WriteProblem& p) {
  Validate(p.bounds);
  if (p.units_per_section.empty()) throw std::invalid_argument("writing needs sections");
  int total = 0;
  for (int n : p.units_per_section) {
    if (n < 1) throw std::invalid_argument("every section needs a unit");
    total += n;
  }
  if (total < 2) throw std::invalid_argument("writing needs at least 2 units");
  if (!(p.psi_min > 0.0 && p.psi_max > p.psi_min && p.psi_max < kPi)) {
    throw std::invalid_argument("need 0 < psi_min < psi_max < pi");
  }
  if (!(p.phi_min > 0.0)) throw std::invalid_argument("phi_min must be positive");
  if (p.n_psi_samples < 5) throw std::invalid_argument("need at least 5 sweep samples");
  if (p.target.kappa.size() != p.target.s_grid.size() || p.target.s_grid.size() < 2) {
    throw std::invalid_argument("write target has no curvature profile");
  }
  if (p.weights.smooth < 0 || p.weights.length < 0 || p.weights.steric < 0) {
    throw std::invalid_argument("write weights must be nonnegative");
  }
}

std::vector<std::string> write_param_names(const WriteProblem& p) {
  std::vector<std::string> names;
  for (size_t j = 1; j <= p.units_per_section.size(); ++j) {
    names.push_back("alpha_" + std::to_string(j));
  }
  names.push_back("l");
  if (p.psi_mode == PsiMode::kJoint) {
    names.push_back("psi_max_raw");
    names.push_back("psi_min_raw");
  }
  return names;
}

double write_loss(const ad::ParamVector& params, const WriteProblem& p) {
  return write_loss(std::span<const double>(params.values()), p);
}

std::vector<double> write_initial(const WriteProblem& p, uint64_t seed) {
  std::vector<double> raw;
  for (double a : DrawAlphas(static_cast<int>(p.units_per_section.size()), p.bounds, seed)) {
    raw.push_back(raw_from_alpha(a, p.bounds));
  }
  raw.push_back(0.0);  // l = 1
  if (p.psi_mode == PsiMode::kJoint) {
    const auto [x, y] = raw_from_psi_range(p.psi_max, p.psi_min);
    raw.push_back(x);
    raw.push_back(y);
  }
  return raw;
}

RunResult solve_write(const WriteProblem& p, const OptimizerConfig& config,
                      std::vector<double> init) {
  Validate(p);
  if (init.empty()) init = write_initial(p, config.seed);
  const std::vector<std::string> names = write_param_names(p);
  if (init.size() != names.size()) {
    throw std::invalid_argument("write initial vector has the wrong size");
  }
  const AdamResult a = adam(
      MakeObjective([&p](std::span<const ad::Var> v) { return write_loss(v, p); }), init,
      config);
  RunResult r;
  r.kind = "write";
  r.names = names;
  r.raw = a.best_x;
  const size_t m = p.units_per_section.size();
  for (size_t j = 0; j < m; ++j) r.alphas.push_back(alpha_from_raw(r.raw[j], p.bounds));
  r.units_per_section = p.units_per_section;
  r.l = length_from_raw(r.raw[m]);
  if (p.psi_mode == PsiMode::kJoint) {
    std::tie(r.psi_max, r.psi_min) = psi_range_from_raw(r.raw[m + 1], r.raw[m + 2]);
  } else {
    r.psi_max = p.psi_max;
    r.psi_min = p.psi_min;
  }
  r.n_psi_samples = p.n_psi_samples;
  r.trace = a.trace;
  r.seed = config.seed;
  r.iterations = a.iterations;
  r.converged = a.converged;
  r.cancelled = a.cancelled;
  r.message = a.message;
  try {
    r.loss = write_loss(std::span<const double>(r.raw), p);
    r.feasible = r.loss < kInfeasiblePenalty;
    if (!r.feasible && r.message.empty()) r.message = "sweep passes through an infeasible assembly";
  } catch (const std::exception& e) {
    r.loss = std::numeric_limits<double>::infinity();
    r.feasible = false;
    r.message = e.what();
  }
  return r;
}

kinematics::SectionedSpec write_spec(const RunResult& r) {
  kinematics::SectionedSpec spec;
  for (size_t j = 0; j < r.alphas.size(); ++j) {
    spec.sections.push_back({r.units_per_section.at(j), r.alphas[j]});
  }
  spec.l = r.l;
  spec.base_position = {0.0, 0.0};
  spec.base_direction = kinematics::RadialForHeading(0.0);
  return spec;
}

kinematics::TipTrajectory write_trajectory(const RunResult& r) {
  return kinematics::sweep_tip(write_spec(r), r.psi_max, r.psi_min, r.n_psi_samples);
}

// ---------------------------------------------------------------------------
// Grid search

std::vector<int> default_grid() {
  std::vector<int> g;
  for (int n = 10; n <= 100; n += 5) g.push_back(n);
  return g;
}

GridSearchResult grid_search(const WriteProblem& base, const GridSearchOptions& options,
                             const OptimizerConfig& config) {
  if (options.restarts < 1) throw std::invalid_argument("restarts must be at least 1");
  if (options.n_candidates.empty()) throw std::invalid_argument("no unit counts to search");
  for (int n : options.n_candidates) {
    if (n < 2) throw std::invalid_argument("unit counts must be at least 2");
  }
  struct Cell {
    int n;
    uint64_t seed;
  };
  std::vector<Cell> cells;
  for (int n : options.n_candidates) {
    for (int r = 0; r < options.restarts; ++r) {
      cells.push_back({n, config.seed + static_cast<uint64_t>(r)});
    }
  }
  std::vector<RunResult> runs(cells.size());
  std::vector<GridRow> rows(cells.size());
  std::vector<char> done(cells.size(), 0);
  std::atomic<size_t> next{0};
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      if (config.cancel != nullptr && config.cancel->load()) return;
      WriteProblem p = base;
      p.units_per_section = split_units(cells[i].n, options.sections);
      OptimizerConfig c = config;
      c.seed = cells[i].seed;
      GridRow row;
      row.n_units = cells[i].n;
      row.seed = cells[i].seed;
      RunResult run;
      try {
        run = solve_write(p, c);
        row.loss = run.loss;
        row.feasible = run.feasible;
        row.message = run.message;
        row.failed = !std::isfinite(run.loss);
      } catch (const std::exception& e) {
        row.failed = true;
        row.message = e.what();
        run.seed = c.seed;
      }
      // a cancelled run is incomplete and is left out of the table
      if (run.cancelled) return;
      std::lock_guard<std::mutex> lock(mu);
      runs[i] = std::move(run);
      rows[i] = row;
      done[i] = 1;
      if (options.on_row) options.on_row(row);
    }
  };
  const int threads = std::min<int>(resolve_threads(options.threads),
                                    static_cast<int>(cells.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  GridSearchResult out;
  out.cancelled = config.cancel != nullptr && config.cancel->load();
  for (size_t i = 0; i < cells.size(); ++i) {
    if (!done[i]) continue;
    out.table.push_back(rows[i]);
    out.runs.push_back(std::move(runs[i]));
  }
  size_t best = out.table.size();
  for (size_t i = 0; i < out.table.size(); ++i) {
    if (out.table[i].failed) continue;
    if (best == out.table.size() || out.table[i].loss < out.table[best].loss) best = i;
  }
  if (best < out.table.size()) out.best = out.runs[best];
  return out;
}

}  // namespace scissor::optimize
