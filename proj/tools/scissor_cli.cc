// scissor: command-line front end for design, simulation and analysis of
// scissor-linkage chains.
//
// Exit codes: 0 success, 1 internal error, 2 invalid input, 3 infeasible
// design, 130 interrupted.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scissor/analysis.h"
#include "scissor/geometry.h"
#include "scissor/io.h"
#include "scissor/kinematics.h"
#include "scissor/optimize.h"
#include "scissor/svg.h"
#include "scissor/targets.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scissor;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitInterrupted = 130;

std::atomic<bool> g_cancel{false};

extern "C" void OnSigint(int) { g_cancel.store(true); }

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON config: {"key": value, "subcommand": {"key": value}}. Arrays become a
// single comma-joined value, matching the list syntax of the flags.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    return "{}";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    Collect(j, {}, &items);
    return items;
  }

 private:
  static std::string Scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void Collect(const json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>* items) {
    for (const auto& [key, v] : j.items()) {
      if (v.is_object()) {
        std::vector<std::string> p = parents;
        p.push_back(key);
        Collect(v, p, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (v.is_array()) {
        std::string joined;
        for (size_t i = 0; i < v.size(); ++i) joined += (i ? "," : "") + Scalar(v[i]);
        item.inputs = {joined};
      } else {
        item.inputs = {Scalar(v)};
      }
      items->push_back(std::move(item));
    }
  }
};

// ---- value parsing ----

std::vector<std::string> Split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

double ParseDouble(const std::string& s, const std::string& what) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw UsageError(what + ": '" + s + "' is not a number");
  }
  return v;
}

int ParseInt(const std::string& s, const std::string& what) {
  const double v = ParseDouble(s, what);
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw UsageError(what + ": '" + s + "' is not an integer");
  }
  return static_cast<int>(v);
}

std::vector<double> ParseDoubles(const std::string& s, size_t count, const std::string& what) {
  std::vector<double> out;
  for (const std::string& part : Split(s, ',')) out.push_back(ParseDouble(part, what));
  if (count && out.size() != count) {
    throw UsageError(what + ": expected " + std::to_string(count) + " comma-separated values");
  }
  if (out.empty()) throw UsageError(what + ": no values");
  return out;
}

// "a,b,c", "lo:hi" or "lo:hi:step".
std::vector<int> ParseIntList(const std::string& s, const std::string& what) {
  std::vector<int> out;
  if (s.find(':') != std::string::npos) {
    const std::vector<std::string> p = Split(s, ':');
    if (p.size() != 2 && p.size() != 3) throw UsageError(what + ": use lo:hi or lo:hi:step");
    const int lo = ParseInt(p[0], what), hi = ParseInt(p[1], what);
    const int step = p.size() == 3 ? ParseInt(p[2], what) : 1;
    if (step <= 0 || hi < lo) throw UsageError(what + ": need lo <= hi and step > 0");
    for (int v = lo; v <= hi; v += step) out.push_back(v);
  } else {
    for (const std::string& part : Split(s, ',')) out.push_back(ParseInt(part, what));
  }
  if (out.empty()) throw UsageError(what + ": no values");
  return out;
}

std::pair<double, double> ParsePair(const std::string& s, const std::string& what) {
  const std::vector<std::string> p = Split(s, ':');
  if (p.size() != 2) throw UsageError(what + ": use a:b");
  return {ParseDouble(p[0], what), ParseDouble(p[1], what)};
}

// ---- output plumbing ----

// Collects the files of one command, writes them atomically and records
// their hashes in manifest.json.
class OutputDir {
 public:
  OutputDir(fs::path dir, std::string command, uint64_t seed) : dir_(std::move(dir)) {
    manifest_.command = std::move(command);
    manifest_.seed = seed;
    manifest_.started = io::utc_timestamp();
  }

  void Write(const std::string& name, const std::string& content) {
    std::lock_guard<std::mutex> lock(mu_);
    io::write_file_atomic(dir_ / name, content);
    manifest_.output_hashes[name] = io::hex64(io::fnv1a64(content));
  }

  void AddInput(const std::string& path) {
    manifest_.input_hashes[path] = io::hex64(io::fnv1a64(io::read_file(path)));
  }

  void SetConfig(const json& config) { manifest_.config = config; }

  void Finish() {
    std::lock_guard<std::mutex> lock(mu_);
    manifest_.finished = io::utc_timestamp();
    io::write_file_atomic(dir_ / "manifest.json", io::dump(io::manifest_to_json(manifest_)));
  }

 private:
  fs::path dir_;
  io::Manifest manifest_;
  std::mutex mu_;
};

std::string F(double v) { return io::format_double(v); }

std::string ShapeCsv(const kinematics::ChainConfig& c) {
  io::Table t;
  t.header = {"unit", "x", "y", "phi"};
  for (size_t j = 0; j < c.centers.size(); ++j) {
    t.AddRow({std::to_string(j + 1), F(c.centers[j].x), F(c.centers[j].y), F(c.phis[j])});
  }
  return t.ToCsv();
}

std::string TrajectoryCsv(const kinematics::TipTrajectory& tr) {
  io::Table t;
  t.header = {"psi", "x", "y"};
  for (size_t k = 0; k < tr.points.size(); ++k) {
    t.AddRow({F(tr.psi_grid[k]), F(tr.points[k].x), F(tr.points[k].y)});
  }
  return t.ToCsv();
}

svg::Series CurveSeries(const std::vector<Point>& pts, bool closed, const std::string& label,
                        const std::string& color, bool dashed) {
  svg::Series s;
  s.label = label;
  s.color = color;
  s.dashed = dashed;
  for (const Point& p : pts) {
    s.x.push_back(p.x);
    s.y.push_back(p.y);
  }
  if (closed && !pts.empty()) {
    s.x.push_back(pts.front().x);
    s.y.push_back(pts.front().y);
  }
  return s;
}

// Shared optimizer flags.
struct SolverFlags {
  uint64_t seed = 0;
  int iterations = 5000;
  double learning_rate = 0.01;
  double tolerance = 1e-10;
  std::string alpha_bounds = "0.05:0.95";
  double smoothing = -1.0;
  int threads = 1;
  bool quiet = false;

  void Register(CLI::App* app) {
    app->add_option("--seed", seed, "Random seed (all randomness derives from it)");
    app->add_option("--iterations", iterations, "Adam iterations per run");
    app->add_option("--lr", learning_rate, "Adam learning rate");
    app->add_option("--tolerance", tolerance, "Stop when the loss changes less over 100 steps");
    app->add_option("--alpha-bounds", alpha_bounds, "Aspect ratio bounds min:max");
    app->add_option("--smoothing", smoothing,
                    "Gaussian width for target curvature (negative = default)");
    app->add_option("--threads", threads, "Worker threads (0 = all cores, capped by SCISSOR_THREADS)");
    app->add_flag("--quiet", quiet, "No progress output");
  }

  optimize::OptimizerConfig Config() const {
    if (iterations < 1) throw UsageError("--iterations must be >= 1");
    if (!(learning_rate > 0.0)) throw UsageError("--lr must be > 0");
    optimize::OptimizerConfig c;
    c.seed = seed;
    c.max_iterations = iterations;
    c.learning_rate = learning_rate;
    c.tolerance = tolerance;
    c.cancel = &g_cancel;
    return c;
  }

  optimize::AlphaBounds Bounds() const {
    const auto [lo, hi] = ParsePair(alpha_bounds, "--alpha-bounds");
    optimize::AlphaBounds b{lo, hi};
    optimize::Validate(b);
    return b;
  }

  json Echo() const {
    return {{"seed", seed},         {"iterations", iterations},     {"lr", learning_rate},
            {"tolerance", tolerance}, {"alpha_bounds", alpha_bounds}, {"smoothing", smoothing}};
  }
};

targets::TargetCurve LoadTarget(const std::string& spec, OutputDir* out) {
  if (!targets::is_analytic(spec)) {
    if (!fs::exists(spec)) throw UsageError("target file not found: " + spec);
    out->AddInput(spec);
  }
  return targets::parse_target(spec);
}

// ---- morph ----

struct MorphFlags {
  std::string target;
  int units = 0;
  std::string weights = "1,1,0.1";
  double l_max = 0.0;
  std::string out;
  SolverFlags solver;
};

int RunMorph(const MorphFlags& f) {
  if (f.units < 2) throw UsageError("--units must be >= 2 (got " + std::to_string(f.units) + ")");
  const std::vector<double> w = ParseDoubles(f.weights, 3, "--weights");
  OutputDir out(f.out, "morph", f.solver.seed);
  const targets::TargetCurve curve = LoadTarget(f.target, &out);
  optimize::MorphProblem p = optimize::make_morph_problem(curve, f.units, f.solver.smoothing);
  p.weights = {w[0], w[1], w[2]};
  p.bounds = f.solver.Bounds();
  p.l_max = f.l_max;
  optimize::Validate(p);

  json echo = f.solver.Echo();
  echo["target"] = f.target;
  echo["units"] = f.units;
  echo["weights"] = w;
  echo["l_max"] = f.l_max;
  out.SetConfig(echo);

  std::signal(SIGINT, OnSigint);
  const optimize::RunResult r = optimize::solve_morph(p, f.solver.Config());
  const kinematics::ChainConfig shape = optimize::morph_shape(r);
  out.Write("design.json", io::dump(io::run_result_to_json(r, echo)));
  out.Write("shape.csv", ShapeCsv(shape));
  svg::PlotOptions po;
  po.title = "Target and deployed shape";
  po.equal_aspect = true;
  po.x_label = "x";
  po.y_label = "y";
  std::vector<svg::Series> series = {
      CurveSeries(curve.points, curve.closed, "target", "#888888", true),
      CurveSeries(shape.centers, false, "mechanism", "#d62728", false)};
  series.back().markers = true;
  out.Write("overlay.svg", svg::plot(series, po));
  out.Finish();

  if (!f.solver.quiet) {
    std::fprintf(stderr, "morph: loss %.6g after %d iterations, psi %.6f, l %.6f\n", r.loss,
                 r.iterations, r.psi, r.l);
  }
  if (r.cancelled) {
    std::fprintf(stderr, "morph: interrupted, best iterate written\n");
    return kExitInterrupted;
  }
  if (!r.feasible) {
    std::fprintf(stderr, "morph: infeasible design: %s\n",
                 r.message.empty() ? "tip misses the target end" : r.message.c_str());
    return kExitInfeasible;
  }
  return kExitOk;
}

// ---- write ----

struct WriteFlags {
  std::string target;
  int units = 0;
  std::string grid;
  int sections = 0;
  int restarts = 15;
  std::string weights = "0.01,1,10";
  double phi_min = 0.1;
  std::string psi_range = "3.0:0.3";
  std::string psi_mode = "joint";
  int samples = 400;
  std::string out;
  SolverFlags solver;
};

std::string GridCsv(const std::map<std::pair<int, uint64_t>, optimize::GridRow>& rows) {
  io::Table t;
  t.header = {"n_units", "seed", "loss", "feasible", "failed", "message"};
  for (const auto& [key, r] : rows) {
    t.AddRow({std::to_string(r.n_units), std::to_string(r.seed), F(r.loss),
              r.feasible ? "1" : "0", r.failed ? "1" : "0", r.message});
  }
  return t.ToCsv();
}

int RunWrite(const WriteFlags& f) {
  std::vector<int> grid;
  if (!f.grid.empty() && f.units != 0) throw UsageError("give either --units or --grid, not both");
  if (!f.grid.empty()) {
    grid = ParseIntList(f.grid, "--grid");
  } else if (f.units != 0) {
    grid = {f.units};
  } else {
    throw UsageError("one of --units or --grid is required");
  }
  for (int n : grid) {
    if (n < 2) throw UsageError("unit counts must be >= 2 (got " + std::to_string(n) + ")");
  }
  if (f.restarts < 1) throw UsageError("--restarts must be >= 1");
  if (f.sections < 0) throw UsageError("--sections must be >= 0");
  if (f.samples < 3) throw UsageError("--samples must be >= 3");
  const std::vector<double> w = ParseDoubles(f.weights, 3, "--weights");
  const auto [psi_max, psi_min] = ParsePair(f.psi_range, "--psi-range");
  if (f.psi_mode != "joint" && f.psi_mode != "fixed") {
    throw UsageError("--psi-mode must be joint or fixed");
  }

  OutputDir out(f.out, "write", f.solver.seed);
  const targets::TargetCurve curve = LoadTarget(f.target, &out);
  optimize::WriteProblem p =
      optimize::make_write_problem(curve, grid.front(), f.sections, f.solver.smoothing);
  p.n_psi_samples = f.samples;
  if (p.target.s_grid.size() != static_cast<size_t>(f.samples)) {
    p.target = targets::build_profile(targets::normalize_bbox(curve), f.samples - 1,
                                      f.solver.smoothing);
  }
  p.weights = {w[0], w[1], w[2]};
  p.phi_min = f.phi_min;
  p.psi_max = psi_max;
  p.psi_min = psi_min;
  p.psi_mode = f.psi_mode == "joint" ? optimize::PsiMode::kJoint : optimize::PsiMode::kFixed;
  p.bounds = f.solver.Bounds();
  optimize::Validate(p);

  json echo = f.solver.Echo();
  echo["target"] = f.target;
  echo["grid"] = grid;
  echo["sections"] = f.sections;
  echo["restarts"] = f.restarts;
  echo["weights"] = w;
  echo["phi_min"] = f.phi_min;
  echo["psi_range"] = {psi_max, psi_min};
  echo["psi_mode"] = f.psi_mode;
  echo["samples"] = f.samples;
  out.SetConfig(echo);

  optimize::GridSearchOptions go;
  go.n_candidates = grid;
  go.restarts = f.restarts;
  go.sections = f.sections;
  go.threads = f.solver.threads;
  std::map<std::pair<int, uint64_t>, optimize::GridRow> done;
  const size_t total = grid.size() * static_cast<size_t>(f.restarts);
  go.on_row = [&](const optimize::GridRow& row) {
    done[{row.n_units, row.seed}] = row;
    // keep a complete table on disk after every run
    out.Write("gridsearch.csv", GridCsv(done));
    if (!f.solver.quiet) {
      std::fprintf(stderr, "write: [%zu/%zu] N=%d seed=%llu loss=%.6g%s\n", done.size(), total,
                   row.n_units, static_cast<unsigned long long>(row.seed), row.loss,
                   row.failed ? " (failed)" : "");
    }
  };

  std::signal(SIGINT, OnSigint);
  const optimize::GridSearchResult g = optimize::grid_search(p, go, f.solver.Config());
  std::map<std::pair<int, uint64_t>, optimize::GridRow> table;
  for (const optimize::GridRow& r : g.table) table[{r.n_units, r.seed}] = r;
  out.Write("gridsearch.csv", GridCsv(table));

  bool have_best = false;
  for (const optimize::GridRow& r : g.table) have_best = have_best || !r.failed;
  if (have_best) {
    out.Write("design.json", io::dump(io::run_result_to_json(g.best, echo)));
    out.Write("trajectory.csv", TrajectoryCsv(optimize::write_trajectory(g.best)));
  }
  // one panel per run: trajectory rigidly aligned onto the normalized target
  const targets::TargetCurve norm_target = targets::normalize_bbox(curve);
  std::vector<svg::Panel> panels;
  for (size_t i = 0; i < g.runs.size(); ++i) {
    const optimize::GridRow& row = g.table[i];
    char title[96];
    std::snprintf(title, sizeof title, "N=%d seed %llu loss %.4g", row.n_units,
                  static_cast<unsigned long long>(row.seed), row.loss);
    svg::Panel panel;
    panel.title = title;
    panel.series.push_back(
        CurveSeries(norm_target.points, norm_target.closed, "", "#999999", true));
    if (!row.failed) {
      try {
        const kinematics::TipTrajectory tr = optimize::write_trajectory(g.runs[i]);
        const analysis::TrajectoryFit fit = analysis::fit_trajectory(tr.points, norm_target);
        panel.series.push_back(CurveSeries(fit.aligned, false, "", "#1f77b4", false));
      } catch (const std::exception&) {
        // an unsweepable run keeps only the target outline
      }
    }
    panels.push_back(std::move(panel));
  }
  out.Write("collage.svg", svg::collage(panels, std::min<int>(f.restarts, 5), 200));
  out.Finish();

  if (g.cancelled) {
    std::fprintf(stderr, "write: interrupted after %zu of %zu runs; partial table written\n",
                 g.table.size(), total);
    return kExitInterrupted;
  }
  if (!have_best) {
    std::fprintf(stderr, "write: every run failed\n");
    return kExitInfeasible;
  }
  if (!f.solver.quiet) {
    std::fprintf(stderr, "write: best N=%zu seed=%llu loss=%.6g\n",
                 static_cast<size_t>(std::accumulate(g.best.units_per_section.begin(),
                                                     g.best.units_per_section.end(), 0)),
                 static_cast<unsigned long long>(g.best.seed), g.best.loss);
  }
  if (!g.best.feasible) {
    std::fprintf(stderr, "write: best design is infeasible: %s\n", g.best.message.c_str());
    return kExitInfeasible;
  }
  return kExitOk;
}

// ---- analyze ----

struct SensitivityFlags {
  std::string units = "100,200,300";
  double epsilon = 0.01;
  int samples = 1000;
  double psi = std::numbers::pi / 2;
  uint64_t seed = 0;
  int threads = 1;
  std::string out;
};

int RunSensitivity(const SensitivityFlags& f) {
  const std::vector<int> ns = ParseIntList(f.units, "--units");
  for (int n : ns) {
    if (n < 4) throw UsageError("--units: sensitivity needs N >= 4");
  }
  OutputDir out(f.out, "analyze sensitivity", f.seed);
  const json echo = {{"units", ns},  {"epsilon", f.epsilon}, {"samples", f.samples},
                     {"psi", f.psi}, {"seed", f.seed}};
  out.SetConfig(echo);
  io::Table t;
  t.header = {"n_units", "unit", "j_over_n", "sigma"};
  json summary = {{"config", echo}, {"profiles", json::array()}, {"collapse", json::array()}};
  std::vector<analysis::NormalizedProfile> normalized;
  std::vector<svg::Series> series;
  for (size_t i = 0; i < ns.size(); ++i) {
    const analysis::SensitivityProfile p =
        analysis::sensitivity_profile(ns[i], f.epsilon, f.samples, f.psi, f.seed, f.threads);
    std::vector<double> js;
    for (int j = 1; j <= ns[i]; ++j) {
      js.push_back(j);
      t.AddRow({std::to_string(ns[i]), std::to_string(j), F(static_cast<double>(j) / ns[i]),
                F(p.sigma[j - 1])});
    }
    normalized.push_back(analysis::normalize_profile(p));
    summary["profiles"].push_back(
        {{"n_units", ns[i]}, {"spearman", analysis::spearman(js, p.sigma)}});
    svg::Series s;
    s.label = "N = " + std::to_string(ns[i]);
    s.x = normalized.back().x;
    for (double v : normalized.back().log_sigma) s.y.push_back(std::exp(v));
    series.push_back(std::move(s));
  }
  for (size_t a = 0; a < ns.size(); ++a) {
    for (size_t b = a + 1; b < ns.size(); ++b) {
      summary["collapse"].push_back(
          {{"a", ns[a]},
           {"b", ns[b]},
           {"max_log_deviation", analysis::collapse_deviation(normalized[a], normalized[b])}});
    }
  }
  svg::PlotOptions po;
  po.title = "Tip sensitivity to single-unit perturbations";
  po.x_label = "j / N";
  po.y_label = "sigma_j / max sigma";
  po.log_y = true;
  out.Write("sensitivity.csv", t.ToCsv());
  out.Write("summary.json", io::dump(summary));
  out.Write("sensitivity.svg", svg::plot(series, po));
  out.Finish();
  return kExitOk;
}

struct ClosureFlags {
  std::string alpha = "0.6";
  std::string units = "5:12";
  std::string out;
};

int RunClosure(const ClosureFlags& f) {
  const std::vector<double> alphas = ParseDoubles(f.alpha, 0, "--alpha");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw UsageError("--alpha values must lie in (0, 1)");
  }
  const std::vector<int> ns = ParseIntList(f.units, "--units");
  for (int n : ns) {
    if (n < 1) throw UsageError("--units values must be >= 1");
  }
  OutputDir out(f.out, "analyze closure", 0);
  out.SetConfig({{"alpha", alphas}, {"units", ns}});
  const std::vector<analysis::ClosureRow> rows = analysis::closure_experiment(alphas, ns);
  io::Table t;
  t.header = {"alpha", "n_units", "psi_theory", "psi_measured", "abs_error", "flagged", "note"};
  std::map<double, svg::Series> theory, measured;
  for (const analysis::ClosureRow& r : rows) {
    t.AddRow({F(r.alpha), std::to_string(r.n_units), F(r.psi_theory), F(r.psi_measured),
              F(std::abs(r.psi_theory - r.psi_measured)), r.flagged ? "1" : "0", r.note});
    if (r.flagged) continue;
    theory[r.alpha].x.push_back(r.n_units);
    theory[r.alpha].y.push_back(r.psi_theory);
    measured[r.alpha].x.push_back(r.n_units);
    measured[r.alpha].y.push_back(r.psi_measured);
  }
  std::vector<svg::Series> series;
  size_t k = 0;
  for (auto& [a, s] : theory) {
    char label[48];
    std::snprintf(label, sizeof label, "alpha = %g", a);
    s.label = label;
    s.color = svg::palette(k);
    series.push_back(s);
    svg::Series m = measured[a];
    m.color = svg::palette(k);
    m.line = false;
    m.markers = true;
    series.push_back(m);
    ++k;
  }
  svg::PlotOptions po;
  po.title = "Closure actuation angle";
  po.x_label = "N";
  po.y_label = "psi* (rad)";
  out.Write("closure.csv", t.ToCsv());
  out.Write("closure.svg", svg::plot(series, po));
  out.Finish();
  return kExitOk;
}

struct PerturbationFlags {
  double alpha0 = 0.52;
  std::string epsilon = "0.001";
  int units = 30;
  double psi = std::numbers::pi / 4;
  std::string out;
};

int RunPerturbation(const PerturbationFlags& f) {
  const std::vector<double> eps = ParseDoubles(f.epsilon, 0, "--epsilon");
  if (f.units < 2) throw UsageError("--units must be >= 2");
  OutputDir out(f.out, "analyze perturbation", 0);
  const json echo = {
      {"alpha0", f.alpha0}, {"epsilon", eps}, {"units", f.units}, {"psi", f.psi}};
  out.SetConfig(echo);
  io::Table t;
  t.header = {"epsilon", "unit", "x_full", "y_full", "x_perturbative", "y_perturbative", "error"};
  json summary = {{"config", echo}, {"runs", json::array()}};
  std::vector<svg::Series> series;
  for (size_t i = 0; i < eps.size(); ++i) {
    const analysis::PerturbationReport r =
        analysis::perturbation_validation(f.alpha0, eps[i], f.units, f.psi);
    std::vector<Point> full, pert;
    for (const analysis::PerturbationRow& row : r.rows) {
      t.AddRow({F(eps[i]), std::to_string(row.unit), F(row.full.x), F(row.full.y),
                F(row.perturbative.x), F(row.perturbative.y), F(row.error)});
      full.push_back(row.full);
      pert.push_back(row.perturbative);
    }
    summary["runs"].push_back({{"epsilon", eps[i]},
                               {"max_error", r.max_error},
                               {"chain_length", r.chain_length}});
    if (i == 0) {
      series.push_back(CurveSeries(full, false, "full", "#1f77b4", false));
      series.push_back(CurveSeries(pert, false, "perturbative", "#d62728", true));
      series.back().markers = true;
    }
  }
  bool positive = eps.size() >= 2;
  for (double e : eps) positive = positive && e > 0.0;
  if (positive) {
    summary["loglog_slope"] = analysis::perturbation_slope(f.alpha0, eps, f.units, f.psi);
  }
  svg::PlotOptions po;
  po.title = "Perturbative and full chain";
  po.equal_aspect = true;
  out.Write("perturbation.csv", t.ToCsv());
  out.Write("summary.json", io::dump(summary));
  out.Write("perturbation.svg", svg::plot(series, po));
  out.Finish();
  return kExitOk;
}

// ---- simulate ----

struct SimulateFlags {
  std::string design;
  std::string out;
};

int RunSimulate(const SimulateFlags& f) {
  if (!fs::exists(f.design)) throw UsageError("design file not found: " + f.design);
  json j;
  try {
    j = json::parse(io::read_file(f.design));
  } catch (const json::exception& e) {
    throw UsageError("design file is not valid JSON: " + std::string(e.what()));
  }
  const optimize::RunResult r = io::run_result_from_json(j);
  OutputDir out(f.out, "simulate", r.seed);
  out.AddInput(f.design);
  if (r.kind == "morph") {
    out.Write("shape.csv", ShapeCsv(optimize::morph_shape(r)));
  } else {
    out.Write("trajectory.csv", TrajectoryCsv(optimize::write_trajectory(r)));
  }
  out.Finish();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design, simulate and analyze scissor-linkage chains."};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file supplying flags (command-line flags win)");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  MorphFlags morph;
  CLI::App* cm = app.add_subcommand("morph", "Fit a chain whose deployed shape matches a target");
  cm->add_option("--target", morph.target, "Target file or name:key=val,...")->required();
  cm->add_option("--units", morph.units, "Number of units N")->required();
  cm->add_option("--weights", morph.weights, "lambda_kappa,lambda_tip,lambda_rot");
  cm->add_option("--l-max", morph.l_max, "Upper bound on member length (0 = none)");
  cm->add_option("--out", morph.out, "Output directory")->required();
  morph.solver.Register(cm);

  WriteFlags write;
  CLI::App* cw = app.add_subcommand("write", "Fit a chain whose tip traces a target while actuated");
  cw->add_option("--target", write.target, "Target file or name:key=val,...")->required();
  cw->add_option("--units", write.units, "Number of units N");
  cw->add_option("--grid", write.grid, "Unit counts lo:hi:step or a,b,c");
  cw->add_option("--sections", write.sections, "Sections per chain (0 = one per unit)");
  cw->add_option("--restarts", write.restarts, "Seeded restarts per unit count");
  cw->add_option("--weights", write.weights, "lambda_smooth,lambda_length,lambda_phi");
  cw->add_option("--phi-min", write.phi_min, "Smallest allowed internal angle (rad)");
  cw->add_option("--psi-range", write.psi_range, "Sweep start:end (rad)");
  cw->add_option("--psi-mode", write.psi_mode, "joint (optimize the range) or fixed");
  cw->add_option("--samples", write.samples, "Actuation samples along the sweep");
  cw->add_option("--out", write.out, "Output directory")->required();
  write.solver.Register(cw);

  CLI::App* ca = app.add_subcommand("analyze", "Validation studies");
  ca->require_subcommand(1);
  SensitivityFlags sens;
  CLI::App* cs = ca->add_subcommand("sensitivity", "Tip variance under single-unit perturbations");
  cs->add_option("--units", sens.units, "Chain lengths, e.g. 100,200,300");
  cs->add_option("--epsilon", sens.epsilon, "Perturbation half-width");
  cs->add_option("--samples", sens.samples, "Samples per unit");
  cs->add_option("--psi", sens.psi, "Actuation angle (rad)");
  cs->add_option("--seed", sens.seed, "Random seed");
  cs->add_option("--threads", sens.threads, "Worker threads (0 = all cores)");
  cs->add_option("--out", sens.out, "Output directory")->required();
  ClosureFlags clo;
  CLI::App* cc = ca->add_subcommand("closure", "Ring-closure actuation angle, theory vs kinematics");
  cc->add_option("--alpha", clo.alpha, "Aspect ratios, e.g. 0.6,0.7");
  cc->add_option("--units", clo.units, "Unit counts lo:hi[:step] or a,b,c");
  cc->add_option("--out", clo.out, "Output directory")->required();
  PerturbationFlags pert;
  CLI::App* cp = ca->add_subcommand("perturbation", "First-order expansion vs full chain");
  cp->add_option("--alpha0", pert.alpha0, "Aspect ratio of the first unit");
  cp->add_option("--epsilon", pert.epsilon, "Per-unit increments, e.g. 1e-3,2e-3");
  cp->add_option("--units", pert.units, "Number of units");
  cp->add_option("--psi", pert.psi, "Actuation angle (rad)");
  cp->add_option("--out", pert.out, "Output directory")->required();

  SimulateFlags sim;
  CLI::App* cr = app.add_subcommand("simulate", "Re-simulate a saved design");
  cr->add_option("--design", sim.design, "design.json from morph or write")->required();
  cr->add_option("--out", sim.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitInvalid;
  }

  try {
    if (cm->parsed()) return RunMorph(morph);
    if (cw->parsed()) return RunWrite(write);
    if (cs->parsed()) return RunSensitivity(sens);
    if (cc->parsed()) return RunClosure(clo);
    if (cp->parsed()) return RunPerturbation(pert);
    if (cr->parsed()) return RunSimulate(sim);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const targets::TargetError& e) {
    std::cerr << "error: target: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const kinematics::InfeasibleAssembly& e) {
    std::cerr << "error: infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  std::cerr << app.help();
  return kExitInvalid;
}
