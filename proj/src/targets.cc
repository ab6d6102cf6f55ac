#include "scissor/targets.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace scissor::targets {
namespace {

constexpr double kPi = std::numbers::pi;

// Gauss-Legendre nodes and weights on [-1, 1].
constexpr std::array<double, 8> kGaussX = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
    -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
    0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGaussW = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
    0.2223810344533745, 0.1012285362903763};

template <typename F>
double Integrate(F&& f, double a, double b) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double sum = 0.0;
  for (size_t i = 0; i < kGaussX.size(); ++i) sum += kGaussW[i] * f(mid + half * kGaussX[i]);
  return half * sum;
}

// Second derivatives of a natural cubic spline through (u, y).
std::vector<double> NaturalMoments(const std::vector<double>& u,
                                   const std::vector<double>& y) {
  const size_t n = u.size();
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;
  // Thomas algorithm on the interior equations.
  std::vector<double> diag(n), upper(n), rhs(n);
  for (size_t i = 1; i + 1 < n; ++i) {
    const double h0 = u[i] - u[i - 1], h1 = u[i + 1] - u[i];
    diag[i] = 2.0 * (h0 + h1);
    upper[i] = h1;
    rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
  }
  for (size_t i = 2; i + 1 < n; ++i) {
    const double lower = u[i] - u[i - 1];
    const double f = lower / diag[i - 1];
    diag[i] -= f * upper[i - 1];
    rhs[i] -= f * rhs[i - 1];
  }
  for (size_t i = n - 2; i >= 1; --i) {
    const double next = (i + 2 < n) ? m[i + 1] : 0.0;
    m[i] = (rhs[i] - upper[i] * next) / diag[i];
  }
  return m;
}

// Second derivatives of a periodic cubic spline. u has n + 1 knots and y
// has n + 1 values with y[n] == y[0]; returns n + 1 moments, m[n] == m[0].
std::vector<double> PeriodicMoments(const std::vector<double>& u,
                                    const std::vector<double>& y) {
  const size_t n = u.size() - 1;
  auto h = [&](size_t i) { return u[i + 1] - u[i]; };
  // Cyclic system: row i couples m[i-1], m[i], m[i+1] (indices mod n).
  std::vector<double> a(n), b(n), c(n), r(n);
  for (size_t i = 0; i < n; ++i) {
    const size_t prev = (i + n - 1) % n;
    const double h0 = h(prev), h1 = h(i);
    a[i] = h0;
    b[i] = 2.0 * (h0 + h1);
    c[i] = h1;
    const double y_prev = y[prev], y_next = y[i + 1];
    r[i] = 6.0 * ((y_next - y[i]) / h1 - (y[i] - y_prev) / h0);
  }
  // Sherman-Morrison: A = T + w v^T with T tridiagonal.
  const double gamma = -b[0];
  std::vector<double> bb = b;
  bb[0] -= gamma;
  bb[n - 1] -= a[0] * c[n - 1] / gamma;
  auto solve = [&](std::vector<double> d) {
    std::vector<double> cp(n), x(n);
    cp[0] = c[0] / bb[0];
    d[0] /= bb[0];
    for (size_t i = 1; i < n; ++i) {
      const double denom = bb[i] - a[i] * cp[i - 1];
      cp[i] = c[i] / denom;
      d[i] = (d[i] - a[i] * d[i - 1]) / denom;
    }
    x[n - 1] = d[n - 1];
    for (size_t i = n - 1; i-- > 0;) x[i] = d[i] - cp[i] * x[i + 1];
    return x;
  };
  std::vector<double> w(n, 0.0);
  w[0] = gamma;
  w[n - 1] = c[n - 1];
  const std::vector<double> x = solve(r);
  const std::vector<double> z = solve(w);
  const double vx = x[0] + a[0] / gamma * x[n - 1];
  const double vz = z[0] + a[0] / gamma * z[n - 1];
  std::vector<double> m(n + 1);
  for (size_t i = 0; i < n; ++i) m[i] = x[i] - vx / (1.0 + vz) * z[i];
  m[n] = m[0];
  return m;
}

class Spline2 {
 public:
  Spline2(std::vector<double> u, std::vector<double> x, std::vector<double> y,
          bool periodic)
      : u_(std::move(u)), x_(std::move(x)), y_(std::move(y)) {
    mx_ = periodic ? PeriodicMoments(u_, x_) : NaturalMoments(u_, x_);
    my_ = periodic ? PeriodicMoments(u_, y_) : NaturalMoments(u_, y_);
  }

  size_t segments() const { return u_.size() - 1; }
  double knot(size_t i) const { return u_[i]; }

  Point Eval(size_t i, double t) const {
    return {Value(x_, mx_, i, t), Value(y_, my_, i, t)};
  }
  Point Derivative(size_t i, double t) const {
    return {Slope(x_, mx_, i, t), Slope(y_, my_, i, t)};
  }
  double Speed(size_t i, double t) const { return norm(Derivative(i, t)); }

 private:
  double Value(const std::vector<double>& f, const std::vector<double>& m,
               size_t i, double t) const {
    const double h = u_[i + 1] - u_[i];
    const double a = u_[i + 1] - t, b = t - u_[i];
    return m[i] * a * a * a / (6.0 * h) + m[i + 1] * b * b * b / (6.0 * h) +
           (f[i] / h - m[i] * h / 6.0) * a + (f[i + 1] / h - m[i + 1] * h / 6.0) * b;
  }
  double Slope(const std::vector<double>& f, const std::vector<double>& m,
               size_t i, double t) const {
    const double h = u_[i + 1] - u_[i];
    const double a = u_[i + 1] - t, b = t - u_[i];
    return -m[i] * a * a / (2.0 * h) + m[i + 1] * b * b / (2.0 * h) -
           (f[i] / h - m[i] * h / 6.0) + (f[i + 1] / h - m[i + 1] * h / 6.0);
  }

  std::vector<double> u_, x_, y_, mx_, my_;
};

// Parameter in segment i at which the arc length from the segment start
// equals `target`.
double InvertArcLength(const Spline2& sp, size_t i, double target,
                       double seg_length) {
  const double u0 = sp.knot(i), u1 = sp.knot(i + 1);
  double lo = u0, hi = u1;
  double t = u0 + (u1 - u0) * (target / seg_length);
  for (int it = 0; it < 50; ++it) {
    const double f =
        Integrate([&](double v) { return sp.Speed(i, v); }, u0, t) - target;
    if (std::abs(f) < 1e-15 * std::max(1.0, seg_length)) break;
    if (f > 0) hi = t; else lo = t;
    const double speed = sp.Speed(i, t);
    double next = (speed > 0) ? t - f / speed : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    t = next;
  }
  return t;
}

double Gaussian(double d, double sigma) { return std::exp(-0.5 * (d / sigma) * (d / sigma)); }

// Planar curve from a tangent-angle function theta(s) on [0, length],
// starting at the origin.
TargetCurve IntegrateTangent(const std::function<double(double)>& theta,
                             double length, int n) {
  TargetCurve c;
  c.points.reserve(n);
  Point p{0.0, 0.0};
  c.points.push_back(p);
  const double ds = length / (n - 1);
  for (int i = 1; i < n; ++i) {
    const double a = (i - 1) * ds, b = i * ds;
    p.x += Integrate([&](double s) { return std::cos(theta(s)); }, a, b);
    p.y += Integrate([&](double s) { return std::sin(theta(s)); }, a, b);
    c.points.push_back(p);
  }
  return c;
}

double Take(Params& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  const double v = it->second;
  params.erase(it);
  return v;
}

void RequirePositive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw TargetError(what + " must be positive");
}

std::string Trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool ParseNumbers(const std::string& line, std::vector<double>* out) {
  out->clear();
  std::string token;
  std::string cleaned = line;
  std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
  std::replace(cleaned.begin(), cleaned.end(), ';', ' ');
  std::replace(cleaned.begin(), cleaned.end(), '\t', ' ');
  std::istringstream in(cleaned);
  while (in >> token) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') return false;
    out->push_back(v);
  }
  return true;
}

TargetCurve LoadCsv(const std::string& path, std::istream& in) {
  TargetCurve c;
  std::string line;
  std::vector<double> nums;
  int line_no = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = Trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!ParseNumbers(line, &nums)) {
      if (!seen_data && c.points.empty()) {
        seen_data = true;  // header row
        continue;
      }
      throw TargetError(path + ":" + std::to_string(line_no) + ": not numeric");
    }
    seen_data = true;
    if (nums.size() != 2) {
      throw TargetError(path + ":" + std::to_string(line_no) +
                        ": expected two columns");
    }
    c.points.push_back({nums[0], nums[1]});
  }
  if (c.points.size() > 1 && c.points.front().x == c.points.back().x &&
      c.points.front().y == c.points.back().y) {
    c.points.pop_back();
    c.closed = true;
  }
  return c;
}

TargetCurve LoadJson(const std::string& path, std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw TargetError(path + ": " + e.what());
  }
  TargetCurve c;
  const nlohmann::json* pts = &doc;
  if (doc.is_object()) {
    if (!doc.contains("points")) throw TargetError(path + ": missing \"points\"");
    pts = &doc["points"];
    if (doc.contains("closed")) c.closed = doc["closed"].get<bool>();
  }
  if (!pts->is_array()) throw TargetError(path + ": expected an array of points");
  for (const auto& p : *pts) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw TargetError(path + ": every point must be [x, y]");
    }
    c.points.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  if (c.points.size() > 1 && c.points.front().x == c.points.back().x &&
      c.points.front().y == c.points.back().y) {
    c.points.pop_back();
    c.closed = true;
  }
  return c;
}

}  // namespace

void Validate(const TargetCurve& curve) {
  if (curve.points.size() < 4) throw TargetError("target needs at least 4 points");
  for (size_t i = 0; i < curve.points.size(); ++i) {
    const Point& p = curve.points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw TargetError("target point " + std::to_string(i) + " is not finite");
    }
    if (i > 0 && p.x == curve.points[i - 1].x && p.y == curve.points[i - 1].y) {
      throw TargetError("target points " + std::to_string(i - 1) + " and " +
                        std::to_string(i) + " coincide");
    }
  }
  if (curve.closed && curve.points.front().x == curve.points.back().x &&
      curve.points.front().y == curve.points.back().y) {
    throw TargetError("closed target repeats its first point");
  }
}

TargetCurve normalize_bbox(const TargetCurve& curve) {
  if (curve.points.empty()) throw TargetError("empty target");
  double x0 = curve.points[0].x, x1 = x0, y0 = curve.points[0].y, y1 = y0;
  for (const Point& p : curve.points) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  const double extent = std::max(x1 - x0, y1 - y0);
  if (!(extent > 0.0)) throw TargetError("target has zero extent");
  const double scale = 1.0 / extent;
  const Point offset{0.5 * (1.0 - (x1 - x0) * scale), 0.5 * (1.0 - (y1 - y0) * scale)};
  TargetCurve out = curve;
  for (Point& p : out.points) {
    p = Point{(p.x - x0) * scale, (p.y - y0) * scale} + offset;
  }
  return out;
}

ArcLengthProfile arclength_parameterize(const TargetCurve& curve, int m) {
  Validate(curve);
  if (m < 3) throw TargetError("need at least 3 arc-length segments");
  std::vector<double> u, x, y;
  const size_t n = curve.points.size();
  const size_t knots = curve.closed ? n + 1 : n;
  u.reserve(knots);
  double acc = 0.0;
  for (size_t i = 0; i < knots; ++i) {
    const Point& p = curve.points[i % n];
    if (i > 0) {
      const double chord = norm(p - curve.points[i - 1]);
      if (!(chord > 0.0)) throw TargetError("spline parameter is not increasing");
      acc += chord;
    }
    u.push_back(acc);
    x.push_back(p.x);
    y.push_back(p.y);
  }
  const Spline2 sp(u, x, y, curve.closed);

  std::vector<double> cumulative(sp.segments() + 1, 0.0);
  std::vector<double> seg_length(sp.segments());
  for (size_t i = 0; i < sp.segments(); ++i) {
    // split each segment so the quadrature stays accurate on tight bends
    double len = 0.0;
    const double a = sp.knot(i), b = sp.knot(i + 1);
    for (int k = 0; k < 4; ++k) {
      len += Integrate([&](double v) { return sp.Speed(i, v); }, a + (b - a) * k / 4,
                       a + (b - a) * (k + 1) / 4);
    }
    seg_length[i] = len;
    cumulative[i + 1] = cumulative[i] + len;
  }

  ArcLengthProfile out;
  out.closed = curve.closed;
  out.total_length = cumulative.back();
  out.s_grid.resize(m + 1);
  out.nodes.resize(m + 1);
  for (int j = 0; j <= m; ++j) {
    const double s = out.total_length * j / m;
    out.s_grid[j] = s;
    if (j == 0) {
      out.nodes[j] = curve.points.front();
      continue;
    }
    if (j == m) {
      out.nodes[j] = curve.closed ? curve.points.front() : curve.points.back();
      continue;
    }
    size_t i = static_cast<size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), s) - cumulative.begin());
    i = std::clamp<size_t>(i, 1, sp.segments()) - 1;
    const double t = InvertArcLength(sp, i, s - cumulative[i], seg_length[i]);
    out.nodes[j] = sp.Eval(i, t);
  }
  const Point d0 = sp.Derivative(0, sp.knot(0));
  out.initial_tangent = std::atan2(d0.y, d0.x);
  return out;
}

double default_smoothing(const ArcLengthProfile& profile) {
  return 2.0 * profile.spacing();
}

std::vector<double> curvature_profile(const ArcLengthProfile& profile,
                                      double smoothing) {
  const size_t count = profile.nodes.size();
  if (count < 5) throw TargetError("curvature needs at least 5 nodes");
  const double h = profile.spacing();
  const std::vector<Point>& p = profile.nodes;
  std::vector<double> raw(count);
  auto kappa = [](Point d1, Point d2) {
    const double speed2 = dot(d1, d1);
    return cross(d1, d2) / (speed2 * std::sqrt(speed2));
  };
  if (profile.closed) {
    const size_t m = count - 1;  // distinct nodes
    for (size_t i = 0; i < m; ++i) {
      const Point& a = p[(i + m - 1) % m];
      const Point& c = p[(i + 1) % m];
      raw[i] = kappa((1.0 / (2.0 * h)) * (c - a),
                     (1.0 / (h * h)) * (c - 2.0 * p[i] + a));
    }
    raw[m] = raw[0];
  } else {
    for (size_t i = 1; i + 1 < count; ++i) {
      raw[i] = kappa((1.0 / (2.0 * h)) * (p[i + 1] - p[i - 1]),
                     (1.0 / (h * h)) * (p[i + 1] - 2.0 * p[i] + p[i - 1]));
    }
    const size_t e = count - 1;
    raw[0] = kappa((1.0 / (2.0 * h)) * (-3.0 * p[0] + 4.0 * p[1] - p[2]),
                   (1.0 / (h * h)) * (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]));
    raw[e] = kappa((1.0 / (2.0 * h)) * (3.0 * p[e] - 4.0 * p[e - 1] + p[e - 2]),
                   (1.0 / (h * h)) *
                       (2.0 * p[e] - 5.0 * p[e - 1] + 4.0 * p[e - 2] - p[e - 3]));
  }
  if (!(smoothing > 0.0)) return raw;

  const int reach = static_cast<int>(std::ceil(4.0 * smoothing / h));
  std::vector<double> out(count);
  if (profile.closed) {
    const int m = static_cast<int>(count - 1);
    for (int i = 0; i < m; ++i) {
      double sum = 0.0, weight = 0.0;
      for (int k = -reach; k <= reach; ++k) {
        const double w = Gaussian(k * h, smoothing);
        sum += w * raw[((i + k) % m + m) % m];
        weight += w;
      }
      out[i] = sum / weight;
    }
    out[m] = out[0];
  } else {
    const int last = static_cast<int>(count - 1);
    for (int i = 0; i <= last; ++i) {
      double sum = 0.0, weight = 0.0;
      for (int k = std::max(0, i - reach); k <= std::min(last, i + reach); ++k) {
        const double w = Gaussian((k - i) * h, smoothing);
        sum += w * raw[k];
        weight += w;
      }
      out[i] = sum / weight;
    }
  }
  return out;
}

ArcLengthProfile build_profile(const TargetCurve& curve, int m, double smoothing) {
  ArcLengthProfile profile = arclength_parameterize(curve, m);
  if (smoothing < 0.0) smoothing = default_smoothing(profile);
  profile.kappa = curvature_profile(profile, smoothing);
  return profile;
}

std::vector<std::string> analytic_names() {
  return {"line", "circle", "spiral", "sine", "flower3"};
}

TargetCurve analytic_target(const std::string& name, const Params& given) {
  Params params = given;
  const double n_real = Take(params, "n", 2000);
  if (!(n_real >= 8) || n_real != std::floor(n_real) || n_real > 1e7) {
    throw TargetError("n must be an integer of at least 8");
  }
  const int n = static_cast<int>(n_real);
  TargetCurve c;
  if (name == "line") {
    const double length = Take(params, "L", 1.0);
    RequirePositive(length, "L");
    for (int i = 0; i < n; ++i) c.points.push_back({length * i / (n - 1), 0.0});
  } else if (name == "circle") {
    const double r = Take(params, "R", 1.0);
    RequirePositive(r, "R");
    c.closed = true;
    for (int i = 0; i < n; ++i) {
      const double t = -0.5 * kPi + 2.0 * kPi * i / n;
      c.points.push_back({r * std::cos(t), r * std::sin(t)});
    }
  } else if (name == "spiral") {
    const double k = Take(params, "c", 1.0);
    const double length = Take(params, "L", 3.0);
    RequirePositive(length, "L");
    c = IntegrateTangent([k](double s) { return 0.5 * k * s * s; }, length, n);
  } else if (name == "sine") {
    const double k = Take(params, "k", 3.0);
    const double waves = Take(params, "waves", 1.0);
    const double length = Take(params, "L", 3.0);
    RequirePositive(length, "L");
    RequirePositive(waves, "waves");
    const double w = 2.0 * kPi * waves / length;
    c = IntegrateTangent([k, w](double s) { return k / w * (1.0 - std::cos(w * s)); },
                         length, n);
  } else if (name == "flower3") {
    const double a = Take(params, "a", 1.0);
    RequirePositive(a, "a");
    c.closed = true;
    // r = a cos(3 theta) traces all three petals once for theta in [0, pi)
    for (int i = 0; i < n; ++i) {
      const double t = kPi * i / n;
      const double r = a * std::cos(3.0 * t);
      c.points.push_back({r * std::cos(t), r * std::sin(t)});
    }
  } else {
    throw TargetError("unknown analytic target '" + name + "'");
  }
  if (!params.empty()) {
    throw TargetError("unknown parameter '" + params.begin()->first + "' for " + name);
  }
  return c;
}

TargetCurve load_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TargetError("cannot open target file '" + path + "'");
  std::string ext;
  const size_t dot_pos = path.rfind('.');
  if (dot_pos != std::string::npos) ext = path.substr(dot_pos + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  TargetCurve c;
  if (ext == "json") {
    c = LoadJson(path, in);
  } else {
    // sniff: JSON documents start with '[' or '{'
    const int first = (in >> std::ws).peek();
    if (first == '[' || first == '{') {
      c = LoadJson(path, in);
    } else {
      c = LoadCsv(path, in);
    }
  }
  Validate(c);
  return c;
}

bool is_analytic(const std::string& spec) {
  const std::string name = spec.substr(0, spec.find(':'));
  const std::vector<std::string> names = analytic_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

TargetCurve parse_target(const std::string& spec) {
  if (!is_analytic(spec)) return load_points(spec);
  const size_t colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  Params params;
  if (colon != std::string::npos) {
    std::istringstream in(spec.substr(colon + 1));
    std::string item;
    while (std::getline(in, item, ',')) {
      item = Trim(item);
      if (item.empty()) continue;
      const size_t eq = item.find('=');
      if (eq == std::string::npos) {
        throw TargetError("expected key=value in target spec, got '" + item + "'");
      }
      const std::string key = Trim(item.substr(0, eq));
      const std::string value = Trim(item.substr(eq + 1));
      char* end = nullptr;
      const double v = std::strtod(value.c_str(), &end);
      if (value.empty() || *end != '\0') {
        throw TargetError("target parameter '" + key + "' is not a number");
      }
      params[key] = v;
    }
  }
  return analytic_target(name, params);
}

}  // namespace scissor::targets
