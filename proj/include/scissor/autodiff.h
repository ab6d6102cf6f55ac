#pragma once

// Reverse-mode scalar automatic differentiation.
//
// Var records every operation on the thread's active Tape. Constants (Vars
// built from a double) never touch the tape, so mixing them in is free.
// Generic numeric code calls the ad:: functions below, which are overloaded
// for both double and Var; that way one template serves plain evaluation and
// differentiation. Operations that have no overload here simply fail to
// compile for Var, which is how unsupported primitives are rejected.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace scissor::ad {

// Thrown when an operation produces NaN or a non-finite partial derivative.
class NanError : public std::runtime_error {
 public:
  explicit NanError(const std::string& what) : std::runtime_error(what) {}
};

class Tape {
 public:
  static constexpr int32_t kNone = -1;

  int32_t NewLeaf() { return Push(kNone, 0.0, kNone, 0.0); }

  int32_t Push(int32_t a, double da, int32_t b, double db) {
    nodes_.push_back({a, b, da, db});
    return static_cast<int32_t>(nodes_.size() - 1);
  }

  size_t size() const { return nodes_.size(); }
  void Clear() { nodes_.clear(); }

  // Adjoint of every recorded node with respect to `output`.
  std::vector<double> Adjoints(int32_t output) const;

  // Tape receiving operations on this thread, or nullptr.
  static Tape* active() { return active_; }

 private:
  friend class ScopedTape;
  static inline thread_local Tape* active_ = nullptr;
  struct Node {
    int32_t a;
    int32_t b;
    double da;
    double db;
  };
  std::vector<Node> nodes_;
};

// Makes `tape` the active tape for the current thread for this scope.
class ScopedTape {
 public:
  explicit ScopedTape(Tape& tape);
  ~ScopedTape();
  ScopedTape(const ScopedTape&) = delete;
  ScopedTape& operator=(const ScopedTape&) = delete;

 private:
  Tape* previous_;
};

class Var {
 public:
  Var() = default;
  Var(double value) : value_(value) {}  // NOLINT: implicit constants

  // New independent variable on the active tape.
  static Var Independent(double value);

  double value() const { return value_; }
  int32_t index() const { return index_; }
  bool is_constant() const { return index_ == Tape::kNone; }

  Var& operator+=(const Var& o);
  Var& operator-=(const Var& o);
  Var& operator*=(const Var& o);
  Var& operator/=(const Var& o);

  // Internal constructor for recorded results.
  static Var Recorded(double value, int32_t index) {
    Var v(value);
    v.index_ = index;
    return v;
  }

 private:
  double value_ = 0.0;
  int32_t index_ = Tape::kNone;
};

namespace internal {

[[noreturn]] void ThrowNan(const char* op, bool in_derivative);

inline Var Unary(double v, const Var& a, double da, const char* op) {
  if (std::isnan(v)) ThrowNan(op, false);
  if (a.is_constant()) return Var(v);
  if (!std::isfinite(da)) ThrowNan(op, true);
  return Var::Recorded(v, Tape::active()->Push(a.index(), da, Tape::kNone, 0.0));
}

inline Var Binary(double v, const Var& a, double da, const Var& b, double db,
                  const char* op) {
  if (std::isnan(v)) ThrowNan(op, false);
  if (a.is_constant()) return Unary(v, b, db, op);
  if (b.is_constant()) return Unary(v, a, da, op);
  if (!std::isfinite(da) || !std::isfinite(db)) ThrowNan(op, true);
  return Var::Recorded(v, Tape::active()->Push(a.index(), da, b.index(), db));
}

}  // namespace internal

inline double value_of(double x) { return x; }
inline double value_of(long double x) { return static_cast<double>(x); }
inline double value_of(const Var& x) { return x.value(); }

// ---- arithmetic ----

inline Var operator+(const Var& a, const Var& b) {
  return internal::Binary(a.value() + b.value(), a, 1.0, b, 1.0, "add");
}
inline Var operator-(const Var& a, const Var& b) {
  return internal::Binary(a.value() - b.value(), a, 1.0, b, -1.0, "sub");
}
inline Var operator-(const Var& a) {
  return internal::Unary(-a.value(), a, -1.0, "neg");
}
inline Var operator*(const Var& a, const Var& b) {
  return internal::Binary(a.value() * b.value(), a, b.value(), b, a.value(),
                          "mul");
}
inline Var operator/(const Var& a, const Var& b) {
  const double q = a.value() / b.value();
  return internal::Binary(q, a, 1.0 / b.value(), b, -q / b.value(), "div");
}
inline Var operator+(const Var& a, double b) { return a + Var(b); }
inline Var operator+(double a, const Var& b) { return Var(a) + b; }
inline Var operator-(const Var& a, double b) { return a - Var(b); }
inline Var operator-(double a, const Var& b) { return Var(a) - b; }
inline Var operator*(const Var& a, double b) { return a * Var(b); }
inline Var operator*(double a, const Var& b) { return Var(a) * b; }
inline Var operator/(const Var& a, double b) { return a / Var(b); }
inline Var operator/(double a, const Var& b) { return Var(a) / b; }

inline Var& Var::operator+=(const Var& o) { return *this = *this + o; }
inline Var& Var::operator-=(const Var& o) { return *this = *this - o; }
inline Var& Var::operator*=(const Var& o) { return *this = *this * o; }
inline Var& Var::operator/=(const Var& o) { return *this = *this / o; }

// Comparisons act on values only.
inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }
inline bool operator==(const Var& a, const Var& b) { return a.value() == b.value(); }
inline bool operator!=(const Var& a, const Var& b) { return a.value() != b.value(); }

// ---- elementary functions (double overloads first) ----

inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double tan(double x) { return std::tan(x); }
inline double atan(double x) { return std::atan(x); }
inline double atan2(double y, double x) { return std::atan2(y, x); }
inline double acos(double x) { return std::acos(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }

// Extended precision instantiations serve as finite-difference references.
inline long double sin(long double x) { return std::sin(x); }
inline long double cos(long double x) { return std::cos(x); }
inline long double tan(long double x) { return std::tan(x); }
inline long double atan(long double x) { return std::atan(x); }
inline long double atan2(long double y, long double x) { return std::atan2(y, x); }
inline long double acos(long double x) { return std::acos(x); }
inline long double sqrt(long double x) { return std::sqrt(x); }
inline long double exp(long double x) { return std::exp(x); }
inline long double log(long double x) { return std::log(x); }

inline Var sin(const Var& x) {
  return internal::Unary(std::sin(x.value()), x, std::cos(x.value()), "sin");
}
inline Var cos(const Var& x) {
  return internal::Unary(std::cos(x.value()), x, -std::sin(x.value()), "cos");
}
inline Var tan(const Var& x) {
  const double t = std::tan(x.value());
  return internal::Unary(t, x, 1.0 + t * t, "tan");
}
inline Var atan(const Var& x) {
  const double v = x.value();
  return internal::Unary(std::atan(v), x, 1.0 / (1.0 + v * v), "atan");
}
inline Var atan2(const Var& y, const Var& x) {
  const double r2 = x.value() * x.value() + y.value() * y.value();
  return internal::Binary(std::atan2(y.value(), x.value()), y, x.value() / r2,
                          x, -y.value() / r2, "atan2");
}
inline Var acos(const Var& x) {
  const double v = x.value();
  return internal::Unary(std::acos(v), x, -1.0 / std::sqrt(1.0 - v * v),
                         "acos");
}
inline Var sqrt(const Var& x) {
  const double r = std::sqrt(x.value());
  return internal::Unary(r, x, 0.5 / r, "sqrt");
}
inline Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return internal::Unary(e, x, e, "exp");
}
inline Var log(const Var& x) {
  return internal::Unary(std::log(x.value()), x, 1.0 / x.value(), "log");
}

// Arccos that tolerates arguments up to `band` outside [-1, 1]. The value is
// clamped and the derivative is capped at the magnitude it has `band` inside
// the boundary, so gradients stay finite at |x| = 1.
inline double acos_clamped(double x, double band = 1e-9) {
  (void)band;
  return std::acos(std::clamp(x, -1.0, 1.0));
}
inline long double acos_clamped(long double x, double band = 1e-9) {
  (void)band;
  return std::acos(std::clamp(x, -1.0L, 1.0L));
}
inline Var acos_clamped(const Var& x, double band = 1e-9) {
  const double v = std::clamp(x.value(), -1.0, 1.0);
  const double d = -1.0 / std::sqrt(std::max(1.0 - v * v, 2.0 * band));
  return internal::Unary(std::acos(v), x, d, "acos_clamped");
}

// Logistic sigmoid, evaluated without overflow.
inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
inline long double logistic(long double x) {
  if (x >= 0) return 1.0L / (1.0L + std::exp(-x));
  const long double e = std::exp(x);
  return e / (1.0L + e);
}
inline Var logistic(const Var& x) {
  const double s = logistic(x.value());
  return internal::Unary(s, x, s * (1.0 - s), "logistic");
}

// sqrt(x^2 + eps^2): smooth stand-in for |x|.
template <typename T>
T abs_smooth(const T& x, double eps = 1e-8) {
  using ad::sqrt;
  return sqrt(x * x + eps * eps);
}

// max/min by the subgradient rule: the selected branch carries the gradient.
template <typename T>
T max(const T& a, const T& b) {
  return value_of(a) >= value_of(b) ? a : b;
}
template <typename T>
T min(const T& a, const T& b) {
  return value_of(a) <= value_of(b) ? a : b;
}

// sin(x)/x, regular at zero.
template <typename T>
T sinc(const T& x) {
  const double v = value_of(x);
  if (std::abs(v) < 1e-4) {
    T x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return ad::sin(x) / x;
}

// atan(x)/x, regular at zero.
template <typename T>
T atanc(const T& x) {
  const double v = value_of(x);
  if (std::abs(v) < 1e-4) {
    T x2 = x * x;
    return 1.0 - x2 / 3.0 + x2 * x2 / 5.0;
  }
  return ad::atan(x) / x;
}

// Piecewise-linear interpolation of (knots, values) at `query`. Knots must be
// nondecreasing; queries outside the knot range take the end values.
// Differentiable in knots, values and query.
template <typename T>
T interp_linear(std::span<const T> knots, std::span<const T> values,
                const T& query) {
  const size_t n = knots.size();
  if (n == 0 || values.size() != n) {
    throw std::invalid_argument("interp_linear: size mismatch");
  }
  const double q = value_of(query);
  if (n == 1 || q <= value_of(knots[0])) return values[0];
  if (q >= value_of(knots[n - 1])) return values[n - 1];
  auto it = std::upper_bound(knots.begin(), knots.end(), q,
                             [](double a, const T& b) { return a < value_of(b); });
  const size_t hi = static_cast<size_t>(it - knots.begin());
  const size_t lo = hi - 1;
  T w = (query - knots[lo]) / (knots[hi] - knots[lo]);
  return values[lo] + w * (values[hi] - values[lo]);
}

// ---- named parameter vectors and gradients ----

class ParamVector {
 public:
  ParamVector() = default;

  // Appends an entry; throws on duplicate names.
  void Add(const std::string& name, double value);

  size_t size() const { return values_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }
  double operator[](size_t i) const { return values_[i]; }

  // Index of `name`, or -1.
  int Find(const std::string& name) const;
  double Get(const std::string& name) const;

 private:
  std::vector<std::string> names_;
  std::vector<double> values_;
};

struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

namespace internal {

// Per-thread stack of reusable tapes so nested grad() calls do not collide.
class TapePool {
 public:
  static Tape& Acquire();
  static void Release();
};

}  // namespace internal

// Value and exact gradient of f at x. `f` must be callable with
// std::span<const Var> and return Var.
template <typename F>
ValueAndGradient grad(F&& f, std::span<const double> x) {
  Tape& tape = internal::TapePool::Acquire();
  struct Releaser {
    ~Releaser() { internal::TapePool::Release(); }
  } releaser;
  tape.Clear();
  ScopedTape scope(tape);
  std::vector<Var> vars;
  vars.reserve(x.size());
  for (double v : x) vars.push_back(Var::Independent(v));
  Var y = f(std::span<const Var>(vars));
  ValueAndGradient out;
  out.value = y.value();
  out.gradient.assign(x.size(), 0.0);
  if (!y.is_constant()) {
    const std::vector<double> adj = tape.Adjoints(y.index());
    for (size_t i = 0; i < vars.size(); ++i) out.gradient[i] = adj[vars[i].index()];
  }
  return out;
}

template <typename F>
ValueAndGradient grad(F&& f, const ParamVector& at) {
  return grad(std::forward<F>(f), std::span<const double>(at.values()));
}

// ---- finite-difference verification ----

enum class CoordinateStatus {
  kOk,
  kMismatch,
  // One-sided differences disagree: the point sits on a kink or clamp
  // boundary, so any value between them is a valid subgradient.
  kBoundary,
};

struct CoordinateCheck {
  double autodiff = 0.0;
  double central = 0.0;
  double forward = 0.0;
  double backward = 0.0;
  double relative_error = 0.0;
  CoordinateStatus status = CoordinateStatus::kOk;
};

struct FiniteDiffReport {
  double value = 0.0;
  double max_relative_error = 0.0;
  int boundary_cases = 0;
  bool passed = true;
  std::vector<CoordinateCheck> coordinates;
};

// Relative error with a floor on the denominator so that near-zero
// components are judged against the overall gradient scale.
double relative_error(double a, double b, double scale);

// Compares grad(f) with central differences of step `step` coordinate by
// coordinate. `f` must accept both std::span<const double> (returning double)
// and std::span<const Var> (returning Var).
template <typename F>
FiniteDiffReport finite_diff_check(F&& f, std::span<const double> at,
                                   double step = 1e-6,
                                   double tolerance = 1e-5) {
  FiniteDiffReport report;
  const ValueAndGradient g = grad(f, at);
  report.value = g.value;
  std::vector<double> x(at.begin(), at.end());
  auto eval = [&](size_t i, double delta) {
    const double saved = x[i];
    x[i] = saved + delta;
    const double v = f(std::span<const double>(x));
    x[i] = saved;
    return v;
  };
  const double f0 = f(std::span<const double>(x));
  std::vector<CoordinateCheck> checks(at.size());
  double scale = 0.0;
  for (size_t i = 0; i < at.size(); ++i) {
    const double fp = eval(i, step);
    const double fm = eval(i, -step);
    CoordinateCheck& c = checks[i];
    c.autodiff = g.gradient[i];
    c.central = (fp - fm) / (2.0 * step);
    c.forward = (fp - f0) / step;
    c.backward = (f0 - fm) / step;
    scale = std::max({scale, std::abs(c.central), std::abs(c.autodiff)});
  }
  for (CoordinateCheck& c : checks) {
    c.relative_error = relative_error(c.autodiff, c.central, scale);
    if (c.relative_error <= tolerance) continue;
    // A genuine kink shows up as one-sided slopes that differ by much more
    // than the smooth O(step) curvature effect.
    const double gap = std::abs(c.forward - c.backward);
    const double spread = std::max({std::abs(c.forward), std::abs(c.backward),
                                    1e-300});
    if (gap > 1e-3 * spread) {
      c.status = CoordinateStatus::kBoundary;
      ++report.boundary_cases;
    } else {
      c.status = CoordinateStatus::kMismatch;
      report.passed = false;
    }
  }
  for (const CoordinateCheck& c : checks) {
    if (c.status != CoordinateStatus::kBoundary) {
      report.max_relative_error =
          std::max(report.max_relative_error, c.relative_error);
    }
  }
  report.coordinates = std::move(checks);
  return report;
}

}  // namespace scissor::ad
