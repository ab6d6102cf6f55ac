#pragma once

#include <cmath>

#include "scissor/autodiff.h"

namespace scissor {

// Planar vector over a generic scalar (double or ad::Var).
template <typename T>
struct Vec2 {
  T x{};
  T y{};

  Vec2() = default;
  Vec2(T x_in, T y_in) : x(std::move(x_in)), y(std::move(y_in)) {}

  Vec2& operator+=(const Vec2& o) {
    x = x + o.x;
    y = y + o.y;
    return *this;
  }
  Vec2& operator-=(const Vec2& o) {
    x = x - o.x;
    y = y - o.y;
    return *this;
  }
};

template <typename T>
Vec2<T> operator+(const Vec2<T>& a, const Vec2<T>& b) {
  return {a.x + b.x, a.y + b.y};
}
template <typename T>
Vec2<T> operator-(const Vec2<T>& a, const Vec2<T>& b) {
  return {a.x - b.x, a.y - b.y};
}
template <typename T>
Vec2<T> operator-(const Vec2<T>& a) {
  return {-a.x, -a.y};
}
template <typename T, typename S>
Vec2<T> operator*(const S& s, const Vec2<T>& a) {
  return {s * a.x, s * a.y};
}
template <typename T, typename S>
Vec2<T> operator*(const Vec2<T>& a, const S& s) {
  return {a.x * s, a.y * s};
}

template <typename T>
T dot(const Vec2<T>& a, const Vec2<T>& b) {
  return a.x * b.x + a.y * b.y;
}

template <typename T>
T cross(const Vec2<T>& a, const Vec2<T>& b) {
  return a.x * b.y - a.y * b.x;
}

template <typename T>
T norm(const Vec2<T>& a) {
  return ad::sqrt(a.x * a.x + a.y * a.y);
}

// Unit vector at angle theta.
template <typename T>
Vec2<T> polar(const T& theta) {
  return {ad::cos(theta), ad::sin(theta)};
}

// Counterclockwise quarter turn.
template <typename T>
Vec2<T> perp(const Vec2<T>& a) {
  return {-a.y, a.x};
}

template <typename T>
Vec2<T> rotate(const Vec2<T>& a, const T& theta) {
  T c = ad::cos(theta);
  T s = ad::sin(theta);
  return {c * a.x - s * a.y, s * a.x + c * a.y};
}

template <typename T>
Vec2<double> value_of(const Vec2<T>& a) {
  return {ad::value_of(a.x), ad::value_of(a.y)};
}

using Point = Vec2<double>;

}  // namespace scissor
