#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace knitply {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0, y = 0;

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr bool operator==(const Vec2&) const = default;
};

struct Vec3 {
  double x = 0, y = 0, z = 0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr bool operator==(const Vec3&) const = default;
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double length(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline double length(const Vec2& v) { return std::sqrt(dot(v, v)); }
constexpr double length_squared(const Vec3& v) { return dot(v, v); }
inline Vec3 normalize(const Vec3& v) { return v / length(v); }
inline double distance(const Vec3& a, const Vec3& b) { return length(a - b); }
constexpr Vec3 lerp(const Vec3& a, const Vec3& b, double t) { return a * (1 - t) + b * t; }
constexpr Vec3 hadamard(const Vec3& a, const Vec3& b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
constexpr double max_component(const Vec3& v) {
  return v.x > v.y ? (v.x > v.z ? v.x : v.z) : (v.y > v.z ? v.y : v.z);
}

/// Rodrigues rotation of `v` about unit `axis` by `angle` radians.
inline Vec3 rotate(const Vec3& v, const Vec3& axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return v * c + cross(axis, v) * s + axis * (dot(axis, v) * (1 - c));
}

/// Component of `v` orthogonal to unit `n`.
constexpr Vec3 reject(const Vec3& v, const Vec3& n) { return v - n * dot(v, n); }

/// Any unit vector orthogonal to unit `n`.
inline Vec3 any_orthogonal(const Vec3& n) {
  const Vec3 a = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  return normalize(cross(n, a));
}

/// Orthonormal, right-handed curve frame: binormal = tangent x normal.
struct Frame {
  Vec3 tangent{1, 0, 0};
  Vec3 normal{0, 0, 1};
  Vec3 binormal{0, -1, 0};

  Vec3 to_local(const Vec3& v) const { return {dot(v, tangent), dot(v, normal), dot(v, binormal)}; }
  Vec3 to_world(const Vec3& l) const { return tangent * l.x + normal * l.y + binormal * l.z; }
};

/// Gram-Schmidt with tangent priority; `normal_hint` must not be parallel to `tangent`.
inline Frame make_frame(const Vec3& tangent, const Vec3& normal_hint) {
  Frame f;
  f.tangent = normalize(tangent);
  f.normal = normalize(reject(normal_hint, f.tangent));
  f.binormal = cross(f.tangent, f.normal);
  return f;
}

inline double wrap_two_pi(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  if (a >= kTwoPi) a = 0;
  return a;
}

/// Wraps to [-pi, pi).
inline double wrap_pi(double a) { return wrap_two_pi(a + kPi) - kPi; }

struct Aabb2 {
  Vec2 lo{1e300, 1e300};
  Vec2 hi{-1e300, -1e300};

  void extend(const Vec2& p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  bool empty() const { return lo.x > hi.x || lo.y > hi.y; }
};

struct Aabb3 {
  Vec3 lo{1e300, 1e300, 1e300};
  Vec3 hi{-1e300, -1e300, -1e300};

  void extend(const Vec3& p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  void extend(const Aabb3& b) {
    extend(b.lo);
    extend(b.hi);
  }
  Vec3 center() const { return (lo + hi) * 0.5; }
  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
  }
};

using Rgb = Vec3;

}  // namespace knitply
