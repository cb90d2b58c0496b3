#include <algorithm>
#include <cmath>

#include "knitply/errors.hpp"
#include "knitply/render.hpp"

namespace knitply {

namespace {

double luminance(const Rgb& c) { return 0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z; }

Vec3 cosine_hemisphere(const Vec3& n, Vec2 u) {
  const Vec3 t = any_orthogonal(n);
  const Vec3 b = cross(n, t);
  const double r = std::sqrt(u.x), a = kTwoPi * u.y;
  const double z = std::sqrt(std::max(0.0, 1 - u.x));
  return normalize(t * (r * std::cos(a)) + b * (r * std::sin(a)) + n * std::max(z, 1e-12));
}

// Index of the interval of a CDF (size n + 1, cdf[0] = 0) containing x.
std::size_t find_interval(const double* cdf, std::size_t n, double x) {
  const auto it = std::upper_bound(cdf, cdf + n + 1, x);
  const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - cdf - 1, 0));
  return std::min(i, n - 1);
}

}  // namespace

void Camera::validate() const {
  if (width < 1 || height < 1) throw InvariantError("camera resolution must be >= 1");
  if (!(vfov_deg > 0 && vfov_deg < 180)) throw InvariantError("camera vfov must lie in (0, 180) degrees");
  const Vec3 f = look_at - position;
  if (length(f) == 0) throw InvariantError("camera look_at equals its position");
  if (length(cross(normalize(f), up)) < 1e-9) throw InvariantError("camera up is parallel to the view direction");
}

Ray Camera::generate(double x, double y) const {
  const Vec3 f = normalize(look_at - position);
  const Vec3 r = normalize(cross(f, up));
  const Vec3 u = cross(r, f);
  const double th = std::tan(0.5 * vfov_deg * kPi / 180);
  const double aspect = double(width) / height;
  const double sx = (2 * x / width - 1) * th * aspect;
  const double sy = (1 - 2 * y / height) * th;
  Ray ray;
  ray.origin = position;
  ray.dir = normalize(f + r * sx + u * sy);
  return ray;
}

std::optional<double> AreaLight::intersect(const Ray& ray) const {
  const Vec3 n = cross(edge_u, edge_v);
  const double denom = dot(n, ray.dir);
  if (denom == 0) return std::nullopt;
  const double t = dot(corner - ray.origin, n) / denom;
  if (!(t > ray.tmin && t < ray.tmax) || t <= 0) return std::nullopt;
  const Vec3 p = ray.at(t) - corner;
  const double nn = dot(n, n);
  const double a = dot(cross(p, edge_v), n) / nn;
  const double b = dot(cross(edge_u, p), n) / nn;
  if (a < 0 || a > 1 || b < 0 || b > 1) return std::nullopt;
  return t;
}

Environment Environment::constant(const Rgb& radiance) {
  Environment e;
  e.kind_ = Kind::Constant;
  e.constant_ = radiance;
  return e;
}

Environment Environment::lat_long(const Image& image, double scale) {
  if (image.width < 1 || image.height < 1) throw InvariantError("environment map is empty");
  Environment e;
  e.kind_ = Kind::LatLong;
  e.width_ = image.width;
  e.height_ = image.height;
  e.pixels_.resize(static_cast<std::size_t>(e.width_) * e.height_);
  for (int y = 0; y < e.height_; ++y) {
    for (int x = 0; x < e.width_; ++x) e.pixels_[static_cast<std::size_t>(y) * e.width_ + x] = image.at(x, y) * scale;
  }
  const std::size_t w = e.width_, h = e.height_;
  e.conditional_.assign(h * (w + 1), 0.0);
  e.marginal_.assign(h + 1, 0.0);
  bool black = true;
  for (const auto& p : e.pixels_) black = black && luminance(p) <= 0;
  for (std::size_t y = 0; y < h; ++y) {
    const double s = std::sin(kPi * (double(y) + 0.5) / double(h));
    double* row = &e.conditional_[y * (w + 1)];
    for (std::size_t x = 0; x < w; ++x) {
      const double lum = black ? 1.0 : std::max(0.0, luminance(e.pixels_[y * w + x]));
      row[x + 1] = row[x] + lum * s;
    }
    e.marginal_[y + 1] = e.marginal_[y] + row[w];
  }
  e.total_ = e.marginal_[h];
  return e;
}

Rgb Environment::eval(const Vec3& dir) const {
  if (kind_ == Kind::Constant) return constant_;
  if (kind_ == Kind::None) return {};
  const double phi = wrap_two_pi(std::atan2(dir.y, dir.x));
  const double theta = std::acos(std::clamp(dir.z, -1.0, 1.0));
  const int x = std::min(width_ - 1, static_cast<int>(phi / kTwoPi * width_));
  const int y = std::min(height_ - 1, static_cast<int>(theta / kPi * height_));
  return pixels_[static_cast<std::size_t>(y) * width_ + x];
}

Environment::Sample Environment::sample(const Vec3& normal, double front, Vec2 u) const {
  Sample s;
  if (kind_ == Kind::None) return s;
  if (kind_ == Kind::Constant) {
    const bool f = u.x < front;
    const double ux = f ? u.x / front : (u.x - front) / (1 - front);
    s.dir = cosine_hemisphere(f ? normal : -normal, {std::clamp(ux, 0.0, 1.0), u.y});
    s.pdf = pdf(normal, front, s.dir);
    s.radiance = constant_;
    return s;
  }
  const std::size_t w = width_, h = height_;
  const double ty = u.y * total_;
  const std::size_t y = find_interval(marginal_.data(), h, ty);
  const double row_mass = marginal_[y + 1] - marginal_[y];
  const double dv = row_mass > 0 ? std::clamp((ty - marginal_[y]) / row_mass, 0.0, 1.0) : 0.5;
  const double* row = &conditional_[y * (w + 1)];
  const double tx = u.x * row[w];
  const std::size_t x = find_interval(row, w, tx);
  const double cell = row[x + 1] - row[x];
  const double du = cell > 0 ? std::clamp((tx - row[x]) / cell, 0.0, 1.0) : 0.5;
  const double theta = kPi * (double(y) + dv) / double(h);
  const double phi = kTwoPi * (double(x) + du) / double(w);
  s.dir = {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
  s.pdf = pdf(normal, front, s.dir);
  s.radiance = eval(s.dir);
  return s;
}

double Environment::pdf(const Vec3& normal, double front, const Vec3& dir) const {
  if (kind_ == Kind::None) return 0;
  if (kind_ == Kind::Constant) {
    const double c = dot(normal, dir);
    return (c >= 0 ? front : 1 - front) * std::abs(c) / kPi;
  }
  const double theta = std::acos(std::clamp(dir.z, -1.0, 1.0));
  const double st = std::sin(theta);
  if (st <= 0 || total_ <= 0) return 0;
  const double phi = wrap_two_pi(std::atan2(dir.y, dir.x));
  const int x = std::min(width_ - 1, static_cast<int>(phi / kTwoPi * width_));
  const int y = std::min(height_ - 1, static_cast<int>(theta / kPi * height_));
  const double* row = &conditional_[static_cast<std::size_t>(y) * (width_ + 1)];
  const double mass = (row[x + 1] - row[x]) / total_;
  return mass * double(width_) * double(height_) / (2 * kPi * kPi * st);
}

}  // namespace knitply
