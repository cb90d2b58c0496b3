#include "knitply/shading.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/special_functions/erf.hpp>

#include "knitply/errors.hpp"
#include "text_util.hpp"

namespace knitply {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kMinCos = 1e-9;

struct Angles {
  double theta;  // elevation from the normal plane, [-pi/2, pi/2]
  double phi;    // azimuth around the tangent, from the shading normal
};

Angles to_angles(const Frame& f, const Vec3& w) {
  const Vec3 l = f.to_local(w);
  return {std::asin(std::clamp(l.x, -1.0, 1.0)), std::atan2(l.z, l.y)};
}

Vec3 from_angles(const Frame& f, double theta, double phi) {
  const double c = std::cos(theta);
  return normalize(f.to_world({std::sin(theta), c * std::cos(phi), c * std::sin(phi)}));
}

double gaussian(double x, double width) {
  return std::exp(-0.5 * x * x / (width * width)) / (width * std::sqrt(kTwoPi));
}

// Normal of width w truncated to [lo, hi].
struct TruncatedNormal {
  double width, lo, hi;

  double mass() const { return 0.5 * (std::erf(hi / (width * kSqrt2)) - std::erf(lo / (width * kSqrt2))); }
  double pdf(double x) const { return (x < lo || x > hi) ? 0.0 : gaussian(x, width) / mass(); }
  double sample(double u) const {
    const double a = std::erf(lo / (width * kSqrt2));
    const double b = std::erf(hi / (width * kSqrt2));
    double e = a + u * (b - a);
    e = std::clamp(e, std::nextafter(-1.0, 0.0), std::nextafter(1.0, 0.0));
    return std::clamp(width * kSqrt2 * boost::math::erf_inv(e), lo, hi);
  }
};

double cos_theta(double theta) { return std::max(std::cos(theta), kMinCos); }

// Reflection: Gaussian in (theta, phi) about the mirror direction (-theta_i, -phi_i).
double reflection_value(const Angles& i, const Angles& o, const BsdfParams& p) {
  return gaussian(i.theta + o.theta, p.long_width) * gaussian(wrap_pi(i.phi + o.phi), p.azim_width);
}

double reflection_pdf(const Angles& i, const Angles& o, const BsdfParams& p) {
  const double c = -i.theta;
  const TruncatedNormal th{p.long_width, -kPi / 2 - c, kPi / 2 - c};
  const TruncatedNormal ph{p.azim_width, -kPi, kPi};
  return th.pdf(o.theta - c) * ph.pdf(wrap_pi(o.phi + i.phi)) / cos_theta(o.theta);
}

// Transmission: same shape about the straight-through direction -wi.
double transmission_pdf(const Angles& i, const Angles& o, const BsdfParams& p) {
  const double c = -i.theta;
  const TruncatedNormal th{p.trans_width, -kPi / 2 - c, kPi / 2 - c};
  const TruncatedNormal ph{p.trans_width, -kPi, kPi};
  return th.pdf(o.theta - c) * ph.pdf(wrap_pi(o.phi - i.phi - kPi)) / cos_theta(o.theta);
}

bool same_side(const Vec3& n, const Vec3& a, const Vec3& b) { return (dot(n, a) >= 0) == (dot(n, b) >= 0); }

double body_pdf(const ShadingPoint& sp, const Vec3& wi, const Vec3& wo) {
  if (!same_side(sp.frame.normal, wi, wo)) return 0;
  return std::abs(dot(wo, sp.frame.normal)) / kPi;
}

}  // namespace

void FiberTexture::validate() const {
  if (fiber_count < 1) throw InvariantError("fiber_count must be >= 1");
  if (!(amplitude >= 0 && amplitude < kPi / 2)) throw InvariantError("fiber amplitude must lie in [0, pi/2)");
  if (!(shadow_depth >= 0 && shadow_depth <= 1)) throw InvariantError("shadow_depth must lie in [0, 1]");
  if (!std::isfinite(fiber_twist)) throw InvariantError("fiber_twist must be finite");
}

double FiberTexture::tilt(double phase) const {
  if (tilt_table.empty()) return amplitude * std::sin(phase);
  const double x = wrap_two_pi(phase) / kTwoPi * static_cast<double>(tilt_table.size());
  const auto i = static_cast<std::size_t>(x) % tilt_table.size();
  const double f = x - std::floor(x);
  return tilt_table[i] * (1 - f) + tilt_table[(i + 1) % tilt_table.size()] * f;
}

void BsdfParams::validate() const {
  for (int c = 0; c < 3; ++c) {
    if (!(albedo[c] >= 0 && albedo[c] <= 1)) throw InvariantError("albedo must lie in [0, 1]");
  }
  if (!(spec_weight >= 0 && spec_weight <= 1)) throw InvariantError("spec_weight must lie in [0, 1]");
  if (!(trans_weight >= 0 && trans_weight <= 1)) throw InvariantError("trans_weight must lie in [0, 1]");
  if (spec_weight + trans_weight > 1 + 1e-12) throw InvariantError("spec_weight + trans_weight must be <= 1");
  if (!(long_width > 0 && azim_width > 0 && trans_width > 0)) throw InvariantError("lobe widths must be > 0");
}

double fiber_phase(const FiberTexture& tex, double beta, double s) {
  return wrap_two_pi(tex.fiber_count * beta + tex.fiber_twist * s);
}

ShadingPoint plain_shading_point(const HitRecord& hit) { return {hit, hit.shading_frame, 1.0}; }

ShadingPoint apply_fiber_texture(const HitRecord& hit, const FiberTexture& tex) {
  const double u = fiber_phase(tex, hit.beta, hit.s);
  const Frame& f = hit.shading_frame;
  Vec3 n = rotate(f.normal, f.tangent, tex.tilt(u));
  Vec3 t = rotate(f.tangent, n, 0.5 * tex.tilt(u + kPi / 2));
  // Keep the shading normal at least kMinShadingElevation above the geometric tangent plane.
  const Vec3& ng = hit.geo_normal;
  const double min_dot = std::sin(kMinShadingElevation);
  if (dot(n, ng) < min_dot) {
    Vec3 side = reject(n, ng);
    side = length(side) < 1e-12 ? any_orthogonal(ng) : normalize(side);
    n = side * std::cos(kMinShadingElevation) + ng * min_dot;
    t = reject(t, n);
    if (length(t) < 1e-12) t = any_orthogonal(n);
  }
  ShadingPoint sp;
  sp.hit = hit;
  sp.frame.normal = normalize(n);
  sp.frame.tangent = normalize(reject(t, sp.frame.normal));
  sp.frame.binormal = cross(sp.frame.tangent, sp.frame.normal);
  sp.shadow = 1 - tex.shadow_depth * (1 - std::cos(u)) / 2;
  return sp;
}

double shading_cosine(const ShadingPoint& sp, const Vec3& wo) { return std::abs(dot(wo, sp.frame.normal)); }

Rgb bsdf_eval(const ShadingPoint& sp, const Vec3& wi, const Vec3& wo, const BsdfParams& p) {
  const Angles i = to_angles(sp.frame, wi);
  const Angles o = to_angles(sp.frame, wo);
  double white = 0;
  if (p.spec_weight > 0) white += p.spec_weight * reflection_value(i, o, p);
  if (p.trans_weight > 0) {
    white += p.trans_weight * transmission_pdf(i, o, p) / std::max(shading_cosine(sp, wo), kMinCos);
  }
  Rgb f{white, white, white};
  if (p.body_weight() > 0 && same_side(sp.frame.normal, wi, wo)) f += p.albedo * (p.body_weight() / kPi);
  return f * sp.shadow;
}

double bsdf_pdf(const ShadingPoint& sp, const Vec3& wi, const Vec3& wo, const BsdfParams& p) {
  const Angles i = to_angles(sp.frame, wi);
  const Angles o = to_angles(sp.frame, wo);
  double pdf = 0;
  if (p.spec_weight > 0) pdf += p.spec_weight * reflection_pdf(i, o, p);
  if (p.trans_weight > 0) pdf += p.trans_weight * transmission_pdf(i, o, p);
  if (p.body_weight() > 0) pdf += p.body_weight() * body_pdf(sp, wi, wo);
  return pdf;
}

BsdfSample bsdf_sample(const ShadingPoint& sp, const Vec3& wi, const BsdfParams& p, Vec2 u) {
  const Angles i = to_angles(sp.frame, wi);
  const double kr = p.spec_weight, kt = p.trans_weight, kb = std::max(p.body_weight(), 0.0);
  const double total = kr + kt + kb;
  double x = u.x * total;
  Vec3 wo;
  if (x < kr) {
    const double c = -i.theta;
    const double th = c + TruncatedNormal{p.long_width, -kPi / 2 - c, kPi / 2 - c}.sample(x / kr);
    const double ph = -i.phi + TruncatedNormal{p.azim_width, -kPi, kPi}.sample(u.y);
    wo = from_angles(sp.frame, th, wrap_pi(ph));
  } else if (x < kr + kt) {
    x = (x - kr) / kt;
    const double c = -i.theta;
    const double th = c + TruncatedNormal{p.trans_width, -kPi / 2 - c, kPi / 2 - c}.sample(x);
    const double ph = i.phi + kPi + TruncatedNormal{p.trans_width, -kPi, kPi}.sample(u.y);
    wo = from_angles(sp.frame, th, wrap_pi(ph));
  } else {
    x = std::clamp((x - kr - kt) / kb, 0.0, 1.0);
    const double r = std::sqrt(x), a = kTwoPi * u.y;
    const double z = std::sqrt(std::max(0.0, 1 - x));
    const double side = dot(wi, sp.frame.normal) >= 0 ? 1.0 : -1.0;
    wo = normalize(sp.frame.tangent * (r * std::cos(a)) + sp.frame.binormal * (r * std::sin(a)) +
                   sp.frame.normal * (side * std::max(z, 1e-12)));
  }
  BsdfSample s;
  s.wo = wo;
  s.pdf = bsdf_pdf(sp, wi, wo, p);
  s.f = bsdf_eval(sp, wi, wo, p);
  return s;
}

Material parse_material(const std::string& text, const Material& defaults) {
  Material m = defaults;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    std::string joined;
    for (auto t : tok) joined += t;
    const std::string_view kv = joined;
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw ParseError("material line " + std::to_string(line_no) + ": expected key=value");
    const std::string key(kv.substr(0, eq));
    const std::string_view val = kv.substr(eq + 1);
    if (key == "fiber_count") {
      m.fiber.fiber_count = static_cast<int>(detail::parse_uint(val, line_no));
      continue;
    }
    const double v = detail::parse_double(val, line_no);
    if (key == "albedo_r") m.bsdf.albedo.x = v;
    else if (key == "albedo_g") m.bsdf.albedo.y = v;
    else if (key == "albedo_b") m.bsdf.albedo.z = v;
    else if (key == "spec_weight") m.bsdf.spec_weight = v;
    else if (key == "trans_weight") m.bsdf.trans_weight = v;
    else if (key == "long_width") m.bsdf.long_width = v;
    else if (key == "azim_width") m.bsdf.azim_width = v;
    else if (key == "trans_width") m.bsdf.trans_width = v;
    else if (key == "fiber_amplitude") m.fiber.amplitude = v;
    else if (key == "fiber_twist") m.fiber.fiber_twist = v;
    else if (key == "shadow_depth") m.fiber.shadow_depth = v;
    else throw ParseError("material line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  m.bsdf.validate();
  m.fiber.validate();
  return m;
}

std::string format_material(const Material& m) {
  using detail::fmt_double;
  std::string s;
  s += "albedo_r=" + fmt_double(m.bsdf.albedo.x) + "\n";
  s += "albedo_g=" + fmt_double(m.bsdf.albedo.y) + "\n";
  s += "albedo_b=" + fmt_double(m.bsdf.albedo.z) + "\n";
  s += "spec_weight=" + fmt_double(m.bsdf.spec_weight) + "\n";
  s += "trans_weight=" + fmt_double(m.bsdf.trans_weight) + "\n";
  s += "long_width=" + fmt_double(m.bsdf.long_width) + "\n";
  s += "azim_width=" + fmt_double(m.bsdf.azim_width) + "\n";
  s += "trans_width=" + fmt_double(m.bsdf.trans_width) + "\n";
  s += "fiber_count=" + std::to_string(m.fiber.fiber_count) + "\n";
  s += "fiber_amplitude=" + fmt_double(m.fiber.amplitude) + "\n";
  s += "fiber_twist=" + fmt_double(m.fiber.fiber_twist) + "\n";
  s += "shadow_depth=" + fmt_double(m.fiber.shadow_depth) + "\n";
  return s;
}

Material load_material(const std::filesystem::path& path, const Material& defaults) {
  return parse_material(detail::read_text_file(path), defaults);
}

void save_material(const std::filesystem::path& path, const Material& m) {
  detail::write_text_file(path, format_material(m));
}

}  // namespace knitply
