#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "knitply/intersect.hpp"
#include "knitply/vecmath.hpp"

namespace knitply {

struct FiberTexture {
  int fiber_count = 16;
  double amplitude = 0.3;    // radians
  double fiber_twist = 0.0;  // radians per unit ply arc length
  double shadow_depth = 0.3;
  /// Optional baked normal tilt (radians) sampled uniformly over one phase
  /// period; replaces amplitude * sin(u) when non-empty.
  std::vector<double> tilt_table;

  void validate() const;
  double tilt(double phase) const;
};

struct BsdfParams {
  Rgb albedo{0.8, 0.8, 0.8};
  double spec_weight = 0.2;   // kr
  double trans_weight = 0.1;  // kt
  double long_width = 0.2;    // radians
  double azim_width = 0.6;    // radians
  double trans_width = 0.4;   // radians

  double body_weight() const { return 1 - spec_weight - trans_weight; }
  void validate() const;
};

struct ShadingPoint {
  HitRecord hit;
  Frame frame;  // perturbed tangent, shading normal, binormal
  double shadow = 1;
};

inline constexpr double kMinShadingElevation = 5.0 * kPi / 180.0;

/// Fiber phase u = F * beta + kappa * s, wrapped to [0, 2pi).
double fiber_phase(const FiberTexture& tex, double beta, double s);

ShadingPoint apply_fiber_texture(const HitRecord& hit, const FiberTexture& tex);

/// Unperturbed shading point (no fiber texture, sigma = 1).
ShadingPoint plain_shading_point(const HitRecord& hit);

/// All directions point away from the surface. `wi` is towards the viewer.
Rgb bsdf_eval(const ShadingPoint& sp, const Vec3& wi, const Vec3& wo, const BsdfParams& p);

/// Solid-angle density of bsdf_sample.
double bsdf_pdf(const ShadingPoint& sp, const Vec3& wi, const Vec3& wo, const BsdfParams& p);

struct BsdfSample {
  Vec3 wo;
  double pdf = 0;
  Rgb f;
};

/// u.x selects the lobe (and is reused), u.y plus the remapped u.x drive the lobe.
BsdfSample bsdf_sample(const ShadingPoint& sp, const Vec3& wi, const BsdfParams& p, Vec2 u);

/// |wo . shading normal|
double shading_cosine(const ShadingPoint& sp, const Vec3& wo);

struct Material {
  BsdfParams bsdf;
  FiberTexture fiber;
};

/// Flat key=value text: albedo_r, albedo_g, albedo_b, spec_weight,
/// trans_weight, long_width, azim_width, trans_width, fiber_count,
/// fiber_amplitude, fiber_twist, shadow_depth. Missing keys keep defaults.
Material parse_material(const std::string& text, const Material& defaults = {});
std::string format_material(const Material& m);
Material load_material(const std::filesystem::path& path, const Material& defaults = {});
void save_material(const std::filesystem::path& path, const Material& m);

}  // namespace knitply
