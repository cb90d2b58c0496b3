#include <algorithm>
#include <cmath>

#include "knitply/errors.hpp"
#include "knitply/render.hpp"
#include "parallel.hpp"

namespace knitply {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

bool is_black(const Rgb& c) { return c.x <= 0 && c.y <= 0 && c.z <= 0; }

struct LightSample {
  Vec3 dir;
  Vec3 point;  // on the emitter; unused for the environment
  double dist = 0;
  double pdf = 0;  // solid angle, including light selection
  Rgb radiance;
};

// Perturbed shading normals can put a direction on different sides of the
// geometric and the shading surface; such directions leak light and are dropped.
bool consistent(const ShadingPoint& sp, const Vec3& wi, const Vec3& wo) {
  const Vec3& ng = sp.hit.geo_normal;
  const Vec3& ns = sp.frame.normal;
  return (dot(wi, ng) * dot(wo, ng) >= 0) == (dot(wi, ns) * dot(wo, ns) >= 0);
}

double selection_pdf(const Scene& scene) { return 1.0 / double(scene.light_count()); }

// Hemisphere split used for constant-environment sampling: the BSDF sends
// its transmitted share to the far side of the shading normal.
struct SideSplit {
  Vec3 normal;  // on the viewer's side
  double front = 1;
};

SideSplit side_split(const ShadingPoint& sp, const Vec3& wi, const BsdfParams& p) {
  const Vec3& n = sp.frame.normal;
  return {dot(wi, n) >= 0 ? n : -n, std::clamp(1 - p.trans_weight, 0.0, 1.0)};
}

// Cosine-weighted direction on the side split, laid out over u like the
// lobes of bsdf_sample so that shared random numbers give matching body
// directions. The density is that of Environment::pdf.
Vec3 split_direction(const ShadingPoint& sp, const SideSplit& side, const BsdfParams& p, Vec2 u) {
  const double kr = p.spec_weight, kt = p.trans_weight, kb = std::max(p.body_weight(), 0.0);
  const double x = u.x * (kr + kt + kb);
  double r2 = 0, sign = 1;
  if (x < kr) {
    r2 = x / kr;
  } else if (x < kr + kt) {
    r2 = (x - kr) / kt;
    sign = -1;
  } else {
    r2 = (x - kr - kt) / kb;
  }
  r2 = std::clamp(r2, 0.0, 1.0);
  const Frame& f = sp.frame;
  const double r = std::sqrt(r2), a = kTwoPi * u.y;
  const double z = std::sqrt(std::max(0.0, 1 - r2));
  const double s = dot(side.normal, f.normal) >= 0 ? sign : -sign;
  return normalize(f.tangent * (r * std::cos(a)) + f.binormal * (r * std::sin(a)) + f.normal * (s * std::max(z, 1e-12)));
}

LightSample sample_light(const Scene& scene, const ShadingPoint& sp, const Vec3& wi, double u0, Vec2 u) {
  const std::size_t count = scene.light_count();
  const Vec3& p = sp.hit.position;
  const std::size_t k = std::min(count - 1, static_cast<std::size_t>(u0 * double(count)));
  LightSample ls;
  if (k < scene.lights.size()) {
    const AreaLight& l = scene.lights[k];
    const Vec3 q = l.corner + l.edge_u * u.x + l.edge_v * u.y;
    ls.point = q;
    const Vec3 d = q - p;
    ls.dist = length(d);
    if (ls.dist <= 0) return ls;
    ls.dir = d / ls.dist;
    const double cosl = -dot(ls.dir, l.normal());
    if (cosl <= 0) return ls;
    ls.pdf = selection_pdf(scene) * ls.dist * ls.dist / (l.area() * cosl);
    ls.radiance = l.radiance;
    return ls;
  }
  const Environment& env = scene.environment;
  const BsdfParams& bp = scene.material.bsdf;
  const SideSplit side = side_split(sp, wi, bp);
  ls.dist = std::numeric_limits<double>::infinity();
  if (env.kind() == Environment::Kind::Constant) {
    ls.dir = split_direction(sp, side, bp, u);
    ls.pdf = selection_pdf(scene) * env.pdf(side.normal, side.front, ls.dir);
    ls.radiance = env.eval(ls.dir);
    return ls;
  }
  const auto s = env.sample(side.normal, side.front, u);
  ls.dir = s.dir;
  ls.pdf = selection_pdf(scene) * s.pdf;
  ls.radiance = s.radiance;
  return ls;
}

// Radiance arriving along `ray` from what `hit` found, with the light-sampling
// pdf that NEE would have assigned to the same direction.
Rgb emitted(const Scene& scene, const Ray& ray, const SceneHit& hit, const SideSplit& side, double& light_pdf) {
  light_pdf = 0;
  if (hit.light >= 0) {
    const AreaLight& l = scene.lights[static_cast<std::size_t>(hit.light)];
    const double cosl = -dot(ray.dir, l.normal());
    if (cosl <= 0) return {};
    light_pdf = selection_pdf(scene) * hit.t * hit.t / (l.area() * cosl);
    return l.radiance;
  }
  if (!scene.environment.active()) return {};
  light_pdf = selection_pdf(scene) * scene.environment.pdf(side.normal, side.front, ray.dir);
  return scene.environment.eval(ray.dir);
}

// `u` is shared with the BSDF sample of the same vertex.
Rgb light_term(const ShadingPoint& sp, const Vec3& wi, const Scene& scene, double u0, Vec2 u, TraceScratch* scratch) {
  const BsdfParams& bp = scene.material.bsdf;
  const LightSample ls = sample_light(scene, sp, wi, u0, u);
  if (ls.pdf <= 0 || is_black(ls.radiance) || !consistent(sp, wi, ls.dir)) return {};
  const Rgb f = bsdf_eval(sp, wi, ls.dir, bp);
  if (is_black(f)) return {};
  Ray shadow = spawn_ray(sp.hit, scene.ply_radius(sp.hit), ls.dir);
  double tmax = ls.dist;
  if (!std::isinf(ls.dist)) {
    const Vec3 d = ls.point - shadow.origin;
    tmax = length(d);
    shadow.dir = d / tmax;
    tmax *= 1 - 1e-7;
  }
  if (occluded(shadow, scene, tmax, scratch)) return {};
  const double pb = bsdf_pdf(sp, wi, ls.dir, bp);
  const double w = ls.pdf / (ls.pdf + pb);
  return hadamard(f, ls.radiance) * (shading_cosine(sp, ls.dir) * w / ls.pdf);
}

}  // namespace

Sampler::Sampler(std::uint64_t seed, std::uint64_t pixel, std::uint64_t sample)
    : key_(mix64(mix64(mix64(seed) ^ pixel) ^ sample)) {}

double Sampler::next() {
  const std::uint64_t x = mix64(key_ ^ mix64(counter_++));
  return double(x >> 11) * 0x1.0p-53;
}

Rgb estimate_direct(const ShadingPoint& sp, const Vec3& wi, const Scene& scene, Sampler& sampler,
                    TraceScratch* scratch) {
  const double u0 = sampler.next();
  const Vec2 u = sampler.next2();
  Rgb out = light_term(sp, wi, scene, u0, u, scratch);
  const auto s = bsdf_sample(sp, wi, scene.material.bsdf, u);
  if (s.pdf <= 0 || is_black(s.f) || !consistent(sp, wi, s.wo)) return out;
  const Ray ray = spawn_ray(sp.hit, scene.ply_radius(sp.hit), s.wo);
  const SceneHit hit = trace(ray, scene, scratch);
  if (hit.ply) return out;
  double pl = 0;
  const Rgb le = emitted(scene, ray, hit, side_split(sp, wi, scene.material.bsdf), pl);
  if (is_black(le)) return out;
  const double w = s.pdf / (s.pdf + pl);
  out += hadamard(s.f, le) * (shading_cosine(sp, s.wo) * w / s.pdf);
  return out;
}

void RenderConfig::validate() const {
  if (spp < 1) throw InvariantError("spp must be >= 1");
  if (max_depth < 1) throw InvariantError("max_depth must be >= 1");
  if (rr_start_depth < 0) throw InvariantError("rr_start_depth must be >= 0");
  if (tile_size < 1) throw InvariantError("tile_size must be >= 1");
}

Rgb radiance(const Ray& camera_ray, const Scene& scene, const RenderConfig& config, Sampler& sampler,
             TraceScratch* scratch) {
  const BsdfParams& bp = scene.material.bsdf;
  Rgb L{}, beta{1, 1, 1};
  Ray ray = camera_ray;
  double prev_pdf = 0;
  SideSplit prev_side;
  for (int depth = 0;; ++depth) {
    const SceneHit hit = trace(ray, scene, scratch);
    if (!hit.ply) {
      double pl = 0;
      const Rgb le = emitted(scene, ray, hit, prev_side, pl);
      const double w = (depth == 0 || !config.nee) ? 1.0 : prev_pdf / (prev_pdf + pl);
      L += hadamard(beta, le) * w;
      break;
    }
    if (depth >= config.max_depth) break;
    const ShadingPoint sp = apply_fiber_texture(*hit.ply, scene.material.fiber);
    const Vec3 wi = -ray.dir;
    const double u0 = sampler.next();
    const Vec2 u = sampler.next2();
    if (config.nee) L += hadamard(beta, light_term(sp, wi, scene, u0, u, scratch));

    const auto s = bsdf_sample(sp, wi, bp, u);
    if (s.pdf <= 0 || is_black(s.f) || !consistent(sp, wi, s.wo)) break;
    beta = hadamard(beta, s.f) * (shading_cosine(sp, s.wo) / s.pdf);
    prev_pdf = s.pdf;
    prev_side = side_split(sp, wi, bp);
    ray = spawn_ray(sp.hit, scene.ply_radius(sp.hit), s.wo);

    if (depth + 1 >= config.rr_start_depth) {
      const double q = std::clamp(max_component(beta), 0.05, 0.95);
      if (sampler.next() >= q) break;
      beta = beta / q;
    }
  }
  return L;
}

Image render(const Scene& scene, const RenderConfig& config) {
  config.validate();
  const Camera& cam = scene.camera;
  Image img(cam.width, cam.height);
  const int ts = config.tile_size;
  const int tx = (cam.width + ts - 1) / ts, ty = (cam.height + ts - 1) / ts;
  detail::parallel_for(static_cast<std::size_t>(tx) * ty, config.threads, [&](std::size_t tile) {
    TraceScratch scratch;
    const int x0 = static_cast<int>(tile % tx) * ts, y0 = static_cast<int>(tile / tx) * ts;
    for (int y = y0; y < std::min(cam.height, y0 + ts); ++y) {
      for (int x = x0; x < std::min(cam.width, x0 + ts); ++x) {
        const auto pixel = static_cast<std::uint64_t>(y) * cam.width + x;
        Rgb sum{};
        for (int s = 0; s < config.spp; ++s) {
          Sampler sampler(config.seed, pixel, static_cast<std::uint64_t>(s));
          const Vec2 j = sampler.next2();
          const Rgb L = radiance(cam.generate(x + j.x, y + j.y), scene, config, sampler, &scratch);
          if (std::isfinite(L.x) && std::isfinite(L.y) && std::isfinite(L.z)) sum += L;
        }
        img.set(x, y, sum / double(config.spp));
      }
    }
  });
  return img;
}

}  // namespace knitply
