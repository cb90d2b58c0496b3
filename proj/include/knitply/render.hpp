#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "knitply/image.hpp"
#include "knitply/intersect.hpp"
#include "knitply/mapping.hpp"
#include "knitply/shading.hpp"

namespace knitply {

// ---------------------------------------------------------------- shell

/// Half-space dot(normal, p) <= offset.
struct Plane {
  Vec3 normal;
  double offset = 0;
};

struct ShellBounds {
  double h_min = 0, h_max = 0;
};

/// Extrusion of one base triangle between h_min and h_max along its vertex
/// normals. Corners 0..2 are the bottom, 3..5 the top.
struct ShellPrism {
  std::uint32_t triangle = 0;
  std::array<Vec3, 6> corners;
  std::vector<Plane> planes;  // supporting planes of the corner hull, outward
  Aabb3 bounds;

  /// Parametric interval of the ray inside the hull, clipped to [tmin, tmax].
  std::optional<std::pair<double, double>> clip(const Ray& ray) const;
};

/// Builds the hull and pushes its planes out far enough to cover the curved
/// shell patch S(b) + h * n(b) for all barycentric b and h in the bounds.
ShellPrism make_prism(const BaseMesh& mesh, std::uint32_t triangle, const ShellBounds& bounds);

/// Point-to-uv projection along the interpolated normal; returns barycentrics.
std::array<double, 3> project_to_triangle(const BaseMesh& mesh, std::uint32_t triangle, const Vec3& p);

// ---------------------------------------------------------------- lights

struct Camera {
  Vec3 position{0, 0, 1};
  Vec3 look_at{0, 0, 0};
  Vec3 up{0, 1, 0};
  double vfov_deg = 40;
  int width = 64, height = 64;

  void validate() const;
  /// Ray through image-plane point (x, y) in pixels, (0, 0) at the top-left corner.
  Ray generate(double x, double y) const;
};

/// One-sided parallelogram emitter facing normalize(edge_u x edge_v).
struct AreaLight {
  Vec3 corner;
  Vec3 edge_u{1, 0, 0};
  Vec3 edge_v{0, 1, 0};
  Rgb radiance{1, 1, 1};

  Vec3 normal() const { return normalize(cross(edge_u, edge_v)); }
  double area() const { return length(cross(edge_u, edge_v)); }
  std::optional<double> intersect(const Ray& ray) const;
};

class Environment {
 public:
  enum class Kind { None, Constant, LatLong };

  static Environment none() { return {}; }
  static Environment constant(const Rgb& radiance);
  /// Row 0 is the +z pole; u = atan2(y, x) / 2pi.
  static Environment lat_long(const Image& image, double scale = 1.0);

  Kind kind() const { return kind_; }
  bool active() const { return kind_ != Kind::None; }
  Rgb eval(const Vec3& dir) const;

  struct Sample {
    Vec3 dir;
    double pdf = 0;
    Rgb radiance;
  };
  /// Constant maps are sampled cosine-weighted on the hemisphere of
  /// `normal` with probability `front` and on the opposite one otherwise;
  /// lat-long maps by luminance CDF inversion (both arguments unused).
  Sample sample(const Vec3& normal, double front, Vec2 u) const;
  double pdf(const Vec3& normal, double front, const Vec3& dir) const;

 private:
  Kind kind_ = Kind::None;
  Rgb constant_{};
  int width_ = 0, height_ = 0;
  std::vector<Rgb> pixels_;
  std::vector<double> marginal_;     // row CDF, size height + 1
  std::vector<double> conditional_;  // per-row column CDF, height * (width + 1)
  double total_ = 0;
};

// ---------------------------------------------------------------- scene

struct ShellOptions {
  double margin = 0.5;  // extra clearance around the ply surfaces, in ply radii
};

struct BvhNode {
  Aabb3 box;
  std::uint32_t first = 0;  // leaf: first prism; inner: right child
  std::uint32_t count = 0;  // 0 for inner nodes
};

struct Scene {
  BaseMesh mesh;
  MappingGrid grid;
  std::vector<MappedPly> plies;
  SegmentSet segments;
  ShellBounds shell;
  std::vector<ShellPrism> prisms;
  std::vector<BvhNode> bvh;
  double footprint_pad = 0;  // uv distance added around each footprint
  Material material;
  std::vector<AreaLight> lights;
  Environment environment;
  Camera camera;

  static Scene build(BaseMesh mesh, MappingGrid grid, std::vector<MappedPly> plies, Material material,
                     std::vector<AreaLight> lights, Environment environment, Camera camera,
                     const ShellOptions& options = {});

  std::size_t light_count() const { return lights.size() + (environment.active() ? 1 : 0); }
  double ply_radius(const HitRecord& h) const;
};

// ---------------------------------------------------------------- tracing

struct TraceStats {
  std::uint64_t segment_tests = 0;
  std::uint64_t prism_tests = 0;
};

/// Per-thread scratch that deduplicates segment tests within one ray query.
class TraceScratch {
 public:
  bool mark(std::uint32_t segment, std::size_t total);
  void next_ray();

 private:
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 1;
};

struct PrismCandidate {
  std::uint32_t triangle = 0;
  double t_entry = 0, t_exit = 0;
  Vec2 uv_entry, uv_exit;
};

/// Prisms whose hulls the ray crosses, sorted by entry t.
std::vector<PrismCandidate> global_intersect(const Ray& ray, const Scene& scene, TraceStats* stats = nullptr);

/// Nearest ply hit among the grid segments under the candidates' uv
/// footprints, stopping once the best hit precedes the next entry.
std::optional<HitRecord> local_intersect(const Ray& ray, const Scene& scene, std::span<const PrismCandidate> candidates,
                                         TraceScratch* scratch = nullptr, TraceStats* stats = nullptr);

/// Both stages.
std::optional<HitRecord> intersect_plies(const Ray& ray, const Scene& scene, TraceScratch* scratch = nullptr,
                                         TraceStats* stats = nullptr);

struct SceneHit {
  std::optional<HitRecord> ply;
  int light = -1;  // area light index when the nearest hit is an emitter
  double t = std::numeric_limits<double>::infinity();
};

SceneHit trace(const Ray& ray, const Scene& scene, TraceScratch* scratch = nullptr, TraceStats* stats = nullptr);

/// True if plies or emitters block the ray before `tmax`.
bool occluded(const Ray& ray, const Scene& scene, double tmax, TraceScratch* scratch = nullptr);

/// Ray leaving a hit towards `dir`, offset off the surface on that side.
Ray spawn_ray(const HitRecord& hit, double radius, const Vec3& dir);

// ---------------------------------------------------------------- integration

/// Counter-based stream: the value at (seed, pixel, sample, index) is a pure hash.
class Sampler {
 public:
  Sampler(std::uint64_t seed, std::uint64_t pixel, std::uint64_t sample);
  double next();
  Vec2 next2() { return {next(), next()}; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// One light sample plus one BSDF sample, balance-heuristic weighted.
Rgb estimate_direct(const ShadingPoint& sp, const Vec3& wi, const Scene& scene, Sampler& sampler,
                    TraceScratch* scratch = nullptr);

struct RenderConfig {
  int spp = 16;
  int max_depth = 64;
  int rr_start_depth = 3;
  std::uint64_t seed = 0;
  int tile_size = 16;
  unsigned threads = 0;  // 0 = hardware concurrency
  bool nee = true;

  void validate() const;
};

/// Path-traced radiance along a camera ray.
Rgb radiance(const Ray& ray, const Scene& scene, const RenderConfig& config, Sampler& sampler,
             TraceScratch* scratch = nullptr);

Image render(const Scene& scene, const RenderConfig& config);

}  // namespace knitply
