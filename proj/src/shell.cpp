#include <algorithm>
#include <cmath>
#include <numeric>

#include "knitply/errors.hpp"
#include "knitply/render.hpp"

namespace knitply {

namespace {

std::array<Vec3, 3> triangle_positions(const BaseMesh& mesh, std::uint32_t t) {
  const auto& tri = mesh.triangles[t];
  return {mesh.vertices[tri[0]].position, mesh.vertices[tri[1]].position, mesh.vertices[tri[2]].position};
}

std::array<Vec2, 3> triangle_uvs(const BaseMesh& mesh, std::uint32_t t) {
  const auto& tri = mesh.triangles[t];
  return {mesh.vertices[tri[0]].uv, mesh.vertices[tri[1]].uv, mesh.vertices[tri[2]].uv};
}

Vec2 uv_at(const BaseMesh& mesh, std::uint32_t t, const std::array<double, 3>& b) {
  const auto uv = triangle_uvs(mesh, t);
  return uv[0] * b[0] + uv[1] * b[1] + uv[2] * b[2];
}

// Barycentrics of a point on the plane of (a, b, c) with normal n (unnormalized).
std::array<double, 3> planar_barycentric(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& n, const Vec3& q) {
  const double area = dot(n, n);
  const double wb = dot(cross(q - a, c - a), n) / area;
  const double wc = dot(cross(b - a, q - a), n) / area;
  return {1 - wb - wc, wb, wc};
}

bool slab_hit(const Aabb3& box, const Vec3& origin, const Vec3& inv, double tmin, double tmax) {
  for (int a = 0; a < 3; ++a) {
    double t0 = (box.lo[a] - origin[a]) * inv[a];
    double t1 = (box.hi[a] - origin[a]) * inv[a];
    if (t0 > t1) std::swap(t0, t1);
    // NaN from 0 * inf keeps the interval unchanged.
    if (t0 > tmin) tmin = t0;
    if (t1 < tmax) tmax = t1;
    if (tmin > tmax) return false;
  }
  return true;
}

std::uint32_t build_bvh(std::vector<BvhNode>& nodes, std::vector<ShellPrism>& prisms, std::uint32_t first,
                        std::uint32_t count) {
  const auto index = static_cast<std::uint32_t>(nodes.size());
  nodes.emplace_back();
  Aabb3 box, centroids;
  for (std::uint32_t i = first; i < first + count; ++i) {
    box.extend(prisms[i].bounds);
    centroids.extend(prisms[i].bounds.center());
  }
  nodes[index].box = box;
  if (count <= 4) {
    nodes[index].first = first;
    nodes[index].count = count;
    return index;
  }
  const Vec3 ext = centroids.hi - centroids.lo;
  const int axis = ext.x >= ext.y && ext.x >= ext.z ? 0 : (ext.y >= ext.z ? 1 : 2);
  const std::uint32_t mid = first + count / 2;
  std::nth_element(prisms.begin() + first, prisms.begin() + mid, prisms.begin() + first + count,
                   [axis](const ShellPrism& a, const ShellPrism& b) {
                     const double ca = a.bounds.center()[axis], cb = b.bounds.center()[axis];
                     return ca != cb ? ca < cb : a.triangle < b.triangle;
                   });
  build_bvh(nodes, prisms, first, mid - first);
  const std::uint32_t right = build_bvh(nodes, prisms, mid, first + count - mid);
  nodes[index].first = right;
  nodes[index].count = 0;
  return index;
}

}  // namespace

std::optional<std::pair<double, double>> ShellPrism::clip(const Ray& ray) const {
  double t0 = ray.tmin, t1 = ray.tmax;
  for (const auto& pl : planes) {
    const double denom = dot(pl.normal, ray.dir);
    const double num = pl.offset - dot(pl.normal, ray.origin);
    if (denom == 0) {
      if (num < 0) return std::nullopt;
      continue;
    }
    const double t = num / denom;
    if (denom > 0) {
      t1 = std::min(t1, t);
    } else {
      t0 = std::max(t0, t);
    }
    if (t0 > t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

ShellPrism make_prism(const BaseMesh& mesh, std::uint32_t triangle, const ShellBounds& bounds) {
  ShellPrism pr;
  pr.triangle = triangle;
  const auto& tri = mesh.triangles[triangle];
  for (int k = 0; k < 3; ++k) {
    const auto& v = mesh.vertices[tri[k]];
    pr.corners[k] = v.position + v.normal * bounds.h_min;
    pr.corners[k + 3] = v.position + v.normal * bounds.h_max;
  }
  double scale = 0;
  for (const auto& c : pr.corners) scale = std::max(scale, length(c - pr.corners[0]));
  const double tol = 1e-12 * std::max(scale, 1e-300);

  for (int i = 0; i < 6; ++i) {
    for (int j = i + 1; j < 6; ++j) {
      for (int k = j + 1; k < 6; ++k) {
        Vec3 n = cross(pr.corners[j] - pr.corners[i], pr.corners[k] - pr.corners[i]);
        const double len = length(n);
        if (len <= 1e-10 * scale * scale) continue;
        n = n / len;
        const double d = dot(n, pr.corners[i]);
        double lo = 0, hi = 0;
        for (const auto& c : pr.corners) {
          lo = std::min(lo, dot(n, c) - d);
          hi = std::max(hi, dot(n, c) - d);
        }
        Plane pl;
        if (hi <= tol) {
          pl = {n, d};
        } else if (lo >= -tol) {
          pl = {-n, -d};
        } else {
          continue;
        }
        const bool dup = std::any_of(pr.planes.begin(), pr.planes.end(), [&](const Plane& q) {
          return dot(q.normal, pl.normal) > 1 - 1e-12 && std::abs(q.offset - pl.offset) <= tol;
        });
        if (!dup) pr.planes.push_back(pl);
      }
    }
  }

  // Push planes out to cover the curved patch between the corners.
  constexpr int n = 12;
  std::vector<double> excess(pr.planes.size(), 0.0);
  for (int a = 0; a <= n; ++a) {
    for (int b = 0; a + b <= n; ++b) {
      const std::array<double, 3> bary{double(n - a - b) / n, double(a) / n, double(b) / n};
      for (double h : {bounds.h_min, bounds.h_max}) {
        const Vec3 p = map_point(mesh, triangle, bary, h).position;
        for (std::size_t q = 0; q < pr.planes.size(); ++q) {
          excess[q] = std::max(excess[q], dot(pr.planes[q].normal, p) - pr.planes[q].offset);
        }
      }
    }
  }
  for (std::size_t q = 0; q < pr.planes.size(); ++q) pr.planes[q].offset += 1.25 * excess[q] + 1e-9 * scale;

  // Bounds from the vertices of the inflated hull (feasible plane triples).
  const auto& pl = pr.planes;
  for (std::size_t a = 0; a < pl.size(); ++a) {
    for (std::size_t b = a + 1; b < pl.size(); ++b) {
      for (std::size_t c = b + 1; c < pl.size(); ++c) {
        const Vec3 bc = cross(pl[b].normal, pl[c].normal);
        const double det = dot(pl[a].normal, bc);
        if (std::abs(det) < 1e-12) continue;
        const Vec3 v = (bc * pl[a].offset + cross(pl[c].normal, pl[a].normal) * pl[b].offset +
                        cross(pl[a].normal, pl[b].normal) * pl[c].offset) /
                       det;
        const bool inside = std::all_of(pl.begin(), pl.end(), [&](const Plane& q) {
          return dot(q.normal, v) <= q.offset + 1e-9 * scale;
        });
        if (inside) pr.bounds.extend(v);
      }
    }
  }
  const Vec3 g{1e-9 * scale, 1e-9 * scale, 1e-9 * scale};
  pr.bounds.lo = pr.bounds.lo - g;
  pr.bounds.hi = pr.bounds.hi + g;
  return pr;
}

std::array<double, 3> project_to_triangle(const BaseMesh& mesh, std::uint32_t triangle, const Vec3& p) {
  const auto pos = triangle_positions(mesh, triangle);
  const auto& tri = mesh.triangles[triangle];
  const Vec3 nf = cross(pos[1] - pos[0], pos[2] - pos[0]);
  auto bary = planar_barycentric(pos[0], pos[1], pos[2], nf, p - nf * (dot(p - pos[0], nf) / dot(nf, nf)));
  for (int it = 0; it < 8; ++it) {
    const Vec3 n = mesh.vertices[tri[0]].normal * bary[0] + mesh.vertices[tri[1]].normal * bary[1] +
                   mesh.vertices[tri[2]].normal * bary[2];
    const double dn = dot(n, nf);
    if (std::abs(dn) < 1e-12 * length(n) * length(nf)) break;
    const Vec3 q = p - n * (dot(p - pos[0], nf) / dn);
    const auto next = planar_barycentric(pos[0], pos[1], pos[2], nf, q);
    const double change = std::abs(next[0] - bary[0]) + std::abs(next[1] - bary[1]);
    bary = next;
    if (change < 1e-12) break;
  }
  return bary;
}

Scene Scene::build(BaseMesh mesh, MappingGrid grid, std::vector<MappedPly> plies, Material material,
                   std::vector<AreaLight> lights, Environment environment, Camera camera, const ShellOptions& options) {
  Scene s;
  s.mesh = std::move(mesh);
  s.grid = std::move(grid);
  s.plies = std::move(plies);
  s.material = std::move(material);
  s.lights = std::move(lights);
  s.environment = std::move(environment);
  s.camera = camera;

  s.mesh.validate();
  s.material.bsdf.validate();
  s.material.fiber.validate();
  s.camera.validate();
  if (s.light_count() == 0) throw InvariantError("scene needs at least one light");
  for (const auto& l : s.lights) {
    if (!(l.area() > 0)) throw InvariantError("area light has zero area");
  }
  if (s.grid.cells.size() != std::size_t(s.grid.gu) * std::size_t(s.grid.gv)) {
    throw InvariantError("mapping grid cell count does not match its resolution");
  }

  std::vector<PlyCurve> curves;
  curves.reserve(s.plies.size());
  for (const auto& p : s.plies) curves.push_back(p.ply);
  s.segments = SegmentSet::build(curves);
  const std::size_t total = s.segments.segments.size();
  for (const auto& c : s.grid.cells) {
    for (auto id : c.segments) {
      if (id >= total) throw InvariantError("mapping grid references segment " + std::to_string(id) + " beyond the plies");
    }
  }

  double r_max = 0, h_lo = 1e300, h_hi = -1e300;
  for (const auto& p : s.plies) {
    r_max = std::max(r_max, p.ply.radius);
    for (double h : p.height) {
      h_lo = std::min(h_lo, h);
      h_hi = std::max(h_hi, h);
    }
  }
  if (s.plies.empty() || h_lo > h_hi) {
    h_lo = h_hi = 0;
  }
  const double pad = r_max * (1 + options.margin);
  s.shell = {h_lo - pad, h_hi + pad};
  if (s.shell.h_max <= s.shell.h_min) s.shell.h_max = s.shell.h_min + 1e-9;

  // uv footprint dilation: the ply surface may sit up to `pad` (object
  // space) away from the centerline binned in the grid.
  double uv_per_object = 0;
  for (std::uint32_t t = 0; t < s.mesh.triangles.size(); ++t) {
    const auto pos = triangle_positions(s.mesh, t);
    const auto uv = triangle_uvs(s.mesh, t);
    for (int e = 0; e < 3; ++e) {
      const double lo = length(pos[(e + 1) % 3] - pos[e]);
      if (lo > 0) uv_per_object = std::max(uv_per_object, length(uv[(e + 1) % 3] - uv[e]) / lo);
    }
  }
  s.footprint_pad = 2 * pad * uv_per_object;

  // Only triangles with segments nearby can yield hits.
  for (std::uint32_t t = 0; t < s.mesh.triangles.size(); ++t) {
    Aabb2 box;
    for (const auto& p : triangle_uvs(s.mesh, t)) box.extend(p);
    const Vec2 d{s.footprint_pad, s.footprint_pad};
    auto [i0, j0] = s.grid.cell_coords(box.lo - d);
    auto [i1, j1] = s.grid.cell_coords(box.hi + d);
    bool any = false;
    for (int j = j0; j <= j1 && !any; ++j) {
      for (int i = i0; i <= i1 && !any; ++i) {
        any = !s.grid.cell(i, j).segments.empty();
      }
    }
    if (any) s.prisms.push_back(make_prism(s.mesh, t, s.shell));
  }
  if (!s.prisms.empty()) build_bvh(s.bvh, s.prisms, 0, static_cast<std::uint32_t>(s.prisms.size()));
  return s;
}

double Scene::ply_radius(const HitRecord& h) const {
  return segments.segments[segments.offsets[h.ply_id] + h.segment_id].radius;
}

bool TraceScratch::mark(std::uint32_t segment, std::size_t total) {
  if (stamp_.size() < total) stamp_.resize(total, 0);
  if (stamp_[segment] == epoch_) return false;
  stamp_[segment] = epoch_;
  return true;
}

void TraceScratch::next_ray() {
  if (++epoch_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0u);
    epoch_ = 1;
  }
}

std::vector<PrismCandidate> global_intersect(const Ray& ray, const Scene& scene, TraceStats* stats) {
  std::vector<PrismCandidate> out;
  if (scene.bvh.empty()) return out;
  const Vec3 inv{1 / ray.dir.x, 1 / ray.dir.y, 1 / ray.dir.z};
  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const BvhNode& node = scene.bvh[stack[--top]];
    if (!slab_hit(node.box, ray.origin, inv, ray.tmin, ray.tmax)) continue;
    if (node.count == 0) {
      const auto self = static_cast<std::uint32_t>(&node - scene.bvh.data());
      stack[top++] = node.first;
      stack[top++] = self + 1;
      continue;
    }
    for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
      const ShellPrism& pr = scene.prisms[i];
      if (stats) ++stats->prism_tests;
      const auto span = pr.clip(ray);
      if (!span) continue;
      PrismCandidate c;
      c.triangle = pr.triangle;
      c.t_entry = span->first;
      c.t_exit = span->second;
      c.uv_entry = uv_at(scene.mesh, pr.triangle, project_to_triangle(scene.mesh, pr.triangle, ray.at(c.t_entry)));
      c.uv_exit = uv_at(scene.mesh, pr.triangle, project_to_triangle(scene.mesh, pr.triangle, ray.at(c.t_exit)));
      out.push_back(c);
    }
  }
  std::sort(out.begin(), out.end(), [](const PrismCandidate& a, const PrismCandidate& b) {
    return a.t_entry != b.t_entry ? a.t_entry < b.t_entry : a.triangle < b.triangle;
  });
  return out;
}

namespace {

std::optional<SegmentHit> local_search(const Ray& ray, const Scene& scene, std::span<const PrismCandidate> candidates,
                                       TraceScratch* scratch, TraceStats* stats, bool any_hit) {
  TraceScratch local;
  if (!scratch) scratch = &local;
  scratch->next_ray();
  const MappingGrid& g = scene.grid;
  const std::size_t total = scene.segments.segments.size();
  std::optional<SegmentHit> best;
  std::uint64_t tests = 0;
  const Vec2 d{scene.footprint_pad, scene.footprint_pad};
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const PrismCandidate& c = candidates[k];
    if (best && best->hit.t < c.t_entry) break;
    // Footprint of the ray inside this prism: the entry/exit uv box, limited
    // to the triangle's own uv box.
    Aabb2 tri;
    for (const auto& p : triangle_uvs(scene.mesh, c.triangle)) tri.extend(p);
    Vec2 lo{std::min(c.uv_entry.x, c.uv_exit.x), std::min(c.uv_entry.y, c.uv_exit.y)};
    Vec2 hi{std::max(c.uv_entry.x, c.uv_exit.x), std::max(c.uv_entry.y, c.uv_exit.y)};
    lo = {std::clamp(lo.x, tri.lo.x, tri.hi.x), std::clamp(lo.y, tri.lo.y, tri.hi.y)};
    hi = {std::clamp(hi.x, tri.lo.x, tri.hi.x), std::clamp(hi.y, tri.lo.y, tri.hi.y)};
    const auto [i0, j0] = g.cell_coords(lo - d);
    const auto [i1, j1] = g.cell_coords(hi + d);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        for (auto seg : g.cell(i, j).segments) {
          if (!scratch->mark(seg, total)) continue;
          const auto h = intersect_segment(ray, scene.segments, seg, &tests);
          if (h && (!best || h->hit.t < best->hit.t || (h->hit.t == best->hit.t && h->flat < best->flat))) best = h;
          if (best && any_hit) {
            if (stats) stats->segment_tests += tests;
            return best;
          }
        }
      }
    }
  }
  if (stats) stats->segment_tests += tests;
  return best;
}

}  // namespace

std::optional<HitRecord> local_intersect(const Ray& ray, const Scene& scene, std::span<const PrismCandidate> candidates,
                                         TraceScratch* scratch, TraceStats* stats) {
  const auto best = local_search(ray, scene, candidates, scratch, stats, false);
  if (!best) return std::nullopt;
  return make_hit_record(scene.segments.segments[best->flat], best->hit);
}

std::optional<HitRecord> intersect_plies(const Ray& ray, const Scene& scene, TraceScratch* scratch, TraceStats* stats) {
  const auto candidates = global_intersect(ray, scene, stats);
  if (candidates.empty()) return std::nullopt;
  return local_intersect(ray, scene, candidates, scratch, stats);
}

SceneHit trace(const Ray& ray, const Scene& scene, TraceScratch* scratch, TraceStats* stats) {
  SceneHit out;
  out.ply = intersect_plies(ray, scene, scratch, stats);
  if (out.ply) out.t = out.ply->t;
  for (std::size_t i = 0; i < scene.lights.size(); ++i) {
    const auto t = scene.lights[i].intersect(ray);
    if (t && *t < out.t) {
      out.t = *t;
      out.light = static_cast<int>(i);
    }
  }
  if (out.light >= 0) out.ply.reset();
  return out;
}

bool occluded(const Ray& ray, const Scene& scene, double tmax, TraceScratch* scratch) {
  Ray r = ray;
  r.tmax = std::min(r.tmax, tmax);
  for (const auto& l : scene.lights) {
    if (l.intersect(r)) return true;
  }
  const auto candidates = global_intersect(r, scene);
  return !candidates.empty() && local_search(r, scene, candidates, scratch, nullptr, true).has_value();
}

Ray spawn_ray(const HitRecord& hit, double radius, const Vec3& dir) {
  const double side = dot(dir, hit.geo_normal) >= 0 ? 1.0 : -1.0;
  Ray r;
  r.origin = hit.position + hit.geo_normal * (side * self_intersection_epsilon(radius));
  r.dir = dir;
  return r;
}

}  // namespace knitply
