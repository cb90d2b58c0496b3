#include "knitply/intersect.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "knitply/errors.hpp"

namespace knitply {

namespace {

constexpr double kParallelEpsilon = 1e-12;

Frame record_frame(const Vec3& cap_normal, const Vec3& ply_normal) {
  Vec3 n = reject(ply_normal, cap_normal);
  if (length(n) < 1e-9) n = any_orthogonal(cap_normal);
  return make_frame(cap_normal, n);
}

Vec3 slerp(const Vec3& a, const Vec3& b, double t) {
  const double c = std::clamp(dot(a, b), -1.0, 1.0);
  const double omega = std::acos(c);
  if (omega < 1e-9 || omega > kPi - 1e-6) return lerp(a, b, t);
  const double s = std::sin(omega);
  return a * (std::sin((1 - t) * omega) / s) + b * (std::sin(t * omega) / s);
}

bool inside_caps(const SegmentCylinder& seg, const Vec3& p) {
  return cap_distance(seg, 0, p) >= 0 && cap_distance(seg, 1, p) >= 0;
}

RawHit lateral_hit(const Ray& ray, const SegmentCylinder& seg, double t) {
  const Vec3 a = seg.axis();
  RawHit h;
  h.t = t;
  h.position = ray.at(t);
  h.geo_normal = normalize(reject(h.position - seg.p0, a));
  return h;
}

// Both roots of the infinite cylinder, ascending; false when the ray runs parallel or misses.
bool cylinder_roots(const Ray& ray, const SegmentCylinder& seg, double& t0, double& t1) {
  const Vec3 a = seg.axis();
  const Vec3 o = reject(ray.origin - seg.p0, a);
  const Vec3 d = reject(ray.dir, a);
  const double A = dot(d, d);
  if (A < kParallelEpsilon) return false;
  const double B = 2 * dot(o, d);
  const double C = dot(o, o) - seg.radius * seg.radius;
  const double disc = B * B - 4 * A * C;
  if (disc < 0) return false;
  const double q = -0.5 * (B + std::copysign(std::sqrt(disc), B));
  t0 = q / A;
  t1 = q != 0 ? C / q : t0;
  if (t0 > t1) std::swap(t0, t1);
  return true;
}

bool in_range(const Ray& ray, double t) { return t >= ray.tmin && t <= ray.tmax; }

bool misses_bound(const Ray& ray, const SegmentCylinder& seg) {
  const Vec3 c = (seg.p0 + seg.p1) * 0.5 - ray.origin;
  const double along = dot(c, ray.dir);
  const double r = seg.bound_radius;
  if (along + r < ray.tmin || along - r > ray.tmax) return true;
  return length_squared(c) - along * along > r * r;
}

const std::optional<RawHit>& nearer(const std::optional<RawHit>& a, const std::optional<RawHit>& b) {
  if (!a) return b;
  if (!b) return a;
  return b->t < a->t ? b : a;
}

}  // namespace

std::vector<SegmentCylinder> build_segments(const PlyCurve& ply, std::uint32_t ply_id) {
  const std::size_t n = ply.vertices.size();
  if (n < 2) throw DegenerateError("ply " + std::to_string(ply_id) + " has fewer than 2 vertices");
  std::vector<Vec3> t(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Vec3 d = ply.vertices[i + 1].position - ply.vertices[i].position;
    if (length(d) <= 0) {
      throw DegenerateError("ply " + std::to_string(ply_id) + " has a zero-length segment at vertex " + std::to_string(i));
    }
    t[i] = normalize(d);
  }
  const bool closed = n >= 4 && distance(ply.vertices.front().position, ply.vertices.back().position) <= 1e-6 * ply.radius;
  auto joint = [&](const Vec3& a, const Vec3& b, std::size_t i) {
    const Vec3 m = a + b;
    if (length(m) < 1e-9) {
      throw DegenerateError("ply " + std::to_string(ply_id) + " folds back on itself at vertex " + std::to_string(i));
    }
    return normalize(m);
  };
  std::vector<Vec3> cap_normal(n);
  for (std::size_t i = 1; i + 1 < n; ++i) cap_normal[i] = joint(t[i - 1], t[i], i);
  if (closed) {
    cap_normal[0] = cap_normal[n - 1] = joint(t[n - 2], t[0], 0);
  } else {
    cap_normal[0] = t[0];
    cap_normal[n - 1] = t[n - 2];
  }
  std::vector<SegmentCylinder> out(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    auto& s = out[i];
    s.p0 = ply.vertices[i].position;
    s.p1 = ply.vertices[i + 1].position;
    s.radius = ply.radius;
    s.cap0 = {s.p0, cap_normal[i], !closed && i == 0};
    s.cap1 = {s.p1, cap_normal[i + 1], !closed && i + 2 == n};
    s.frame0 = record_frame(cap_normal[i], ply.vertices[i].normal);
    s.frame1 = record_frame(cap_normal[i + 1], ply.vertices[i + 1].normal);
    s.arclen0 = ply.vertices[i].arclen;
    s.arclen1 = ply.vertices[i + 1].arclen;
    s.ply_id = ply_id;
    s.segment_id = static_cast<std::uint32_t>(i);
    const Vec3 a = s.axis();
    const double half = 0.5 * s.length();
    for (const auto* cap : {&s.cap0, &s.cap1}) {
      const double c = std::abs(dot(cap->plane_normal, a));
      const double ext = half + s.radius * std::sqrt(std::max(0.0, 1 - c * c)) / c;
      s.bound_radius = std::max(s.bound_radius, std::sqrt(ext * ext + s.radius * s.radius));
    }
    s.bound_radius *= 1 + 1e-9;
  }
  return out;
}

double cap_distance(const SegmentCylinder& seg, int cap, const Vec3& p) {
  return cap == 0 ? dot(p - seg.cap0.center, seg.cap0.plane_normal) : dot(seg.cap1.center - p, seg.cap1.plane_normal);
}

std::optional<RawHit> ray_infinite_cylinder(const Ray& ray, const SegmentCylinder& seg) {
  double t0, t1;
  if (!cylinder_roots(ray, seg, t0, t1)) return std::nullopt;
  for (double t : {t0, t1}) {
    if (in_range(ray, t)) return lateral_hit(ray, seg, t);
  }
  return std::nullopt;
}

std::optional<RawHit> ray_cylinder(const Ray& ray, const SegmentCylinder& seg) {
  double t0, t1;
  if (!cylinder_roots(ray, seg, t0, t1)) return std::nullopt;
  for (double t : {t0, t1}) {
    if (!in_range(ray, t)) continue;
    if (inside_caps(seg, ray.at(t))) return lateral_hit(ray, seg, t);
  }
  return std::nullopt;
}

std::optional<RawHit> ray_end_disks(const Ray& ray, const SegmentCylinder& seg) {
  std::optional<RawHit> best;
  const Vec3 a = seg.axis();
  for (int c = 0; c < 2; ++c) {
    const EllipseCap& cap = c == 0 ? seg.cap0 : seg.cap1;
    if (!cap.disk) continue;
    const double denom = dot(ray.dir, cap.plane_normal);
    if (std::abs(denom) < kParallelEpsilon) continue;
    const double t = dot(cap.center - ray.origin, cap.plane_normal) / denom;
    if (!in_range(ray, t) || (best && best->t <= t)) continue;
    const Vec3 p = ray.at(t);
    if (length_squared(p - cap.center) > seg.radius * seg.radius) continue;
    best = RawHit{t, p, c == 0 ? -a : a, true, false};
  }
  return best;
}

std::optional<RawHit> joint_trim(const Ray& ray, const RawHit& raw, const SegmentCylinder& seg,
                                 const SegmentCylinder& neighbor) {
  (void)raw;
  const auto own = ray_cylinder(ray, seg);
  auto other = ray_cylinder(ray, neighbor);
  if (other) other->on_neighbor = true;
  return nearer(own, other);
}

Vec3 surface_direction(const SegmentCylinder& seg, double phi) {
  const Vec3 a = seg.axis();
  Vec3 e1 = reject(seg.frame0.normal, a);
  e1 = length(e1) < 1e-9 ? any_orthogonal(a) : normalize(e1);
  const Vec3 e2 = cross(a, e1);
  return e1 * std::cos(phi) + e2 * std::sin(phi);
}

double surface_angle(const SegmentCylinder& seg, const Vec3& p) {
  const Vec3 a = seg.axis();
  Vec3 e1 = reject(seg.frame0.normal, a);
  e1 = length(e1) < 1e-9 ? any_orthogonal(a) : normalize(e1);
  const Vec3 e2 = cross(a, e1);
  const Vec3 d = p - seg.p0;
  return std::atan2(dot(d, e2), dot(d, e1));
}

CapBoundary cap_boundary(const SegmentCylinder& seg, int cap, double phi) {
  const Vec3 a = seg.axis();
  const Vec3 r = surface_direction(seg, phi);
  const EllipseCap& c = cap == 0 ? seg.cap0 : seg.cap1;
  const Vec3 q = seg.p0 + r * seg.radius;
  const double t = dot(c.center - q, c.plane_normal) / dot(a, c.plane_normal);
  return {q + a * t, r};
}

Frame blend_frames(const Frame& a, const Frame& b, double lambda) {
  const Vec3 t = normalize(slerp(a.tangent, b.tangent, lambda));
  Vec3 n = reject(slerp(a.normal, b.normal, lambda), t);
  if (length(n) < 1e-9) n = reject(lambda < 0.5 ? a.normal : b.normal, t);
  if (length(n) < 1e-9) n = any_orthogonal(t);
  return make_frame(t, n);
}

double cap_fraction(const SegmentCylinder& seg, const Vec3& p) {
  const Vec3 a = seg.axis();
  const double phi = surface_angle(seg, p);
  const double t0 = dot(cap_boundary(seg, 0, phi).point - seg.p0, a);
  const double t1 = dot(cap_boundary(seg, 1, phi).point - seg.p0, a);
  return (dot(p - seg.p0, a) - t0) / (t1 - t0);
}

Frame interpolate_frame(const SegmentCylinder& seg, const RawHit& hit) {
  const double lambda = std::clamp(cap_fraction(seg, hit.position), 0.0, 1.0);
  const Vec3 r = hit.geo_normal;
  auto end_frame = [&](const Vec3& m) {
    Vec3 n = reject(r, m);
    if (length(n) < 1e-9) n = any_orthogonal(m);
    return make_frame(m, n);
  };
  return blend_frames(end_frame(seg.cap0.plane_normal), end_frame(seg.cap1.plane_normal), lambda);
}

double angular_phase(const SegmentCylinder& seg, const Vec3& p) {
  const double lambda = std::clamp(cap_fraction(seg, p), 0.0, 1.0);
  const Frame f = blend_frames(seg.frame0, seg.frame1, lambda);
  const Vec3 d = reject(p - seg.p0, seg.axis());
  return wrap_two_pi(std::atan2(dot(d, f.binormal), dot(d, f.normal)));
}

HitRecord make_hit_record(const SegmentCylinder& seg, const RawHit& hit) {
  HitRecord rec;
  rec.t = hit.t;
  rec.position = hit.position;
  rec.geo_normal = hit.geo_normal;
  rec.ply_id = seg.ply_id;
  rec.segment_id = seg.segment_id;
  if (hit.on_disk) {
    const bool start = dot(hit.geo_normal, seg.axis()) < 0;
    const Frame& f = start ? seg.frame0 : seg.frame1;
    Vec3 t = reject(f.normal, hit.geo_normal);
    if (length(t) < 1e-9) t = any_orthogonal(hit.geo_normal);
    rec.shading_frame = make_frame(t, hit.geo_normal);
    rec.beta = 0;
    rec.s = start ? seg.arclen0 : seg.arclen1;
    return rec;
  }
  const double lambda = std::clamp(cap_fraction(seg, hit.position), 0.0, 1.0);
  rec.shading_frame = interpolate_frame(seg, hit);
  rec.beta = angular_phase(seg, hit.position);
  rec.s = seg.arclen0 + lambda * (seg.arclen1 - seg.arclen0);
  return rec;
}

SegmentSet SegmentSet::build(std::span<const PlyCurve> plies) {
  SegmentSet set;
  set.offsets.push_back(0);
  for (std::size_t p = 0; p < plies.size(); ++p) {
    auto segs = build_segments(plies[p], static_cast<std::uint32_t>(p));
    set.segments.insert(set.segments.end(), segs.begin(), segs.end());
    set.offsets.push_back(static_cast<std::uint32_t>(set.segments.size()));
  }
  return set;
}

const SegmentCylinder* SegmentSet::prev(std::uint32_t flat) const {
  const auto& s = segments[flat];
  const std::uint32_t first = offsets[s.ply_id], last = offsets[s.ply_id + 1] - 1;
  if (flat > first) return &segments[flat - 1];
  return s.cap0.disk ? nullptr : &segments[last];
}

const SegmentCylinder* SegmentSet::next(std::uint32_t flat) const {
  const auto& s = segments[flat];
  const std::uint32_t first = offsets[s.ply_id], last = offsets[s.ply_id + 1] - 1;
  if (flat < last) return &segments[flat + 1];
  return s.cap1.disk ? nullptr : &segments[first];
}

std::optional<SegmentHit> intersect_segment(const Ray& ray, const SegmentSet& set, std::uint32_t flat,
                                            std::uint64_t* tests) {
  const SegmentCylinder& seg = set.segments[flat];
  if (tests) ++*tests;
  if (seg.bound_radius > 0 && misses_bound(ray, seg)) return std::nullopt;
  std::optional<SegmentHit> best;
  auto offer = [&](const std::optional<RawHit>& h, std::uint32_t owner) {
    if (h && (!best || h->t < best->hit.t)) best = SegmentHit{*h, owner};
  };
  offer(ray_end_disks(ray, seg), flat);
  double t0, t1;
  if (!cylinder_roots(ray, seg, t0, t1)) return best;
  for (double t : {t0, t1}) {
    if (!in_range(ray, t)) continue;
    const Vec3 p = ray.at(t);
    if (inside_caps(seg, p)) {
      offer(lateral_hit(ray, seg, t), flat);
      return best;
    }
    // The nearest root lies in a joint zone; let the neighbor decide.
    const bool past_end = cap_distance(seg, 1, p) < 0;
    const SegmentCylinder* nb = past_end ? set.next(flat) : set.prev(flat);
    if (nb) {
      if (tests) ++*tests;
      const auto h = joint_trim(ray, lateral_hit(ray, seg, t), seg, *nb);
      offer(h, h && h->on_neighbor ? static_cast<std::uint32_t>(nb - set.segments.data()) : flat);
      return best;
    }
  }
  return best;
}

std::optional<HitRecord> intersect_bruteforce(const Ray& ray, const SegmentSet& set, std::uint64_t* tests) {
  std::optional<RawHit> best;
  std::uint32_t owner = 0;
  for (std::uint32_t i = 0; i < set.segments.size(); ++i) {
    if (tests) ++*tests;
    auto h = ray_cylinder(ray, set.segments[i]);
    const auto d = ray_end_disks(ray, set.segments[i]);
    h = nearer(h, d);
    if (h && (!best || h->t < best->t)) {
      best = h;
      owner = i;
    }
  }
  if (!best) return std::nullopt;
  return make_hit_record(set.segments[owner], *best);
}

}  // namespace knitply
