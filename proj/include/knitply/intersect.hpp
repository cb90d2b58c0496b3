#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "knitply/plygen.hpp"
#include "knitply/vecmath.hpp"

namespace knitply {

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit length
  double tmin = 0;
  double tmax = std::numeric_limits<double>::infinity();

  Vec3 at(double t) const { return origin + dir * t; }
};

/// Planar slice bounding one end of a segment cylinder. At a joint the plane
/// normal is the average of the adjacent tangents; an open ply end gets a
/// perpendicular plane closed by a disk.
struct EllipseCap {
  Vec3 center;
  Vec3 plane_normal;
  bool disk = false;
};

struct SegmentCylinder {
  Vec3 p0, p1;
  double radius = 0;
  EllipseCap cap0, cap1;
  Frame frame0, frame1;  // record frames: tangent = cap normal, normal = ply normal
  double arclen0 = 0, arclen1 = 0;
  std::uint32_t ply_id = 0;
  std::uint32_t segment_id = 0;  // vertex index of p0 within its ply
  /// Radius about the midpoint enclosing the capped piece and its disks;
  /// 0 disables the bounding-sphere reject.
  double bound_radius = 0;

  Vec3 axis() const { return normalize(p1 - p0); }
  double length() const { return distance(p0, p1); }
};

/// Cylinders for every segment of `ply`. A ply whose last vertex coincides with
/// its first is treated as a closed loop and gets mitered caps at the seam.
std::vector<SegmentCylinder> build_segments(const PlyCurve& ply, std::uint32_t ply_id);

struct RawHit {
  double t = 0;
  Vec3 position;
  Vec3 geo_normal;
  bool on_disk = false;
  bool on_neighbor = false;  // set by joint_trim when the neighbor's surface won
};

/// Nearest root of the lateral surface inside the cap interval.
std::optional<RawHit> ray_cylinder(const Ray& ray, const SegmentCylinder& seg);

/// Nearest root of the infinite cylinder, ignoring the caps.
std::optional<RawHit> ray_infinite_cylinder(const Ray& ray, const SegmentCylinder& seg);

/// Disk closing an open end (cap0 or cap1 with `disk` set).
std::optional<RawHit> ray_end_disks(const Ray& ray, const SegmentCylinder& seg);

/// Signed distance of `p` to a cap plane, positive towards the segment interior.
double cap_distance(const SegmentCylinder& seg, int cap, const Vec3& p);

/// Resolves a raw hit that lies past a joint cap by re-testing the neighbor.
/// Returns whichever of the segment's own capped hit and the neighbor's is valid
/// and nearest.
std::optional<RawHit> joint_trim(const Ray& ray, const RawHit& raw, const SegmentCylinder& seg,
                                 const SegmentCylinder& neighbor);

struct CapBoundary {
  Vec3 point;
  Vec3 normal;
};

/// Radial unit vector of surface line `phi`, measured from frame0's normal
/// projected orthogonal to the axis.
Vec3 surface_direction(const SegmentCylinder& seg, double phi);
double surface_angle(const SegmentCylinder& seg, const Vec3& p);

/// Where the surface line at `phi` meets cap `cap` (0 or 1), and the cylinder
/// radial normal there.
CapBoundary cap_boundary(const SegmentCylinder& seg, int cap, double phi);

/// Blend of two frames with tangent priority re-orthonormalization.
Frame blend_frames(const Frame& a, const Frame& b, double lambda);

/// Axial fraction of `p` along its surface line between the two cap boundaries.
double cap_fraction(const SegmentCylinder& seg, const Vec3& p);

/// Smoothed shading frame at a lateral hit: normal follows the radial direction
/// and tangent follows the cap normals, so frames agree across joints.
Frame interpolate_frame(const SegmentCylinder& seg, const RawHit& hit);

/// Angular coordinate of `p` around the axis in the interpolated record frame.
double angular_phase(const SegmentCylinder& seg, const Vec3& p);

struct HitRecord {
  double t = std::numeric_limits<double>::infinity();
  Vec3 position;
  Vec3 geo_normal;
  Frame shading_frame;
  double beta = 0;
  double s = 0;
  std::uint32_t ply_id = 0;
  std::uint32_t segment_id = 0;
};

HitRecord make_hit_record(const SegmentCylinder& seg, const RawHit& hit);

/// Offset used to spawn secondary rays off a hit.
inline double self_intersection_epsilon(double radius) { return 1e-4 * radius; }

/// Segments of all plies in one flat array, with a per-ply offset table.
struct SegmentSet {
  std::vector<SegmentCylinder> segments;
  std::vector<std::uint32_t> offsets;  // size = ply count + 1

  static SegmentSet build(std::span<const PlyCurve> plies);
  const SegmentCylinder* prev(std::uint32_t flat) const;
  const SegmentCylinder* next(std::uint32_t flat) const;
};

struct SegmentHit {
  RawHit hit;
  std::uint32_t flat = 0;  // owning segment, which may be the tested one's neighbor
};

/// Full hit test of one segment: lateral surface with joint resolution plus
/// open-end disks. Increments `tests` per cylinder evaluated.
std::optional<SegmentHit> intersect_segment(const Ray& ray, const SegmentSet& set, std::uint32_t flat,
                                        std::uint64_t* tests = nullptr);

/// Reference nearest hit over every segment.
std::optional<HitRecord> intersect_bruteforce(const Ray& ray, const SegmentSet& set, std::uint64_t* tests = nullptr);

}  // namespace knitply
