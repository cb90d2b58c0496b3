#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "knitply/plygen.hpp"
#include "knitply/vecmath.hpp"

namespace knitply {

struct MeshVertex {
  Vec3 position;
  Vec3 normal;
  Vec2 uv;
};

struct BaseMesh {
  std::vector<MeshVertex> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  void validate() const;
  Aabb2 uv_bounds() const;
};

/// Wavefront OBJ subset: v/vt/vn records and faces with full v/vt/vn
/// references, fan-triangulated.
BaseMesh parse_obj(const std::string& text);
BaseMesh load_obj(const std::filesystem::path& path);
std::string format_obj(const BaseMesh& mesh);

/// Flattened id of segment (ply p, vertex i -> i+1) is offsets[p] + i.
struct SegmentIndex {
  std::vector<std::uint32_t> offsets;  // size = ply count + 1

  static SegmentIndex from_vertex_counts(std::span<const std::size_t> counts);
  std::uint32_t total() const { return offsets.empty() ? 0 : offsets.back(); }
  std::uint32_t id(std::uint32_t ply, std::uint32_t vertex) const { return offsets[ply] + vertex; }
  /// (ply, first vertex) of a flattened segment id.
  std::pair<std::uint32_t, std::uint32_t> locate(std::uint32_t id) const;
};

struct GridCell {
  std::vector<std::uint32_t> segments;   // ascending flattened segment ids
  std::vector<std::uint32_t> triangles;  // ascending triangle ids
};

struct MappingGrid {
  int gu = 1, gv = 1;
  Aabb2 bounds;
  std::vector<GridCell> cells;  // row-major, index = j * gu + i

  const GridCell& cell(int i, int j) const { return cells[static_cast<std::size_t>(j * gu + i)]; }
  /// Cell coordinates of a uv; points outside the bounds are clamped.
  std::pair<int, int> cell_coords(const Vec2& uv) const;
  const GridCell& lookup(const Vec2& uv) const;
  bool contains(const Vec2& uv) const;
};

/// ceil(sqrt(2 * triangle_count)) clamped to [8, 4096].
int default_grid_resolution(std::size_t triangle_count);

/// Segments are binned by the uv (x, y) of their PlyCurve vertices.
MappingGrid build_grid(const BaseMesh& mesh, std::span<const PlyCurve> curves, int gu, int gv);
MappingGrid build_grid(const BaseMesh& mesh, std::span<const PlyCurve> curves);

/// Barycentric coordinates of `p` in the uv triangle (a, b, c).
std::array<double, 3> barycentric(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p);

inline constexpr double kBaryEpsilon = 1e-9;

struct TriangleLocation {
  std::uint32_t triangle = 0;
  std::array<double, 3> bary{};
};

TriangleLocation locate_triangle(const MappingGrid& grid, const BaseMesh& mesh, const Vec2& uv);
/// Grid-free reference: scans every triangle.
TriangleLocation locate_triangle_bruteforce(const BaseMesh& mesh, const Vec2& uv);

struct SurfacePoint {
  Vec3 position;
  Vec3 normal;
};

SurfacePoint map_point(const BaseMesh& mesh, std::uint32_t triangle, const std::array<double, 3>& bary, double height);

/// Unit dS/du of a triangle, projected orthogonal to `normal`.
Vec3 surface_u_direction(const BaseMesh& mesh, std::uint32_t triangle, const Vec3& normal);

struct MappedPly {
  PlyCurve ply;  // object-space positions, rotated normals, object-space arclen
  std::vector<Vec2> uv;
  std::vector<double> height;
};

struct MappingOptions {
  double shell_base = -1;  // < 0 selects 1.5 * ply radius
};

std::vector<MappedPly> transform_plies(const MappingGrid& grid, const BaseMesh& mesh, std::span<const PlyCurve> curves,
                                       const MappingOptions& options = {});
std::vector<MappedPly> transform_plies_bruteforce(const BaseMesh& mesh, std::span<const PlyCurve> curves,
                                                  const MappingOptions& options = {});

std::string serialize_mgb(const MappingGrid& grid);
MappingGrid deserialize_mgb(std::string_view bytes);
void write_mgb(const std::filesystem::path& path, const MappingGrid& grid);
MappingGrid read_mgb(const std::filesystem::path& path);

}  // namespace knitply
