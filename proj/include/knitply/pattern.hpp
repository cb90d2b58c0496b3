#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "knitply/vecmath.hpp"

namespace knitply {

/// Endpoints of a curve follow the arrow of its vertex order: the tail is the
/// first vertex, the head the last.
enum class CurveEnd : std::uint8_t { tail = 0, head = 1 };

enum class Neighbor : std::uint8_t { left, right, bottom, top };

Neighbor opposite(Neighbor n);
/// Cell offset (du, dv) of a neighbor direction.
std::pair<int, int> neighbor_offset(Neighbor n);
const char* to_string(Neighbor n);
const char* to_string(CurveEnd e);

struct PatternCurve {
  std::vector<Vec3> points;  // (u, v, h) in tile units
  bool free_head = false;
  bool free_tail = false;

  const Vec3& endpoint(CurveEnd e) const { return e == CurveEnd::head ? points.back() : points.front(); }
  bool is_free(CurveEnd e) const { return e == CurveEnd::head ? free_head : free_tail; }
};

struct PatternCell {
  std::vector<PatternCurve> curves;
  double du = 1.0;  // tile size in UV units
  double dv = 1.0;
};

inline constexpr double kEdgeEpsilon = 1e-4;
inline constexpr double kMatchEpsilon = 1e-3;

/// Checks every PatternCell invariant; throws InvariantError or ParseError.
void validate(const PatternCell& cell, double edge_eps = kEdgeEpsilon);

PatternCell parse_kcf(const std::string& text);
PatternCell load_pattern(const std::filesystem::path& path);
std::string format_kcf(const PatternCell& cell);

struct EndpointLabel {
  std::uint32_t curve_id = 0;
  CurveEnd end = CurveEnd::tail;
  Neighbor neighbor = Neighbor::left;
  std::uint32_t partner_curve_id = 0;
  CurveEnd partner_end = CurveEnd::tail;

  bool operator==(const EndpointLabel&) const = default;
};

/// Finds, for each non-free endpoint, the closest endpoint among the four
/// translated neighbor copies of the cell. Labels are sorted by (curve, end).
std::vector<EndpointLabel> compute_partners(const PatternCell& cell, double match_eps = kMatchEpsilon);

/// Node id = cell_index * curve_count + curve_id, cell_index = j * N + i.
struct EndpointRef {
  std::uint32_t node = 0;
  CurveEnd end = CurveEnd::tail;

  auto operator<=>(const EndpointRef&) const = default;
};

struct TiledEdge {
  EndpointRef a;
  EndpointRef b;
  // Logical cell step from a's cell to b's cell, before any wrap.
  int di = 0;
  int dj = 0;
};

struct TiledGraph {
  int n = 1;  // cells along u
  int m = 1;  // cells along v
  std::uint32_t curve_count = 0;
  bool wrap_u = false;
  bool wrap_v = false;
  std::vector<TiledEdge> edges;

  std::uint32_t node_count() const { return static_cast<std::uint32_t>(n * m) * curve_count; }
  std::uint32_t node_id(int i, int j, std::uint32_t curve) const {
    return static_cast<std::uint32_t>(j * n + i) * curve_count + curve;
  }
  std::uint32_t cell_of(std::uint32_t node) const { return node / curve_count; }
  std::uint32_t curve_of(std::uint32_t node) const { return node % curve_count; }
  std::vector<int> degrees() const;
};

TiledGraph tile(const PatternCell& cell, const std::vector<EndpointLabel>& labels, int n, int m,
                bool wrap_u = false, bool wrap_v = false);

struct YarnCurve {
  std::vector<Vec3> vertices;  // texture space: (u, v) in UV units, h scaled by du
  bool closed = false;
  // For closed curves the vertex after the last one is vertices[0] + period.
  // Zero unless the cycle runs across a wrapped tiling boundary.
  Vec3 period{};
  std::vector<std::uint32_t> nodes;  // traversal order
};

/// Concatenates each connected component of the graph into one yarn curve.
/// Components are ordered by smallest node id.
std::vector<YarnCurve> stitch(const TiledGraph& graph, const PatternCell& cell);

/// Texture-space position of a pattern point in cell (i, j).
Vec3 texture_position(const PatternCell& cell, const Vec3& local, double ci, double cj);

void write_yarns(const std::filesystem::path& path, const std::vector<YarnCurve>& yarns);
std::vector<YarnCurve> read_yarns(const std::filesystem::path& path);

}  // namespace knitply
