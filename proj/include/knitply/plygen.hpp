#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "knitply/pattern.hpp"
#include "knitply/vecmath.hpp"

namespace knitply {

struct PlyParams {
  int num_plies = 3;
  double ply_offset = 0.03;   // yarn center to ply center
  double ply_radius = 0.025;  // cylinder radius
  double twist_rate = 20.0;   // radians per unit yarn arc length
  double resample_step = 0;   // <= 0 selects ply_radius / 2

  double effective_step() const { return resample_step > 0 ? resample_step : ply_radius / 2; }
  void validate() const;
};

struct PlyVertex {
  Vec3 position;
  Vec3 normal;
  double arclen = 0;
};

struct PlyCurve {
  std::vector<PlyVertex> vertices;
  double radius = 0;
  std::uint32_t yarn_id = 0;
  std::uint32_t ply_index = 0;
};

/// Rotation minimizing frames by double reflection. Tangents are central
/// differences (one-sided at the ends).
std::vector<Frame> rmf_frames(std::span<const Vec3> curve, const Vec3& initial_normal);

/// The world axis least aligned with `tangent`, projected orthogonal to it.
Vec3 default_initial_normal(const Vec3& tangent);

/// Uniform arc-length resampling of a polyline into `segments` pieces.
std::vector<Vec3> resample_polyline(std::span<const Vec3> pts, std::size_t segments);

double polyline_length(std::span<const Vec3> pts);

/// Twists `num_plies` ply centerlines around the yarn. Closed yarns get their
/// frame holonomy spread linearly along the loop and the twist rate rounded to
/// a whole number of turns so every ply closes onto itself.
std::vector<PlyCurve> generate_plies(const YarnCurve& yarn, const PlyParams& params, std::uint32_t yarn_id = 0,
                                     std::optional<Vec3> initial_normal = std::nullopt);

/// Recomputes accumulated arc length from positions.
void recompute_arclen(std::vector<PlyVertex>& vertices);

// PLB: little-endian "PLB1", u32 ply count, then per ply u32 yarn_id,
// u32 ply_index, f32 radius, u32 vertex count and 28-byte vertex records.
inline constexpr std::size_t kPlbVertexBytes = 28;

std::string serialize_plb(std::span<const PlyCurve> plies);
std::vector<PlyCurve> deserialize_plb(std::string_view bytes);
void write_plb(const std::filesystem::path& path, std::span<const PlyCurve> plies);
std::vector<PlyCurve> read_plb(const std::filesystem::path& path);

/// Rounds every stored quantity to float32, matching what PLB retains.
PlyCurve quantize(const PlyCurve& ply);

}  // namespace knitply
