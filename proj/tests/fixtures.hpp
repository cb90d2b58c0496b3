#pragma once

// Shared geometry fixtures for the unit and acceptance suites.

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "knitply/mapping.hpp"
#include "knitply/pattern.hpp"
#include "knitply/plygen.hpp"
#include "knitply/render.hpp"

namespace knitply::test {

std::filesystem::path data_path(const std::string& relative);

using HeightField = std::function<double(double, double)>;

/// nx * ny quads over [lo, hi] in XY with UV = XY; z = height(x, y) with
/// normals from the analytic gradient (central differences of `height`).
BaseMesh grid_mesh(Vec2 lo, Vec2 hi, int nx, int ny, const HeightField& height = {});

/// Cylinder of `radius` around +z, u = angle / 2pi, v = z / height.
BaseMesh cylinder_mesh(double radius, double height, int segments, int rows);

/// Subdivided icosahedron with outward normals; uv is unused (zero).
BaseMesh icosphere(int subdivisions);

/// Jittered 10 x 5 quad grid over [0,1]^2: 100 non-overlapping uv triangles.
BaseMesh random_mesh(std::uint64_t seed);

/// Swatch: stockinette tiled n x n, twisted into plies and mapped onto a
/// gently draped quad that extends a quarter tile past the fabric.
struct Swatch {
  PatternCell cell;
  std::vector<YarnCurve> yarns;
  std::vector<PlyCurve> flat;
  BaseMesh mesh;
  MappingGrid grid;
  std::vector<MappedPly> mapped;
};

PlyParams swatch_ply_params();
Swatch make_swatch(int tiles = 4, const PlyParams& params = swatch_ply_params());

/// Camera looking obliquely down at the swatch fabric.
Camera swatch_camera(const Swatch& s, int resolution);

/// Overhead emitter facing -z covering the fabric.
AreaLight swatch_light(const Swatch& s, const Rgb& radiance = {4, 4, 4});

/// Emitter below the fabric facing +z, for back-lit views.
AreaLight swatch_backlight(const Swatch& s, const Rgb& radiance = {4, 4, 4});

Scene swatch_scene(const Swatch& s, const Material& material, std::vector<AreaLight> lights, Environment env,
                   int resolution = 64);

/// Scene over a flat unit quad (two triangles, uv = xy) with the given flat plies.
Scene flat_scene(std::vector<PlyCurve> plies, const Material& material = {},
                 Environment env = Environment::constant({1, 1, 1}), double shell_base = 0.1,
                 std::vector<AreaLight> lights = {});

/// A single ply bent by `angle_deg` at its midpoint (two segments).
PlyCurve elbow_ply(double angle_deg, double radius, double arm = 1.0);

}  // namespace knitply::test
