#include "fixtures.hpp"

#include <cmath>
#include <map>
#include <utility>

namespace knitply::test {

std::filesystem::path data_path(const std::string& relative) {
  return std::filesystem::path(KNITPLY_DATA_DIR) / relative;
}

BaseMesh grid_mesh(Vec2 lo, Vec2 hi, int nx, int ny, const HeightField& height) {
  BaseMesh mesh;
  auto h = [&](double x, double y) { return height ? height(x, y) : 0.0; };
  const double e = 1e-6;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const double x = lo.x + (hi.x - lo.x) * i / nx;
      const double y = lo.y + (hi.y - lo.y) * j / ny;
      const double hx = (h(x + e, y) - h(x - e, y)) / (2 * e);
      const double hy = (h(x, y + e) - h(x, y - e)) / (2 * e);
      mesh.vertices.push_back({{x, y, h(x, y)}, normalize(Vec3{-hx, -hy, 1}), {x, y}});
    }
  }
  auto id = [&](int i, int j) { return static_cast<std::uint32_t>(j * (nx + 1) + i); };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return mesh;
}

BaseMesh cylinder_mesh(double radius, double height, int segments, int rows) {
  BaseMesh mesh;
  for (int j = 0; j <= rows; ++j) {
    for (int i = 0; i <= segments; ++i) {
      const double u = static_cast<double>(i) / segments;
      const double v = static_cast<double>(j) / rows;
      const double a = kTwoPi * u;
      mesh.vertices.push_back(
          {{radius * std::cos(a), radius * std::sin(a), height * v}, {std::cos(a), std::sin(a), 0}, {u, v}});
    }
  }
  auto id = [&](int i, int j) { return static_cast<std::uint32_t>(j * (segments + 1) + i); };
  for (int j = 0; j < rows; ++j) {
    for (int i = 0; i < segments; ++i) {
      mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return mesh;
}

BaseMesh icosphere(int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p = normalize(p);
  std::vector<std::array<std::uint32_t, 3>> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back(normalize(v[a] + v[b]));
      const auto id = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<std::uint32_t, 3>> nf;
    for (const auto& tri : f) {
      const auto a = midpoint(tri[0], tri[1]), b = midpoint(tri[1], tri[2]), c = midpoint(tri[2], tri[0]);
      nf.push_back({tri[0], a, c});
      nf.push_back({tri[1], b, a});
      nf.push_back({tri[2], c, b});
      nf.push_back({a, b, c});
    }
    f = std::move(nf);
  }
  BaseMesh mesh;
  for (const auto& p : v) mesh.vertices.push_back({p, p, {0, 0}});
  mesh.triangles = f;
  return mesh;
}

BaseMesh random_mesh(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  const int nx = 10, ny = 5;
  BaseMesh mesh = grid_mesh({0, 0}, {1, 1}, nx, ny, [](double x, double y) { return 0.2 * std::sin(3 * x) * std::cos(2 * y); });
  for (int j = 1; j < ny; ++j) {
    for (int i = 1; i < nx; ++i) {
      auto& mv = mesh.vertices[static_cast<std::size_t>(j * (nx + 1) + i)];
      mv.uv.x += jitter(rng) / nx;
      mv.uv.y += jitter(rng) / ny;
    }
  }
  return mesh;
}

PlyParams swatch_ply_params() {
  PlyParams p;
  p.num_plies = 3;
  p.ply_offset = 0.03;
  p.ply_radius = 0.025;
  p.twist_rate = 20.0;
  p.resample_step = 0.025;
  return p;
}

Swatch make_swatch(int tiles, const PlyParams& params) {
  Swatch s;
  s.cell = load_pattern(data_path("patterns/stockinette.kcf"));
  const auto labels = compute_partners(s.cell);
  const auto graph = tile(s.cell, labels, tiles, tiles);
  s.yarns = stitch(graph, s.cell);
  for (std::size_t y = 0; y < s.yarns.size(); ++y) {
    auto plies = generate_plies(s.yarns[y], params, static_cast<std::uint32_t>(y));
    for (auto& p : plies) s.flat.push_back(std::move(p));
  }
  const double extent = tiles * s.cell.du;
  const double margin = 0.25 * s.cell.du;
  s.mesh = grid_mesh({-margin, -margin}, {extent + margin, extent + margin}, 4 * tiles, 4 * tiles,
                     [extent, margin](double x, double y) {
                       const double w = extent + 2 * margin;
                       return 0.1 * extent * std::sin(kPi * (x + margin) / w) * std::sin(kPi * (y + margin) / w);
                     });
  s.grid = build_grid(s.mesh, s.flat);
  s.mapped = transform_plies(s.grid, s.mesh, s.flat);
  return s;
}

PlyCurve elbow_ply(double angle_deg, double radius, double arm) {
  const double a = angle_deg * kPi / 180.0;
  PlyCurve ply;
  ply.radius = radius;
  const Vec3 p0{-arm, 0, 0}, p1{0, 0, 0}, p2{arm * std::cos(a), arm * std::sin(a), 0};
  for (const auto& p : {p0, p1, p2}) ply.vertices.push_back({p, {0, 0, 1}, 0});
  recompute_arclen(ply.vertices);
  return ply;
}

Camera swatch_camera(const Swatch& s, int resolution) {
  const auto b = s.mesh.uv_bounds();
  const double m = 0.5 * (b.lo.x + b.hi.x), e = b.hi.x - b.lo.x;
  Camera c;
  c.position = {m, m - 0.6 * e, 1.1 * e};
  c.look_at = {m, m, 0.05 * e};
  c.up = {0, 0, 1};
  c.vfov_deg = 38;
  c.width = c.height = resolution;
  return c;
}

AreaLight swatch_light(const Swatch& s, const Rgb& radiance) {
  const auto b = s.mesh.uv_bounds();
  const double m = 0.5 * (b.lo.x + b.hi.x), e = b.hi.x - b.lo.x;
  AreaLight l;
  l.corner = {m - 0.75 * e, m - 0.75 * e, 1.5 * e};
  l.edge_u = {0, 1.5 * e, 0};
  l.edge_v = {1.5 * e, 0, 0};
  l.radiance = radiance;
  return l;
}

AreaLight swatch_backlight(const Swatch& s, const Rgb& radiance) {
  AreaLight l = swatch_light(s, radiance);
  l.corner.z = -0.5 * (s.mesh.uv_bounds().hi.x - s.mesh.uv_bounds().lo.x);
  std::swap(l.edge_u, l.edge_v);
  return l;
}

Scene swatch_scene(const Swatch& s, const Material& material, std::vector<AreaLight> lights, Environment env,
                   int resolution) {
  return Scene::build(s.mesh, s.grid, s.mapped, material, std::move(lights), std::move(env),
                      swatch_camera(s, resolution));
}

Scene flat_scene(std::vector<PlyCurve> plies, const Material& material, Environment env, double shell_base,
                 std::vector<AreaLight> lights) {
  const BaseMesh mesh = grid_mesh({0, 0}, {1, 1}, 1, 1);
  MappingGrid grid = build_grid(mesh, plies, 8, 8);
  MappingOptions opt;
  opt.shell_base = shell_base;
  auto mapped = transform_plies(grid, mesh, plies, opt);
  Camera cam;
  cam.position = {0.5, 0.5, 3};
  cam.look_at = {0.5, 0.5, 0};
  cam.width = cam.height = 16;
  return Scene::build(mesh, std::move(grid), std::move(mapped), material, std::move(lights), std::move(env), cam);
}

}  // namespace knitply::test
