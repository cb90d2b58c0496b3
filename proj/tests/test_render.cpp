#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "fixtures.hpp"
#include "knitply/errors.hpp"
#include "knitply/render.hpp"

using namespace knitply;
using namespace knitply::test;

namespace {

PlyCurve straight_ply(double y, double z, double radius, int pieces = 8) {
  PlyCurve ply;
  ply.radius = radius;
  for (int i = 0; i <= pieces; ++i) ply.vertices.push_back({{double(i) / pieces, y, z}, {0, 0, 1}, 0});
  recompute_arclen(ply.vertices);
  return ply;
}

Ray down_ray(double x, double y) { return {{x, y, 3}, {0, 0, -1}}; }

Material lambert(double rho) {
  Material m;
  m.bsdf.albedo = {rho, rho, rho};
  m.bsdf.spec_weight = 0;
  m.bsdf.trans_weight = 0;
  m.fiber.shadow_depth = 0;
  m.fiber.amplitude = 0;
  return m;
}

Material white_furnace() {
  Material m = lambert(1);
  m.bsdf.trans_weight = 0.3;
  return m;
}

BaseMesh wavy_mesh() {
  return grid_mesh({0, 0}, {1, 1}, 4, 4, [](double x, double y) { return 0.15 * std::sin(3 * x) * std::cos(2 * y); });
}

double image_mean(const Image& img) {
  double s = 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) s += img.at(x, y).x;
  }
  return s / (double(img.width) * img.height);
}

const Swatch& swatch() {
  static const Swatch s = make_swatch(4);
  return s;
}

}  // namespace

// ---------------------------------------------------------------- images

TEST(Image, PfmRoundTrip) {
  Image img(5, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 5; ++x) img.set(x, y, {x * 0.5, y * 1.25, -1.0 / (1 + x + y)});
  }
  const Image back = deserialize_pfm(serialize_pfm(img));
  ASSERT_EQ(back.width, 5);
  ASSERT_EQ(back.height, 3);
  EXPECT_EQ(back.data, img.data);
  const auto path = std::filesystem::temp_directory_path() / "knitply_roundtrip.pfm";
  write_pfm(path, img);
  EXPECT_EQ(read_pfm(path).data, img.data);
  std::filesystem::remove(path);
}

TEST(Image, PfmStoresBottomRowFirst) {
  Image img(1, 2);
  img.set(0, 0, {1, 1, 1});
  const std::string bytes = serialize_pfm(img);
  const std::string header = "PF\n1 2\n-1.0\n";
  ASSERT_EQ(bytes.substr(0, header.size()), header);
  float first = 0;
  std::memcpy(&first, bytes.data() + header.size(), 4);
  EXPECT_EQ(first, 0.0f);
}

TEST(Image, PfmRejectsMalformed) {
  EXPECT_THROW(deserialize_pfm("P6\n1 1\n255\n"), ParseError);
  EXPECT_THROW(deserialize_pfm("PF\n1 1\n1.0\n" + std::string(12, '\0')), ParseError);
  EXPECT_THROW(deserialize_pfm("PF\n2 2\n-1.0\n" + std::string(12, '\0')), ParseError);
  EXPECT_THROW(read_pfm("/nonexistent/knitply.pfm"), IoError);
}

TEST(Image, DownscaleAndMse) {
  Image img(4, 2);
  for (int x = 0; x < 4; ++x) {
    img.set(x, 0, {double(x), 0, 0});
    img.set(x, 1, {double(x) + 2, 0, 0});
  }
  const Image half = downscale(img, 2);
  ASSERT_EQ(half.width, 2);
  ASSERT_EQ(half.height, 1);
  EXPECT_DOUBLE_EQ(half.at(0, 0).x, 1.5);
  EXPECT_DOUBLE_EQ(half.at(1, 0).x, 3.5);
  Image other = half;
  other.set(1, 0, {3.5, 2, 0});
  EXPECT_DOUBLE_EQ(mean_squared_error(half, other), 4.0 / 6.0);
  Image black(3, 3), white(3, 3);
  std::fill(white.data.begin(), white.data.end(), 1.0f);
  EXPECT_DOUBLE_EQ(mean_squared_error(black, white), 1.0);
  EXPECT_THROW(mean_squared_error(half, img), InvariantError);
  EXPECT_THROW(downscale(img, 0), InvariantError);
}

TEST(Image, PngWrites) {
  Image img(3, 2);
  img.set(1, 1, {0.5, 2, 0.01});
  const auto path = std::filesystem::temp_directory_path() / "knitply_test.png";
  write_png(path, img);
  EXPECT_GT(std::filesystem::file_size(path), 8u);
  std::filesystem::remove(path);
  EXPECT_THROW(write_png("/nonexistent/dir/x.png", img), IoError);
}

// ---------------------------------------------------------------- shell

TEST(Shell, BoundsCoverPlyHeights) {
  const Scene s = flat_scene({straight_ply(0.5, 0.0, 0.02)}, {}, Environment::constant({1, 1, 1}), 0.1);
  EXPECT_NEAR(s.shell.h_min, 0.1 - 0.03, 1e-12);
  EXPECT_NEAR(s.shell.h_max, 0.1 + 0.03, 1e-12);
  EXPECT_EQ(s.prisms.size(), 2u);
}

TEST(Shell, StraightDownRayGivesOneCandidate) {
  const Scene s = flat_scene({straight_ply(0.5, 0.0, 0.02)});
  const auto c = global_intersect(down_ray(0.3, 0.6), s);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_NEAR(c[0].t_entry, 3 - s.shell.h_max, 1e-8);
  EXPECT_NEAR(c[0].t_exit, 3 - s.shell.h_min, 1e-8);
  for (const Vec2& uv : {c[0].uv_entry, c[0].uv_exit}) {
    EXPECT_NEAR(uv.x, 0.3, 1e-9);
    EXPECT_NEAR(uv.y, 0.6, 1e-9);
  }
}

TEST(Shell, RayMissingEveryPrismIsEmpty) {
  const Scene s = flat_scene({straight_ply(0.5, 0.0, 0.02)});
  EXPECT_TRUE(global_intersect({{-1, 0.5, 1}, {1, 0, 0}}, s).empty());
  EXPECT_TRUE(global_intersect(down_ray(2, 2), s).empty());
  EXPECT_FALSE(intersect_plies(down_ray(2, 2), s).has_value());
}

TEST(Shell, HullContainsCurvedPatch) {
  const BaseMesh mesh = wavy_mesh();
  const ShellBounds b{-0.05, 0.12};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::uint32_t t = 0; t < mesh.triangles.size(); ++t) {
    const ShellPrism pr = make_prism(mesh, t, b);
    for (int k = 0; k < 400; ++k) {
      double b0 = u(rng), b1 = u(rng);
      if (b0 + b1 > 1) b0 = 1 - b0, b1 = 1 - b1;
      const double h = b.h_min + u(rng) * (b.h_max - b.h_min);
      const Vec3 p = map_point(mesh, t, {b0, b1, 1 - b0 - b1}, h).position;
      for (const Plane& pl : pr.planes) EXPECT_LE(dot(pl.normal, p), pl.offset + 1e-12);
      EXPECT_TRUE(pr.bounds.contains(p));
    }
  }
}

TEST(Shell, ProjectionInvertsMapping) {
  const BaseMesh mesh = wavy_mesh();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0;
  for (int k = 0; k < 2000; ++k) {
    const auto t = static_cast<std::uint32_t>(k % mesh.triangles.size());
    double b0 = u(rng), b1 = u(rng);
    if (b0 + b1 > 1) b0 = 1 - b0, b1 = 1 - b1;
    const double h = -0.05 + 0.15 * u(rng);
    const auto bary = project_to_triangle(mesh, t, map_point(mesh, t, {b0, b1, 1 - b0 - b1}, h).position);
    worst = std::max({worst, std::abs(bary[0] - b0), std::abs(bary[1] - b1)});
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Shell, CandidatesContainEveryCrossedTriangle) {
  const Swatch& sw = swatch();
  const Scene s = swatch_scene(sw, {}, {swatch_light(sw)}, Environment::none(), 32);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  int checked = 0;
  for (int k = 0; k < 10000; ++k) {
    const Ray ray = s.camera.generate(u(rng) * 32, u(rng) * 32);
    const auto cands = global_intersect(ray, s);
    const auto listed = [&](std::uint32_t tri) {
      return std::any_of(cands.begin(), cands.end(), [&](const PrismCandidate& c) { return c.triangle == tri; });
    };
    // Brute force: a point of the ray lies in the shell over triangle t when
    // its projection is inside t and its height is within the bounds.
    const double reach = length(s.camera.look_at - s.camera.position);
    for (int q = 0; q < 4; ++q) {
      const double t = reach * (0.7 + 0.6 * u(rng));
      const Vec3 p = ray.at(t);
      for (const auto& pr : s.prisms) {
        if (!pr.bounds.contains(p)) continue;
        const auto b = project_to_triangle(s.mesh, pr.triangle, p);
        if (std::min({b[0], b[1], b[2]}) < 0) continue;
        const SurfacePoint sp = map_point(s.mesh, pr.triangle, b, 0);
        const double h = dot(p - sp.position, sp.normal);
        if (h < s.shell.h_min || h > s.shell.h_max) continue;
        ++checked;
        EXPECT_TRUE(listed(pr.triangle)) << "ray " << k << " triangle " << pr.triangle;
      }
    }
  }
  EXPECT_GT(checked, 100);
}

// ---------------------------------------------------------------- two-stage tracing

TEST(Trace, StraightPlyMatchesCylinder) {
  const Scene s = flat_scene({straight_ply(0.5, 0.0, 0.03, 1)});
  ASSERT_EQ(s.segments.segments.size(), 1u);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  int hits = 0;
  for (int k = 0; k < 2000; ++k) {
    const Vec3 o{0.1 + 0.8 * u(rng), 0.5 + 0.2 * (u(rng) - 0.5), 2};
    const Ray ray{o, normalize(Vec3{0.2 * (u(rng) - 0.5), 0.2 * (u(rng) - 0.5), -1})};
    const auto got = intersect_plies(ray, s);
    const auto want = ray_cylinder(ray, s.segments.segments[0]);
    ASSERT_EQ(got.has_value(), want.has_value()) << k;
    if (!got) continue;
    ++hits;
    EXPECT_NEAR(got->t, want->t, 1e-12);
  }
  EXPECT_GT(hits, 200);
}

TEST(Trace, GapBetweenPliesIsMissed) {
  const double r = 0.02;
  const Scene s = flat_scene({straight_ply(0.5 - 2.5 * r, 0, r), straight_ply(0.5 + 2.5 * r, 0, r)});
  EXPECT_FALSE(intersect_plies(down_ray(0.5, 0.5), s).has_value());
  EXPECT_FALSE(intersect_plies(down_ray(0.31, 0.5 + 0.4 * r), s).has_value());
  EXPECT_TRUE(intersect_plies(down_ray(0.5, 0.5 + 2.5 * r), s).has_value());
}

TEST(Trace, AgreesWithBruteForceOnSwatch) {
  const Swatch& sw = swatch();
  const Scene s = swatch_scene(sw, {}, {swatch_light(sw)}, Environment::none(), 64);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  TraceScratch scratch;
  TraceStats st;
  std::uint64_t brute_tests = 0;
  int agree = 0, hits = 0;
  const int n = 4000;
  for (int k = 0; k < n; ++k) {
    // Mix camera rays with secondary rays leaving hit points.
    Ray ray = s.camera.generate(u(rng) * 64, u(rng) * 64);
    if (k % 2 == 1) {
      if (const auto h = intersect_bruteforce(ray, s.segments)) {
        const Vec3 d = normalize(Vec3{u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5});
        ray = spawn_ray(*h, s.ply_radius(*h), d);
      }
    }
    const auto a = intersect_plies(ray, s, &scratch, &st);
    const auto b = intersect_bruteforce(ray, s.segments, &brute_tests);
    hits += b.has_value();
    if (a.has_value() == b.has_value() && (!a || std::abs(a->t - b->t) <= 1e-6)) ++agree;
  }
  EXPECT_GT(hits, n / 4);
  EXPECT_GE(agree, 0.999 * n);
  EXPECT_LE(double(st.segment_tests), 0.05 * double(brute_tests));
}

TEST(Trace, OcclusionAndLights) {
  const Scene s = flat_scene({straight_ply(0.5, 0.0, 0.03)});
  EXPECT_TRUE(occluded(down_ray(0.5, 0.5), s, 10));
  EXPECT_FALSE(occluded(down_ray(0.5, 0.5), s, 2.5));
  EXPECT_FALSE(occluded(down_ray(0.5, 0.9), s, 10));

  Scene lit = s;
  AreaLight l;
  l.corner = {0.4, 0.4, 1};
  l.edge_u = {0.2, 0, 0};
  l.edge_v = {0, 0.2, 0};  // faces +z
  lit.lights = {l};
  const SceneHit h = trace(down_ray(0.5, 0.5), lit);
  EXPECT_EQ(h.light, 0);
  EXPECT_NEAR(h.t, 2, 1e-12);
  EXPECT_FALSE(h.ply.has_value());
  EXPECT_TRUE(occluded(down_ray(0.5, 0.5), lit, 2.5));
  const SceneHit below = trace({{0.5, 0.5, 0.5}, {0, 0, 1}}, lit);
  EXPECT_EQ(below.light, 0);
}

TEST(Trace, SpawnRayLeavesSurface) {
  const Scene s = flat_scene({straight_ply(0.5, 0.0, 0.03)});
  const auto h = intersect_plies(down_ray(0.5, 0.5), s);
  ASSERT_TRUE(h);
  const Ray up = spawn_ray(*h, s.ply_radius(*h), {0, 0, 1});
  EXPECT_FALSE(intersect_plies(up, s).has_value());
  const Ray down = spawn_ray(*h, s.ply_radius(*h), {0, 0, -1});
  const auto exit = intersect_plies(down, s);
  ASSERT_TRUE(exit);
  EXPECT_NEAR(exit->t, 0.06, 1e-5);
}

// ---------------------------------------------------------------- scene

TEST(Scene, BuildValidates) {
  std::vector<PlyCurve> plies{straight_ply(0.5, 0, 0.02)};
  EXPECT_THROW(flat_scene(plies, {}, Environment::none()), InvariantError);
  Material bad;
  bad.bsdf.spec_weight = 0.9;
  bad.bsdf.trans_weight = 0.5;
  EXPECT_THROW(flat_scene(plies, bad), InvariantError);

  const Scene s = flat_scene(plies);
  MappingGrid g = s.grid;
  g.cells[0].segments.push_back(999);
  EXPECT_THROW(Scene::build(s.mesh, g, s.plies, {}, {}, Environment::constant({1, 1, 1}), s.camera), InvariantError);
  Camera cam = s.camera;
  cam.up = {0, 0, 1};
  EXPECT_THROW(Scene::build(s.mesh, s.grid, s.plies, {}, {}, Environment::constant({1, 1, 1}), cam), InvariantError);
  AreaLight flat;
  flat.edge_v = flat.edge_u;
  EXPECT_THROW(Scene::build(s.mesh, s.grid, s.plies, {}, {flat}, Environment::none(), s.camera), InvariantError);
}

TEST(Camera, CenterRayAndValidation) {
  Camera c;
  c.position = {1, 2, 3};
  c.look_at = {1, 2, 0};
  c.width = 10;
  c.height = 6;
  const Ray r = c.generate(5, 3);
  EXPECT_NEAR(r.dir.z, -1, 1e-12);
  EXPECT_NEAR(length(r.dir), 1, 1e-12);
  // The top of the image is towards +up.
  EXPECT_GT(c.generate(5, 0).dir.y, 0);
  EXPECT_GT(c.generate(10, 3).dir.x, 0);
  c.vfov_deg = 180;
  EXPECT_THROW(c.validate(), InvariantError);
  c.vfov_deg = 40;
  c.width = 0;
  EXPECT_THROW(c.validate(), InvariantError);
}

TEST(Environment, PdfsIntegrateToOne) {
  Image map(16, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 16; ++x) map.set(x, y, {0.1 + x * y, 0.5, double(x % 3)});
  }
  const Environment ll = Environment::lat_long(map, 2.0);
  const Environment cst = Environment::constant({1, 1, 1});
  const Vec3 n = normalize(Vec3{0.3, -0.2, 0.9});
  const int nt = 800, np = 1600;
  double sum_ll = 0, sum_c = 0;
  for (int i = 0; i < nt; ++i) {
    const double th = kPi * (i + 0.5) / nt;
    for (int j = 0; j < np; ++j) {
      const double ph = kTwoPi * (j + 0.5) / np;
      const Vec3 d{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
      const double dw = std::sin(th) * (kPi / nt) * (kTwoPi / np);
      sum_ll += ll.pdf(n, 0.7, d) * dw;
      sum_c += cst.pdf(n, 0.7, d) * dw;
    }
  }
  EXPECT_NEAR(sum_ll, 1, 1e-3);
  EXPECT_NEAR(sum_c, 1, 1e-3);
}

TEST(Environment, SamplesMatchPdfAndEval) {
  Image map(8, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 8; ++x) map.set(x, y, {double(x + 1), 1, 1});
  }
  const Environment ll = Environment::lat_long(map);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  const Vec3 n{0, 0, 1};
  int front = 0;
  for (int k = 0; k < 2000; ++k) {
    const auto s = ll.sample(n, 1, {u(rng), u(rng)});
    EXPECT_NEAR(length(s.dir), 1, 1e-12);
    EXPECT_NEAR(s.pdf, ll.pdf(n, 1, s.dir), 1e-9 * s.pdf);
    EXPECT_EQ(s.radiance.x, ll.eval(s.dir).x);
    const auto c = Environment::constant({2, 2, 2}).sample(n, 0.75, {u(rng), u(rng)});
    front += c.dir.z > 0;
    EXPECT_NEAR(c.pdf, 0.75 * std::abs(c.dir.z) / kPi * (c.dir.z > 0 ? 1 : 1 / 3.0), 1e-12);
  }
  EXPECT_NEAR(front / 2000.0, 0.75, 0.04);
  // Row 0 is the +z pole.
  EXPECT_EQ(ll.eval({0.01, 0, 1}).x, 1);
  EXPECT_EQ(Environment::none().eval({0, 0, 1}).x, 0);
  EXPECT_THROW(Environment::lat_long(Image(0, 0)), InvariantError);
}

// ---------------------------------------------------------------- integration

TEST(Sampler, CounterBased) {
  Sampler a(1, 2, 3), b(1, 2, 3), c(1, 2, 4);
  double diff = 0;
  for (int i = 0; i < 100; ++i) {
    const double x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_GE(x, 0);
    EXPECT_LT(x, 1);
    diff += std::abs(x - c.next());
  }
  EXPECT_GT(diff, 10);
}

TEST(Direct, ConstantEnvironmentLambertian) {
  const double rho = 0.7;
  const Scene s = flat_scene({straight_ply(0.5, 0.0, 0.03)}, lambert(rho), Environment::constant({1, 1, 1}));
  const auto h = intersect_plies(down_ray(0.5, 0.5), s);
  ASSERT_TRUE(h);
  const ShadingPoint sp = plain_shading_point(*h);
  TraceScratch scratch;
  double sum = 0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    Sampler smp(0, 0, static_cast<std::uint64_t>(k));
    sum += estimate_direct(sp, {0, 0, 1}, s, smp, &scratch).x;
  }
  EXPECT_NEAR(sum / n, rho, 0.01 * rho);
}

TEST(Direct, FullyOccludedIsZero) {
  // A thick ply hides a small emitter from points on top of a thin one.
  AreaLight l;
  l.corner = {0.49, 0.51, 1.2};
  l.edge_u = {0.02, 0, 0};
  l.edge_v = {0, -0.02, 0};
  l.radiance = {50, 50, 50};
  const Scene s = flat_scene({straight_ply(0.5, 0.0, 0.02), straight_ply(0.5, 0.3, 0.2)}, lambert(0.8),
                             Environment::none(), 0.1, {l});
  ASSERT_LT(l.normal().z, 0);
  Ray probe{{0.5, 0.5, 0.1 + 0.02 + 1e-3}, {0, 0, -1}};
  const auto h = intersect_plies(probe, s);
  ASSERT_TRUE(h);
  ASSERT_EQ(h->ply_id, 0u);
  const ShadingPoint sp = plain_shading_point(*h);
  for (int k = 0; k < 2000; ++k) {
    Sampler smp(0, 1, static_cast<std::uint64_t>(k));
    EXPECT_EQ(estimate_direct(sp, {0, 0, 1}, s, smp).x, 0.0);
  }
}

TEST(Direct, AreaLightMatchesQuadrature) {
  const double rho = 0.6;
  AreaLight l;
  l.corner = {0.3, 0.2, 0.8};
  l.edge_u = {0, 0.5, 0};
  l.edge_v = {0.4, 0, 0.1};
  l.radiance = {3, 3, 3};
  const Scene s = flat_scene({straight_ply(0.5, 0.0, 0.03)}, lambert(rho), Environment::none(), 0.1, {l});
  const auto h = intersect_plies(down_ray(0.5, 0.5), s);
  ASSERT_TRUE(h);
  const ShadingPoint sp = plain_shading_point(*h);
  const Vec3 p = sp.hit.position, n = sp.frame.normal;

  const int m = 600;
  double want = 0;
  const Vec3 ln = l.normal();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const Vec3 q = l.corner + l.edge_u * ((i + 0.5) / m) + l.edge_v * ((j + 0.5) / m);
      const Vec3 d = q - p;
      const double r2 = dot(d, d);
      const Vec3 w = d / std::sqrt(r2);
      const double cl = -dot(w, ln), cp = dot(w, n);
      if (cl > 0 && cp > 0) want += cp * cl / r2;
    }
  }
  want *= l.radiance.x * rho / kPi * l.area() / (double(m) * m);

  TraceScratch scratch;
  double sum = 0;
  const int n_samples = 100000;
  for (int k = 0; k < n_samples; ++k) {
    Sampler smp(2, 0, static_cast<std::uint64_t>(k));
    sum += estimate_direct(sp, {0, 0, 1}, s, smp, &scratch).x;
  }
  EXPECT_NEAR(sum / n_samples, want, 0.01 * want);
}

TEST(Render, ConfigValidation) {
  RenderConfig c;
  EXPECT_NO_THROW(c.validate());
  c.spp = 0;
  EXPECT_THROW(c.validate(), InvariantError);
  c = {};
  c.max_depth = 0;
  EXPECT_THROW(c.validate(), InvariantError);
  c = {};
  c.tile_size = 0;
  EXPECT_THROW(c.validate(), InvariantError);
}

TEST(Render, DeterministicAcrossRunsAndThreads) {
  const Swatch& sw = swatch();
  const Scene s = swatch_scene(sw, {}, {swatch_light(sw)}, Environment::constant({0.2, 0.2, 0.2}), 24);
  RenderConfig c;
  c.spp = 1;
  c.seed = 11;
  c.threads = 1;
  c.tile_size = 7;
  const std::string a = serialize_pfm(render(s, c));
  EXPECT_EQ(a, serialize_pfm(render(s, c)));
  c.threads = 3;
  EXPECT_EQ(a, serialize_pfm(render(s, c)));
  c.seed = 12;
  EXPECT_NE(a, serialize_pfm(render(s, c)));
}

TEST(Render, VarianceHalvesWithDoubleSamples) {
  const Swatch& sw = swatch();
  const Scene s = swatch_scene(sw, lambert(0.7), {swatch_light(sw)}, Environment::constant({0.3, 0.3, 0.3}), 12);
  const auto pixel_variance = [&](int spp) {
    const int seeds = 24;
    std::vector<double> s1(144, 0), s2(144, 0);
    RenderConfig c;
    c.spp = spp;
    c.threads = 1;
    for (int k = 0; k < seeds; ++k) {
      c.seed = 100 * spp + k;
      const Image img = render(s, c);
      for (int i = 0; i < 144; ++i) {
        const double v = img.data[3 * i];
        s1[i] += v;
        s2[i] += v * v;
      }
    }
    double var = 0;
    for (int i = 0; i < 144; ++i) var += (s2[i] - s1[i] * s1[i] / seeds) / (seeds - 1);
    return var / 144;
  };
  const double ratio = pixel_variance(8) / pixel_variance(16);
  EXPECT_NEAR(ratio, 2.0, 0.4);
}

TEST(Render, WhiteFurnaceWithoutRouletteIsExact) {
  // Straight plies: shading frames coincide with the cylinder normals, so
  // every BSDF-sampled path carries weight exactly 1.
  std::vector<PlyCurve> plies;
  for (int i = 0; i < 12; ++i) plies.push_back(straight_ply(0.2 + 0.05 * i, 0.04 * (i % 2), 0.024));
  const Scene s = flat_scene(plies, white_furnace());
  RenderConfig c;
  c.spp = 16;
  c.nee = false;
  c.rr_start_depth = 1 << 30;
  c.max_depth = 1 << 20;
  const Image img = render(s, c);
  for (float v : img.data) EXPECT_NEAR(v, 1.0, 1e-5);
}

TEST(Render, WhiteFurnaceMeanWithNee) {
  const Swatch& sw = swatch();
  const Scene s = swatch_scene(sw, white_furnace(), {}, Environment::constant({1, 1, 1}), 16);
  RenderConfig c;
  c.spp = 64;
  const Image img = render(s, c);
  EXPECT_NEAR(image_mean(img), 1.0, 0.02);
}

TEST(Render, NeeOnAndOffAgree) {
  const Swatch& sw = swatch();
  const Scene s = swatch_scene(sw, {}, {swatch_light(sw)}, Environment::none(), 16);
  RenderConfig c;
  c.spp = 256;
  const double on = image_mean(render(s, c));
  c.nee = false;
  const double off = image_mean(render(s, c));
  EXPECT_GT(on, 0.005);
  EXPECT_NEAR(on, off, 0.04 * on);
}
