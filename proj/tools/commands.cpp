#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>

#include "knitply/fit.hpp"
#include "knitply/image.hpp"
#include "knitply/mapping.hpp"
#include "knitply/pattern.hpp"
#include "knitply/plygen.hpp"

namespace knitply::cli {

namespace fs = std::filesystem;

namespace {

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e.what());
  } catch (const fs::filesystem_error& e) {
    throw StageError(name, e.what());
  }
}

void echo_config(const Config& cfg, const fs::path& output, const std::string& command) {
  const fs::path dir = output.has_parent_path() ? output.parent_path() : fs::path(".");
  stage("echo", [&] { cfg.write_echo(dir / (command + ".effective.ini")); });
}

int to_int(const Config& cfg, const std::string& section, const std::string& key, long long fallback) {
  return static_cast<int>(cfg.integer(section, key, fallback));
}

std::size_t vertex_total(const std::vector<YarnCurve>& yarns) {
  std::size_t n = 0;
  for (const auto& y : yarns) n += y.vertices.size();
  return n;
}

std::size_t vertex_total(std::span<const PlyCurve> plies) {
  std::size_t n = 0;
  for (const auto& p : plies) n += p.vertices.size();
  return n;
}

fs::path output_dir(const Config& cfg) { return cfg.path("output", "dir", cfg.resolve(".")); }

// Relative output names resolve against the output dir.
fs::path output_path(const Config& cfg, const std::string& section, const std::string& name) {
  const fs::path p = cfg.text(section, "output", name);
  return p.is_absolute() ? p : output_dir(cfg) / p;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

fs::path yarns_path(const Config& cfg) { return cfg.path("plies", "yarns", output_path(cfg, "pattern", "yarns.yrn")); }
fs::path plies_path(const Config& cfg) { return output_path(cfg, "plies", "plies.plb"); }
fs::path grid_path(const Config& cfg) { return output_path(cfg, "grid", "grid.mgb"); }
fs::path mesh_path(const Config& cfg) { return cfg.required_path("mesh", "file"); }

PlyParams ply_params(const Config& cfg) {
  PlyParams p;
  p.num_plies = to_int(cfg, "plies", "num_plies", p.num_plies);
  p.ply_offset = cfg.number("plies", "ply_offset", p.ply_offset);
  p.ply_radius = cfg.number("plies", "ply_radius", p.ply_radius);
  p.twist_rate = cfg.number("plies", "twist_rate", p.twist_rate);
  p.resample_step = cfg.number("plies", "resample_step", p.resample_step);
  return p;
}

struct TileSettings {
  int n = 4, m = 4;
  bool wrap_u = false, wrap_v = false;
};

TileSettings tile_settings(const Config& cfg) {
  TileSettings t;
  t.n = to_int(cfg, "pattern", "n", t.n);
  t.m = to_int(cfg, "pattern", "m", t.m);
  t.wrap_u = cfg.flag("pattern", "wrap_u", t.wrap_u);
  t.wrap_v = cfg.flag("pattern", "wrap_v", t.wrap_v);
  return t;
}

std::vector<YarnCurve> tile_and_stitch(const PatternCell& cell, const TileSettings& t, TiledGraph* graph_out = nullptr) {
  const auto labels = stage("partners", [&] { return compute_partners(cell); });
  TiledGraph g = stage("tile", [&] { return tile(cell, labels, t.n, t.m, t.wrap_u, t.wrap_v); });
  auto yarns = stage("stitch", [&] { return stitch(g, cell); });
  if (graph_out) *graph_out = std::move(g);
  return yarns;
}

std::vector<PlyCurve> make_plies(const std::vector<YarnCurve>& yarns, const PlyParams& params) {
  return stage("plies", [&] {
    params.validate();
    std::vector<PlyCurve> out;
    for (std::size_t y = 0; y < yarns.size(); ++y) {
      for (auto& p : generate_plies(yarns[y], params, static_cast<std::uint32_t>(y))) out.push_back(std::move(p));
    }
    return out;
  });
}

MappingOptions mapping_options(const Config& cfg) {
  MappingOptions o;
  o.shell_base = cfg.number("map", "shell_base", o.shell_base);
  return o;
}

Environment load_environment(const Config& cfg) {
  const std::string type = cfg.text("environment", "type", "none");
  if (type == "none") return Environment::none();
  if (type == "constant") return Environment::constant(cfg.vec3("environment", "radiance", {1, 1, 1}));
  if (type == "latlong") {
    const fs::path map = cfg.required_path("environment", "map");
    const double scale = cfg.number("environment", "scale", 1.0);
    return stage("environment", [&] { return Environment::lat_long(read_pfm(map), scale); });
  }
  throw StageError("config", "[environment] type must be none, constant or latlong, got '" + type + "'");
}

Camera load_camera(const Config& cfg) {
  Camera c;
  c.position = cfg.vec3("camera", "position", c.position);
  c.look_at = cfg.vec3("camera", "look_at", c.look_at);
  c.up = cfg.vec3("camera", "up", c.up);
  c.vfov_deg = cfg.number("camera", "vfov", c.vfov_deg);
  c.width = to_int(cfg, "camera", "width", c.width);
  c.height = to_int(cfg, "camera", "height", c.height);
  stage("camera", [&] { c.validate(); });
  return c;
}

std::vector<AreaLight> load_lights(const Config& cfg) {
  std::vector<AreaLight> lights;
  for (const std::string& s : cfg.sections()) {
    if (s.rfind("light", 0) != 0) continue;
    AreaLight l;
    l.corner = cfg.vec3(s, "corner", l.corner);
    l.edge_u = cfg.vec3(s, "edge_u", l.edge_u);
    l.edge_v = cfg.vec3(s, "edge_v", l.edge_v);
    l.radiance = cfg.vec3(s, "radiance", l.radiance);
    if (!(l.area() > 0)) throw StageError("config", "[" + s + "] edges span no area");
    lights.push_back(l);
  }
  return lights;
}

Material load_material_config(const Config& cfg) {
  const fs::path file = cfg.path("material", "file", {});
  if (file.empty()) return {};
  return stage("material", [&] { return load_material(file); });
}

bool same_mapping(const MappedPly& a, const MappedPly& b) {
  if (a.ply.vertices.size() != b.ply.vertices.size() || a.uv != b.uv || a.height != b.height) return false;
  if (a.ply.radius != b.ply.radius || a.ply.yarn_id != b.ply.yarn_id || a.ply.ply_index != b.ply.ply_index) return false;
  for (std::size_t i = 0; i < a.ply.vertices.size(); ++i) {
    const PlyVertex& p = a.ply.vertices[i];
    const PlyVertex& q = b.ply.vertices[i];
    if (p.position != q.position || p.normal != q.normal || p.arclen != q.arclen) return false;
  }
  return true;
}

bool same_ply(const PlyCurve& a, const PlyCurve& b) {
  if (a.vertices.size() != b.vertices.size() || a.radius != b.radius || a.yarn_id != b.yarn_id ||
      a.ply_index != b.ply_index) {
    return false;
  }
  for (std::size_t i = 0; i < a.vertices.size(); ++i) {
    if (a.vertices[i].position != b.vertices[i].position || a.vertices[i].normal != b.vertices[i].normal ||
        a.vertices[i].arclen != b.vertices[i].arclen) {
      return false;
    }
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------- stages

void cmd_tile(const Config& cfg, std::ostream& out) {
  const fs::path pattern = cfg.required_path("pattern", "file");
  const TileSettings t = tile_settings(cfg);
  const fs::path output = output_path(cfg, "pattern", "yarns.yrn");
  const PatternCell cell = stage("pattern", [&] { return load_pattern(pattern); });
  const auto yarns = tile_and_stitch(cell, t);
  stage("write", [&] {
    ensure_parent(output);
    write_yarns(output, yarns);
  });
  echo_config(cfg, output, "tile");
  out << "tile: " << yarns.size() << " yarns, " << vertex_total(yarns) << " vertices -> " << output.string() << "\n";
}

void cmd_plies(const Config& cfg, std::ostream& out) {
  const fs::path input = yarns_path(cfg);
  const PlyParams params = ply_params(cfg);
  const fs::path output = plies_path(cfg);
  const auto yarns = stage("yarns", [&] { return read_yarns(input); });
  const auto plies = make_plies(yarns, params);
  stage("write", [&] {
    ensure_parent(output);
    write_plb(output, plies);
  });
  echo_config(cfg, output, "plies");
  out << "plies: " << plies.size() << " plies, " << vertex_total(plies) << " vertices -> " << output.string() << "\n";
}

void cmd_grid(const Config& cfg, std::ostream& out) {
  const fs::path mesh_file = mesh_path(cfg);
  const fs::path plies_file = plies_path(cfg);
  const int gu = to_int(cfg, "grid", "gu", 0);
  const int gv = to_int(cfg, "grid", "gv", 0);
  const fs::path output = grid_path(cfg);
  const BaseMesh mesh = stage("mesh", [&] { return load_obj(mesh_file); });
  const auto plies = stage("plies", [&] { return read_plb(plies_file); });
  const MappingGrid grid = stage("grid", [&] {
    if (gu > 0 || gv > 0) {
      if (gu <= 0 || gv <= 0) throw InvariantError("[grid] gu and gv must both be positive or both 0");
      return build_grid(mesh, plies, gu, gv);
    }
    return build_grid(mesh, plies);
  });
  stage("write", [&] {
    ensure_parent(output);
    write_mgb(output, grid);
  });
  echo_config(cfg, output, "grid");
  out << "grid: " << grid.gu << "x" << grid.gv << " cells over " << mesh.triangles.size() << " triangles -> "
      << output.string() << "\n";
}

void cmd_map(const Config& cfg, std::ostream& out) {
  const fs::path mesh_file = mesh_path(cfg);
  const fs::path plies_file = plies_path(cfg);
  const fs::path grid_file = grid_path(cfg);
  const MappingOptions options = mapping_options(cfg);
  const fs::path output = output_path(cfg, "map", "mapped.plb");
  const BaseMesh mesh = stage("mesh", [&] { return load_obj(mesh_file); });
  const auto plies = stage("plies", [&] { return read_plb(plies_file); });
  const MappingGrid grid = stage("grid", [&] { return read_mgb(grid_file); });
  const auto mapped = stage("map", [&] { return transform_plies(grid, mesh, plies, options); });
  std::vector<PlyCurve> curves;
  for (const auto& m : mapped) curves.push_back(m.ply);
  stage("write", [&] {
    ensure_parent(output);
    write_plb(output, curves);
  });
  echo_config(cfg, output, "map");
  out << "map: " << curves.size() << " plies, " << vertex_total(curves) << " vertices -> " << output.string() << "\n";
}

Scene load_scene(const Config& cfg) {
  const fs::path mesh_file = mesh_path(cfg);
  const fs::path plies_file = plies_path(cfg);
  const fs::path grid_file = grid_path(cfg);
  const MappingOptions options = mapping_options(cfg);
  ShellOptions shell;
  shell.margin = cfg.number("shell", "margin", shell.margin);
  Material material = load_material_config(cfg);
  auto lights = load_lights(cfg);
  Environment env = load_environment(cfg);
  const Camera camera = load_camera(cfg);

  BaseMesh mesh = stage("mesh", [&] { return load_obj(mesh_file); });
  const auto plies = stage("plies", [&] { return read_plb(plies_file); });
  MappingGrid grid = stage("grid", [&] { return read_mgb(grid_file); });
  auto mapped = stage("map", [&] { return transform_plies(grid, mesh, plies, options); });
  return stage("scene", [&] {
    return Scene::build(std::move(mesh), std::move(grid), std::move(mapped), std::move(material), std::move(lights),
                        std::move(env), camera, shell);
  });
}

RenderConfig load_render_config(const Config& cfg) {
  RenderConfig rc;
  rc.spp = to_int(cfg, "render", "spp", rc.spp);
  rc.max_depth = to_int(cfg, "render", "max_depth", rc.max_depth);
  rc.rr_start_depth = to_int(cfg, "render", "rr_start_depth", rc.rr_start_depth);
  rc.seed = static_cast<std::uint64_t>(cfg.integer("render", "seed", 0));
  rc.tile_size = to_int(cfg, "render", "tile_size", rc.tile_size);
  rc.threads = static_cast<unsigned>(cfg.integer("render", "threads", 0));
  rc.nee = cfg.flag("render", "nee", rc.nee);
  stage("render", [&] { rc.validate(); });
  return rc;
}

void cmd_render(const Config& cfg, std::ostream& out) {
  const Scene scene = load_scene(cfg);
  const RenderConfig rc = load_render_config(cfg);
  const fs::path output = output_path(cfg, "render", "render.pfm");
  const std::string png_name = cfg.text("render", "png", "");
  const fs::path png = png_name.empty() ? fs::path() : output_dir(cfg) / png_name;
  const double exposure = cfg.number("render", "exposure", 1.0);
  const auto t0 = std::chrono::steady_clock::now();
  const Image img = stage("render", [&] { return render(scene, rc); });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  stage("write", [&] {
    ensure_parent(output);
    write_pfm(output, img);
    if (!png.empty()) write_png(png, img, exposure);
  });
  echo_config(cfg, output, "render");
  out << "render: " << img.width << "x" << img.height << " at " << rc.spp << " spp in " << secs << " s -> "
      << output.string() << "\n";
}

void cmd_fit(const Config& cfg, std::ostream& out) {
  const auto scene_files = cfg.list("fit", "scenes");
  const auto reference_files = cfg.list("fit", "references");
  if (scene_files.empty()) throw StageError("config", "[fit] scenes is empty");
  FitProblem p;
  for (const auto& f : scene_files) {
    const fs::path path = cfg.resolve(f);
    Config sub = stage("config", [&] { return Config::load(path); });
    if (cfg.has("output", "dir")) sub.set("output", "dir", fs::absolute(output_dir(cfg)).string());
    p.scenes.push_back(load_scene(sub));
  }
  for (const auto& f : reference_files) {
    const fs::path path = fs::path(f).is_absolute() ? fs::path(f) : output_dir(cfg) / f;
    p.references.push_back(stage("reference", [&] { return read_pfm(path); }));
  }
  for (const auto& spec : cfg.list("fit", "free")) {
    // name:lo:hi
    const auto a = spec.find(':');
    const auto b = a == std::string::npos ? a : spec.find(':', a + 1);
    if (b == std::string::npos) throw StageError("config", "[fit] free entry '" + spec + "' is not name:lo:hi");
    const auto param = parse_param(spec.substr(0, a));
    if (!param) throw StageError("config", "[fit] unknown parameter '" + spec.substr(0, a) + "'");
    try {
      p.free.push_back({*param, std::stod(spec.substr(a + 1, b - a - 1)), std::stod(spec.substr(b + 1))});
    } catch (const std::logic_error&) {
      throw StageError("config", "[fit] bad bounds in '" + spec + "'");
    }
  }
  const Material base = p.scenes.front().material;
  const fs::path initial = cfg.path("fit", "initial", {});
  p.initial = initial.empty() ? base.bsdf : stage("material", [&] { return load_material(initial, base); }).bsdf;
  p.render = load_render_config(cfg);
  p.render.spp = to_int(cfg, "fit", "spp", 64);
  p.render.seed = static_cast<std::uint64_t>(cfg.integer("fit", "seed", static_cast<long long>(p.render.seed)));
  p.resolution = cfg.number("fit", "resolution", p.resolution);
  p.budget = to_int(cfg, "fit", "budget", p.budget);
  const fs::path material_out = output_path(cfg, "fit", "fitted.mat");
  const fs::path trace_out = cfg.path("fit", "trace", output_dir(cfg) / "trace.csv");

  const FitResult r = stage("fit", [&] { return fit(p); });
  Material fitted = base;
  fitted.bsdf = r.best;
  stage("write", [&] {
    ensure_parent(material_out);
    ensure_parent(trace_out);
    save_material(material_out, fitted);
    std::ofstream csv(trace_out);
    if (!csv) throw IoError("cannot write '" + trace_out.string() + "'");
    csv << "evaluation,best_loss\n";
    csv.precision(17);
    for (std::size_t i = 0; i < r.trace.size(); ++i) csv << i + 1 << "," << r.trace[i] << "\n";
  });
  echo_config(cfg, material_out, "fit");
  out << "fit: " << r.evaluations << " evaluations, loss " << r.best_loss
      << (r.budget_exhausted ? " (budget exhausted)" : "") << "\n";
  for (const auto& f : p.free) out << "  " << param_name(f.param) << " = " << get_param(r.best, f.param) << "\n";
  out << "  -> " << material_out.string() << "\n";
}

// ---------------------------------------------------------------- checks

int cmd_validate(const Config& cfg, std::ostream& out) {
  int failed = 0;
  const auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    out << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
    failed += ok ? 0 : 1;
  };

  const fs::path pattern = cfg.required_path("pattern", "file");
  TileSettings t = tile_settings(cfg);
  t.n = to_int(cfg, "validate", "n", std::min(t.n, 2));
  t.m = to_int(cfg, "validate", "m", std::min(t.m, 2));
  const PlyParams params = ply_params(cfg);
  const fs::path mesh_file = mesh_path(cfg);
  const MappingOptions options = mapping_options(cfg);
  const int rays = to_int(cfg, "validate", "rays", 2000);
  const int albedo_samples = to_int(cfg, "validate", "albedo_samples", 200000);
  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.integer("validate", "seed", 1));
  Material material = load_material_config(cfg);

  const PatternCell cell = stage("pattern", [&] { return load_pattern(pattern); });
  TiledGraph graph;
  const auto yarns = tile_and_stitch(cell, t, &graph);
  {
    std::size_t inst = 0;
    for (std::uint32_t v = 0; v < graph.node_count(); ++v) inst += cell.curves[graph.curve_of(v)].points.size();
    const std::size_t got = vertex_total(yarns);
    report("stitch_conservation", got == inst - graph.edges.size(),
           std::to_string(got) + " stitched = " + std::to_string(inst) + " instantiated - " +
               std::to_string(graph.edges.size()) + " edges");
  }

  const auto plies = make_plies(yarns, params);
  {
    const std::string bytes = serialize_plb(plies);
    const auto back = stage("plb", [&] { return deserialize_plb(bytes); });
    bool ok = back.size() == plies.size();
    for (std::size_t i = 0; ok && i < plies.size(); ++i) ok = same_ply(back[i], quantize(plies[i]));
    report("plb_round_trip", ok, std::to_string(bytes.size()) + " bytes, " + std::to_string(kPlbVertexBytes) +
                                     " per vertex");
  }

  const BaseMesh mesh = stage("mesh", [&] { return load_obj(mesh_file); });
  const MappingGrid grid = stage("grid", [&] { return build_grid(mesh, plies); });
  {
    const std::string bytes = serialize_mgb(grid);
    const MappingGrid again = stage("grid", [&] { return build_grid(mesh, plies); });
    const bool ok = serialize_mgb(again) == bytes && serialize_mgb(deserialize_mgb(bytes)) == bytes;
    report("grid_rebuild", ok, std::to_string(grid.gu) + "x" + std::to_string(grid.gv) + " cells");
  }

  auto mapped = stage("map", [&] { return transform_plies(grid, mesh, plies, options); });
  {
    const auto brute = stage("map", [&] { return transform_plies_bruteforce(mesh, plies, options); });
    bool ok = brute.size() == mapped.size();
    for (std::size_t i = 0; ok && i < mapped.size(); ++i) ok = same_mapping(mapped[i], brute[i]);
    report("mapping_vs_bruteforce", ok, std::to_string(vertex_total(plies)) + " vertices bit-exact");
  }

  Camera cam;
  cam.width = cam.height = 8;
  const Scene scene = stage("scene", [&] {
    return Scene::build(mesh, grid, mapped, material, {}, Environment::constant({1, 1, 1}), cam);
  });
  {
    std::vector<const ShellPrism*> by_triangle(scene.mesh.triangles.size(), nullptr);
    for (const ShellPrism& pr : scene.prisms) by_triangle[pr.triangle] = &pr;
    std::size_t outside = 0, total = 0;
    for (const auto& m : scene.plies) {
      for (std::size_t i = 0; i < m.ply.vertices.size(); ++i) {
        const auto loc = locate_triangle(scene.grid, scene.mesh, m.uv[i]);
        const Vec3& p = m.ply.vertices[i].position;
        ++total;
        const ShellPrism* prism = by_triangle[loc.triangle];
        if (!prism) {
          ++outside;
          continue;
        }
        for (const Plane& pl : prism->planes) {
          if (dot(pl.normal, p) > pl.offset + 1e-9) {
            ++outside;
            break;
          }
        }
      }
    }
    report("vertices_inside_shell", outside == 0,
           std::to_string(outside) + " of " + std::to_string(total) + " outside their prism");
  }

  {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    Aabb3 box;
    for (const auto& m : scene.plies) {
      for (const auto& v : m.ply.vertices) box.extend(v.position);
    }
    const double reach = 2 * length(box.hi - box.lo) + 1;
    TraceScratch scratch;
    TraceStats st;
    std::uint64_t brute_tests = 0;
    int agree = 0;
    for (int k = 0; k < rays; ++k) {
      const auto& m = scene.plies[static_cast<std::size_t>(u(rng) * double(scene.plies.size())) % scene.plies.size()];
      const auto& v = m.ply.vertices[static_cast<std::size_t>(u(rng) * double(m.ply.vertices.size())) %
                                     m.ply.vertices.size()];
      const Vec3 jitter = Vec3{u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5} * (4 * m.ply.radius);
      const Vec3 d = normalize(Vec3{u(rng) - 0.5, u(rng) - 0.5, u(rng) + 0.2});
      Ray ray{v.position + jitter + d * reach, -d};
      if (k % 2 == 1) {
        if (const auto h = intersect_bruteforce(ray, scene.segments)) {
          ray = spawn_ray(*h, scene.ply_radius(*h), normalize(Vec3{u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5}));
        }
      }
      const auto a = intersect_plies(ray, scene, &scratch, &st);
      const auto b = intersect_bruteforce(ray, scene.segments, &brute_tests);
      if (a.has_value() == b.has_value() && (!a || std::abs(a->t - b->t) <= 1e-6)) ++agree;
    }
    report("two_stage_vs_bruteforce", agree >= 0.999 * rays,
           std::to_string(agree) + " of " + std::to_string(rays) + " rays agree");
    out << "info segment_test_ratio: "
        << (brute_tests ? double(st.segment_tests) / double(brute_tests) : 0.0) << "\n";
  }

  {
    std::mt19937_64 rng(seed + 1);
    std::uniform_real_distribution<double> u(0, 1);
    Material white = material;
    white.bsdf.albedo = {1, 1, 1};
    double worst = 0;
    int directions = 0;
    for (int k = 0; k < 64 && directions < 4; ++k) {
      const auto& m = scene.plies[static_cast<std::size_t>(u(rng) * double(scene.plies.size())) % scene.plies.size()];
      const Vec3 target = m.ply.vertices[m.ply.vertices.size() / 2].position;
      const Ray ray{target + Vec3{0, 0, 1}, normalize(Vec3{u(rng) - 0.5, u(rng) - 0.5, -2})};
      const auto h = intersect_plies(ray, scene);
      if (!h) continue;
      ++directions;
      const ShadingPoint sp = apply_fiber_texture(*h, white.fiber);
      const Vec3 wi = -ray.dir;
      double sum = 0;
      for (int s = 0; s < albedo_samples; ++s) {
        const BsdfSample bs = bsdf_sample(sp, wi, white.bsdf, {u(rng), u(rng)});
        if (bs.pdf > 0) sum += bs.f.x * shading_cosine(sp, bs.wo) / bs.pdf;
      }
      worst = std::max(worst, sum / albedo_samples);
    }
    report("bsdf_albedo", directions > 0 && worst <= 1.01,
           "max directional albedo " + std::to_string(worst) + " over " + std::to_string(directions) + " directions");
  }

  {
    Scene small = scene;
    Aabb3 box;
    for (const auto& m : scene.plies) {
      for (const auto& v : m.ply.vertices) box.extend(v.position);
    }
    small.camera.look_at = box.center();
    small.camera.position = box.center() + Vec3{0, -0.5, 1} * length(box.hi - box.lo);
    small.camera.up = {0, 0, 1};
    RenderConfig rc;
    rc.spp = 1;
    rc.seed = seed;
    rc.tile_size = 4;
    rc.threads = 1;
    const std::string a = serialize_pfm(render(small, rc));
    rc.threads = 3;
    const std::string b = serialize_pfm(render(small, rc));
    report("render_determinism", a == b, "1 vs 3 threads");
  }

  out << (failed == 0 ? "validate: all checks passed\n" : "validate: " + std::to_string(failed) + " checks failed\n");
  return failed;
}

void cmd_stats(const Config& cfg, std::ostream& out) {
  if (cfg.has("pattern", "file")) {
    const fs::path pattern = cfg.required_path("pattern", "file");
    const PatternCell cell = stage("pattern", [&] { return load_pattern(pattern); });
    std::size_t pts = 0;
    for (const auto& c : cell.curves) pts += c.points.size();
    out << "pattern: " << cell.curves.size() << " curves, " << pts << " points, tile " << cell.du << " x " << cell.dv
        << "\n";
  }
  const fs::path yarns_file = yarns_path(cfg);
  if (fs::exists(yarns_file)) {
    const auto yarns = stage("yarns", [&] { return read_yarns(yarns_file); });
    std::size_t closed = 0;
    for (const auto& y : yarns) closed += y.closed ? 1 : 0;
    out << "yarns: " << yarns.size() << " (" << closed << " closed), " << vertex_total(yarns) << " vertices\n";
  }
  const fs::path plies_file = plies_path(cfg);
  std::vector<PlyCurve> plies;
  if (fs::exists(plies_file)) {
    plies = stage("plies", [&] { return read_plb(plies_file); });
    const std::size_t v = vertex_total(plies);
    out << "plies: " << plies.size() << ", " << v << " vertices, " << v * kPlbVertexBytes << " vertex bytes\n";
  }
  if (cfg.has("mesh", "file")) {
    const fs::path mesh_file = mesh_path(cfg);
    const BaseMesh mesh = stage("mesh", [&] { return load_obj(mesh_file); });
    const auto b = mesh.uv_bounds();
    out << "mesh: " << mesh.vertices.size() << " vertices, " << mesh.triangles.size() << " triangles, uv [" << b.lo.x
        << ", " << b.hi.x << "] x [" << b.lo.y << ", " << b.hi.y << "]\n";
  }
  const fs::path grid_file = grid_path(cfg);
  if (fs::exists(grid_file)) {
    const MappingGrid grid = stage("grid", [&] { return read_mgb(grid_file); });
    std::size_t segs = 0, tris = 0, empty = 0;
    for (const auto& c : grid.cells) {
      segs += c.segments.size();
      tris += c.triangles.size();
      empty += c.segments.empty() ? 1 : 0;
    }
    const double cells = double(grid.cells.size());
    out << "grid: " << grid.gu << "x" << grid.gv << ", " << segs / cells << " segments and " << tris / cells
        << " triangles per cell, " << empty << " cells without segments\n";
  }
}

}  // namespace knitply::cli
