#include "knitply/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include "binio.hpp"
#include "knitply/errors.hpp"
#include "parallel.hpp"
#include "text_util.hpp"

namespace knitply {

void BaseMesh::validate() const {
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (auto idx : triangles[t]) {
      if (idx >= vertices.size()) throw InvariantError("triangle " + std::to_string(t) + " index out of range");
    }
  }
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    const auto& mv = vertices[v];
    if (std::abs(length(mv.normal) - 1.0) > 1e-6) {
      throw InvariantError("vertex " + std::to_string(v) + " normal is not unit length");
    }
    if (!std::isfinite(mv.uv.x) || !std::isfinite(mv.uv.y)) {
      throw InvariantError("vertex " + std::to_string(v) + " has non-finite uv");
    }
  }
}

Aabb2 BaseMesh::uv_bounds() const {
  Aabb2 b;
  for (const auto& t : triangles) {
    for (auto idx : t) b.extend(vertices[idx].uv);
  }
  return b;
}

BaseMesh parse_obj(const std::string& text) {
  std::vector<Vec3> pos, nrm;
  std::vector<Vec2> tex;
  BaseMesh mesh;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::uint32_t> remap;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto resolve = [&](std::string_view s, std::size_t count) -> std::size_t {
    const bool neg = !s.empty() && s.front() == '-';
    const auto v = detail::parse_uint(neg ? s.substr(1) : s, line_no);
    const long long idx = neg ? static_cast<long long>(count) - static_cast<long long>(v)
                              : static_cast<long long>(v) - 1;
    if (v == 0 || idx < 0 || idx >= static_cast<long long>(count)) {
      throw ParseError("OBJ line " + std::to_string(line_no) + ": index out of range");
    }
    return static_cast<std::size_t>(idx);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0].starts_with('#')) continue;
    if (tok[0] == "v") {
      if (tok.size() < 4) throw ParseError("OBJ line " + std::to_string(line_no) + ": short vertex");
      pos.push_back({detail::parse_double(tok[1], line_no), detail::parse_double(tok[2], line_no),
                     detail::parse_double(tok[3], line_no)});
    } else if (tok[0] == "vt") {
      if (tok.size() < 3) throw ParseError("OBJ line " + std::to_string(line_no) + ": short texcoord");
      tex.push_back({detail::parse_double(tok[1], line_no), detail::parse_double(tok[2], line_no)});
    } else if (tok[0] == "vn") {
      if (tok.size() < 4) throw ParseError("OBJ line " + std::to_string(line_no) + ": short normal");
      const Vec3 n{detail::parse_double(tok[1], line_no), detail::parse_double(tok[2], line_no),
                   detail::parse_double(tok[3], line_no)};
      if (length(n) < 1e-12) throw ParseError("OBJ line " + std::to_string(line_no) + ": zero normal");
      nrm.push_back(normalize(n));
    } else if (tok[0] == "f") {
      if (tok.size() < 4) throw ParseError("OBJ line " + std::to_string(line_no) + ": face needs 3 vertices");
      std::vector<std::uint32_t> face;
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const auto ref = tok[k];
        const auto s1 = ref.find('/');
        const auto s2 = s1 == std::string_view::npos ? s1 : ref.find('/', s1 + 1);
        if (s1 == std::string_view::npos || s2 == std::string_view::npos || s2 == s1 + 1 || s2 + 1 >= ref.size()) {
          throw ParseError("OBJ line " + std::to_string(line_no) + ": faces need full v/vt/vn references");
        }
        const auto key = std::tuple{resolve(ref.substr(0, s1), pos.size()),
                                    resolve(ref.substr(s1 + 1, s2 - s1 - 1), tex.size()),
                                    resolve(ref.substr(s2 + 1), nrm.size())};
        auto [it, inserted] = remap.emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
        if (inserted) {
          mesh.vertices.push_back({pos[std::get<0>(key)], nrm[std::get<2>(key)], tex[std::get<1>(key)]});
        }
        face.push_back(it->second);
      }
      for (std::size_t k = 1; k + 1 < face.size(); ++k) mesh.triangles.push_back({face[0], face[k], face[k + 1]});
    }
  }
  mesh.validate();
  return mesh;
}

BaseMesh load_obj(const std::filesystem::path& path) { return parse_obj(detail::read_text_file(path)); }

std::string format_obj(const BaseMesh& mesh) {
  std::ostringstream out;
  using detail::fmt_double;
  for (const auto& v : mesh.vertices) {
    out << "v " << fmt_double(v.position.x) << ' ' << fmt_double(v.position.y) << ' ' << fmt_double(v.position.z)
        << '\n';
  }
  for (const auto& v : mesh.vertices) out << "vt " << fmt_double(v.uv.x) << ' ' << fmt_double(v.uv.y) << '\n';
  for (const auto& v : mesh.vertices) {
    out << "vn " << fmt_double(v.normal.x) << ' ' << fmt_double(v.normal.y) << ' ' << fmt_double(v.normal.z) << '\n';
  }
  for (const auto& t : mesh.triangles) {
    out << 'f';
    for (auto i : t) out << ' ' << i + 1 << '/' << i + 1 << '/' << i + 1;
    out << '\n';
  }
  return out.str();
}

SegmentIndex SegmentIndex::from_vertex_counts(std::span<const std::size_t> counts) {
  SegmentIndex idx;
  idx.offsets.reserve(counts.size() + 1);
  std::uint32_t acc = 0;
  idx.offsets.push_back(0);
  for (auto c : counts) {
    acc += c > 0 ? static_cast<std::uint32_t>(c - 1) : 0;
    idx.offsets.push_back(acc);
  }
  return idx;
}

std::pair<std::uint32_t, std::uint32_t> SegmentIndex::locate(std::uint32_t id) const {
  const auto it = std::upper_bound(offsets.begin(), offsets.end(), id);
  const auto ply = static_cast<std::uint32_t>(it - offsets.begin() - 1);
  return {ply, id - offsets[ply]};
}

std::pair<int, int> MappingGrid::cell_coords(const Vec2& uv) const {
  const double fu = (uv.x - bounds.lo.x) / (bounds.hi.x - bounds.lo.x) * gu;
  const double fv = (uv.y - bounds.lo.y) / (bounds.hi.y - bounds.lo.y) * gv;
  const int i = std::clamp(static_cast<int>(std::floor(fu)), 0, gu - 1);
  const int j = std::clamp(static_cast<int>(std::floor(fv)), 0, gv - 1);
  return {i, j};
}

const GridCell& MappingGrid::lookup(const Vec2& uv) const {
  const auto [i, j] = cell_coords(uv);
  return cell(i, j);
}

bool MappingGrid::contains(const Vec2& uv) const {
  const double eu = 1e-9 * (bounds.hi.x - bounds.lo.x), ev = 1e-9 * (bounds.hi.y - bounds.lo.y);
  return uv.x >= bounds.lo.x - eu && uv.x <= bounds.hi.x + eu && uv.y >= bounds.lo.y - ev &&
         uv.y <= bounds.hi.y + ev;
}

int default_grid_resolution(std::size_t triangle_count) {
  const double g = std::ceil(std::sqrt(2.0 * static_cast<double>(triangle_count)));
  return static_cast<int>(std::clamp(g, 8.0, 4096.0));
}

namespace {

std::array<Vec2, 3> uv_triangle(const BaseMesh& mesh, std::uint32_t t) {
  const auto& tri = mesh.triangles[t];
  return {mesh.vertices[tri[0]].uv, mesh.vertices[tri[1]].uv, mesh.vertices[tri[2]].uv};
}

double signed_area(const std::array<Vec2, 3>& t) { return 0.5 * cross(t[1] - t[0], t[2] - t[0]); }

// True when the two triangles share interior area (touching edges do not count).
bool uv_triangles_overlap(const std::array<Vec2, 3>& a, const std::array<Vec2, 3>& b, double tol) {
  for (const auto* tri : {&a, &b}) {
    for (int e = 0; e < 3; ++e) {
      const Vec2 d = (*tri)[(e + 1) % 3] - (*tri)[e];
      const double len = length(d);
      if (len == 0) continue;
      const Vec2 axis{-d.y / len, d.x / len};
      double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
      for (const auto& p : a) {
        amin = std::min(amin, dot(p, axis));
        amax = std::max(amax, dot(p, axis));
      }
      for (const auto& p : b) {
        bmin = std::min(bmin, dot(p, axis));
        bmax = std::max(bmax, dot(p, axis));
      }
      if (amax <= bmin + tol || bmax <= amin + tol) return false;
    }
  }
  return true;
}

template <typename Fn>
void for_cells(const MappingGrid& g, Vec2 lo, Vec2 hi, Fn&& fn) {
  const auto [i0, j0] = g.cell_coords(lo);
  const auto [i1, j1] = g.cell_coords(hi);
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) fn(i, j);
  }
}

}  // namespace

MappingGrid build_grid(const BaseMesh& mesh, std::span<const PlyCurve> curves, int gu, int gv) {
  if (mesh.triangles.empty()) throw EmptyMeshError("base mesh has no triangles");
  if (gu < 1 || gv < 1) throw InvariantError("grid resolution must be >= 1");
  mesh.validate();
  MappingGrid g;
  g.gu = gu;
  g.gv = gv;
  g.bounds = mesh.uv_bounds();
  if (g.bounds.hi.x - g.bounds.lo.x <= 0 || g.bounds.hi.y - g.bounds.lo.y <= 0) {
    throw EmptyMeshError("base mesh uv chart has zero area");
  }
  g.cells.resize(static_cast<std::size_t>(gu) * static_cast<std::size_t>(gv));
  const double extent = std::max(g.bounds.hi.x - g.bounds.lo.x, g.bounds.hi.y - g.bounds.lo.y);
  const double pad = 1e-7 * extent;

  for (std::uint32_t t = 0; t < mesh.triangles.size(); ++t) {
    Aabb2 box;
    for (const auto& p : uv_triangle(mesh, t)) box.extend(p);
    for_cells(g, box.lo - Vec2{pad, pad}, box.hi + Vec2{pad, pad},
              [&](int i, int j) { g.cells[static_cast<std::size_t>(j * gu + i)].triangles.push_back(t); });
  }

  const double tol = 1e-9 * extent;
  std::unordered_set<std::uint64_t> checked;
  for (const auto& c : g.cells) {
    for (std::size_t a = 0; a < c.triangles.size(); ++a) {
      const auto ta = uv_triangle(mesh, c.triangles[a]);
      if (std::abs(signed_area(ta)) <= tol * tol) continue;
      for (std::size_t b = a + 1; b < c.triangles.size(); ++b) {
        const std::uint64_t key = (std::uint64_t{c.triangles[a]} << 32) | c.triangles[b];
        if (!checked.insert(key).second) continue;
        const auto tb = uv_triangle(mesh, c.triangles[b]);
        if (std::abs(signed_area(tb)) <= tol * tol) continue;
        if (uv_triangles_overlap(ta, tb, tol)) {
          throw OverlappingChartError("uv triangles " + std::to_string(c.triangles[a]) + " and " +
                                      std::to_string(c.triangles[b]) + " overlap");
        }
      }
    }
  }

  std::uint32_t seg = 0;
  for (const auto& ply : curves) {
    for (std::size_t i = 0; i + 1 < ply.vertices.size(); ++i, ++seg) {
      const auto& p = ply.vertices[i].position;
      const auto& q = ply.vertices[i + 1].position;
      const Vec2 lo{std::min(p.x, q.x), std::min(p.y, q.y)};
      const Vec2 hi{std::max(p.x, q.x), std::max(p.y, q.y)};
      for_cells(g, lo, hi, [&](int ci, int cj) { g.cells[static_cast<std::size_t>(cj * gu + ci)].segments.push_back(seg); });
    }
  }
  return g;
}

MappingGrid build_grid(const BaseMesh& mesh, std::span<const PlyCurve> curves) {
  const int r = default_grid_resolution(mesh.triangles.size());
  return build_grid(mesh, curves, r, r);
}

std::array<double, 3> barycentric(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p) {
  const Vec2 v0 = b - a, v1 = c - a, v2 = p - a;
  const double d = cross(v0, v1);
  const double beta = cross(v2, v1) / d;
  const double gamma = cross(v0, v2) / d;
  return {1.0 - beta - gamma, beta, gamma};
}

namespace {

bool try_triangle(const BaseMesh& mesh, std::uint32_t t, const Vec2& uv, TriangleLocation& out) {
  const auto tri = uv_triangle(mesh, t);
  if (cross(tri[1] - tri[0], tri[2] - tri[0]) == 0) return false;
  const auto bary = barycentric(tri[0], tri[1], tri[2], uv);
  if (bary[0] >= -kBaryEpsilon && bary[1] >= -kBaryEpsilon && bary[2] >= -kBaryEpsilon) {
    out = {t, bary};
    return true;
  }
  return false;
}

std::string uv_string(const Vec2& uv) { return "(" + detail::fmt_double(uv.x) + ", " + detail::fmt_double(uv.y) + ")"; }

}  // namespace

TriangleLocation locate_triangle(const MappingGrid& grid, const BaseMesh& mesh, const Vec2& uv) {
  if (!grid.contains(uv)) throw UnmappedUVError("uv " + uv_string(uv) + " lies outside the grid bounds", 0);
  TriangleLocation loc;
  for (auto t : grid.lookup(uv).triangles) {
    if (try_triangle(mesh, t, uv, loc)) return loc;
  }
  throw UnmappedUVError("no triangle covers uv " + uv_string(uv), 0);
}

TriangleLocation locate_triangle_bruteforce(const BaseMesh& mesh, const Vec2& uv) {
  TriangleLocation loc;
  for (std::uint32_t t = 0; t < mesh.triangles.size(); ++t) {
    if (try_triangle(mesh, t, uv, loc)) return loc;
  }
  throw UnmappedUVError("no triangle covers uv " + uv_string(uv), 0);
}

SurfacePoint map_point(const BaseMesh& mesh, std::uint32_t triangle, const std::array<double, 3>& bary,
                       double height) {
  const auto& tri = mesh.triangles[triangle];
  const auto& v0 = mesh.vertices[tri[0]];
  const auto& v1 = mesh.vertices[tri[1]];
  const auto& v2 = mesh.vertices[tri[2]];
  const Vec3 s = v0.position * bary[0] + v1.position * bary[1] + v2.position * bary[2];
  const Vec3 n = v0.normal * bary[0] + v1.normal * bary[1] + v2.normal * bary[2];
  const double len = length(n);
  if (len < 1e-6) throw DegenerateNormalError("interpolated normal vanishes in triangle " + std::to_string(triangle));
  const Vec3 nh = n / len;
  return {s + nh * height, nh};
}

Vec3 surface_u_direction(const BaseMesh& mesh, std::uint32_t triangle, const Vec3& normal) {
  const auto& tri = mesh.triangles[triangle];
  const auto& a = mesh.vertices[tri[0]];
  const auto& b = mesh.vertices[tri[1]];
  const auto& c = mesh.vertices[tri[2]];
  const Vec3 dp1 = b.position - a.position, dp2 = c.position - a.position;
  const Vec2 duv1 = b.uv - a.uv, duv2 = c.uv - a.uv;
  const double det = cross(duv1, duv2);
  Vec3 dpdu = (dp1 * duv2.y - dp2 * duv1.y) / det;
  dpdu = reject(dpdu, normal);
  const double len = length(dpdu);
  return len > 1e-12 ? dpdu / len : any_orthogonal(normal);
}

namespace {

template <typename Locate>
std::vector<MappedPly> transform_impl(const BaseMesh& mesh, std::span<const PlyCurve> curves,
                                      const MappingOptions& options, Locate&& locate) {
  std::vector<MappedPly> out(curves.size());
  detail::parallel_for(curves.size(), 0, [&](std::size_t p) {
    const auto& src = curves[p];
    const double base = options.shell_base >= 0 ? options.shell_base : 1.5 * src.radius;
    MappedPly mp;
    mp.ply.radius = src.radius;
    mp.ply.yarn_id = src.yarn_id;
    mp.ply.ply_index = src.ply_index;
    mp.ply.vertices.resize(src.vertices.size());
    mp.uv.resize(src.vertices.size());
    mp.height.resize(src.vertices.size());
    for (std::size_t i = 0; i < src.vertices.size(); ++i) {
      const auto& v = src.vertices[i];
      const Vec2 uv{v.position.x, v.position.y};
      const double h = v.position.z + base;
      TriangleLocation loc;
      try {
        loc = locate(uv);
      } catch (const UnmappedUVError& e) {
        throw UnmappedUVError("ply " + std::to_string(p) + " vertex " + std::to_string(i) + ": " + e.what(), i);
      }
      const SurfacePoint sp = map_point(mesh, loc.triangle, loc.bary, h);
      const Vec3 eu = surface_u_direction(mesh, loc.triangle, sp.normal);
      const Vec3 ev = cross(sp.normal, eu);
      const Vec3& tn = v.normal;
      mp.ply.vertices[i].position = sp.position;
      mp.ply.vertices[i].normal = normalize(eu * tn.x + ev * tn.y + sp.normal * tn.z);
      mp.uv[i] = uv;
      mp.height[i] = h;
    }
    recompute_arclen(mp.ply.vertices);
    out[p] = std::move(mp);
  });
  return out;
}

}  // namespace

std::vector<MappedPly> transform_plies(const MappingGrid& grid, const BaseMesh& mesh, std::span<const PlyCurve> curves,
                                       const MappingOptions& options) {
  return transform_impl(mesh, curves, options, [&](const Vec2& uv) { return locate_triangle(grid, mesh, uv); });
}

std::vector<MappedPly> transform_plies_bruteforce(const BaseMesh& mesh, std::span<const PlyCurve> curves,
                                                  const MappingOptions& options) {
  return transform_impl(mesh, curves, options, [&](const Vec2& uv) { return locate_triangle_bruteforce(mesh, uv); });
}

std::string serialize_mgb(const MappingGrid& grid) {
  detail::ByteWriter w;
  w.raw("MGB1");
  w.u32(static_cast<std::uint32_t>(grid.gu));
  w.u32(static_cast<std::uint32_t>(grid.gv));
  w.f64(grid.bounds.lo.x);
  w.f64(grid.bounds.lo.y);
  w.f64(grid.bounds.hi.x);
  w.f64(grid.bounds.hi.y);
  for (const auto& c : grid.cells) {
    w.u32(static_cast<std::uint32_t>(c.segments.size()));
    for (auto s : c.segments) w.u32(s);
    w.u32(static_cast<std::uint32_t>(c.triangles.size()));
    for (auto t : c.triangles) w.u32(t);
  }
  return w.take();
}

MappingGrid deserialize_mgb(std::string_view bytes) {
  detail::ByteReader r(bytes, "MGB");
  r.expect_magic("MGB1");
  MappingGrid g;
  g.gu = static_cast<int>(r.u32());
  g.gv = static_cast<int>(r.u32());
  if (g.gu < 1 || g.gv < 1 || std::size_t(g.gu) * std::size_t(g.gv) > r.remaining()) {
    throw ParseError("MGB: invalid resolution");
  }
  g.bounds.lo = {r.f64(), r.f64()};
  g.bounds.hi = {r.f64(), r.f64()};
  g.cells.resize(static_cast<std::size_t>(g.gu) * static_cast<std::size_t>(g.gv));
  for (auto& c : g.cells) {
    for (auto* list : {&c.segments, &c.triangles}) {
      const auto n = r.u32();
      if (std::size_t{n} * 4 > r.remaining()) throw ParseError("MGB: truncated");
      list->resize(n);
      for (auto& v : *list) v = r.u32();
    }
  }
  r.expect_end();
  return g;
}

void write_mgb(const std::filesystem::path& path, const MappingGrid& grid) {
  detail::write_text_file(path, serialize_mgb(grid));
}

MappingGrid read_mgb(const std::filesystem::path& path) { return deserialize_mgb(detail::read_binary_file(path)); }

}  // namespace knitply
