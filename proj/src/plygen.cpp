#include "knitply/plygen.hpp"

#include <algorithm>
#include <cmath>

#include "binio.hpp"
#include "knitply/errors.hpp"
#include "text_util.hpp"

namespace knitply {

void PlyParams::validate() const {
  if (num_plies < 1) throw InvariantError("num_plies must be >= 1");
  if (!(ply_offset >= 0)) throw InvariantError("ply_offset must be >= 0");
  if (!(ply_radius > 0)) throw InvariantError("ply_radius must be > 0");
  if (!std::isfinite(twist_rate)) throw InvariantError("twist_rate must be finite");
  if (!(effective_step() > 0)) throw InvariantError("resample_step must be > 0");
}

namespace {

constexpr double kDegenerateLength = 1e-14;

std::vector<Vec3> central_tangents(std::span<const Vec3> p, const Vec3* wrap_prev, const Vec3* wrap_next) {
  const std::size_t n = p.size();
  std::vector<Vec3> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 a = i > 0 ? p[i - 1] : (wrap_prev ? *wrap_prev : p[i]);
    const Vec3 b = i + 1 < n ? p[i + 1] : (wrap_next ? *wrap_next : p[i]);
    const Vec3 d = b - a;
    const double len = length(d);
    if (len < kDegenerateLength) throw DegenerateError("degenerate tangent at vertex " + std::to_string(i));
    t[i] = d / len;
  }
  return t;
}

std::vector<Frame> double_reflection(std::span<const Vec3> p, std::span<const Vec3> t, const Vec3& initial_normal) {
  const std::size_t n = p.size();
  std::vector<Frame> frames(n);
  const Vec3 r0 = reject(initial_normal, t[0]);
  if (length(r0) < 1e-12) throw DegenerateError("initial normal is parallel to the first tangent");
  frames[0] = make_frame(t[0], r0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Vec3 v1 = p[i + 1] - p[i];
    const double c1 = dot(v1, v1);
    const Vec3& ri = frames[i].normal;
    const Vec3 r_l = ri - v1 * (2.0 / c1 * dot(v1, ri));
    const Vec3 t_l = t[i] - v1 * (2.0 / c1 * dot(v1, t[i]));
    const Vec3 v2 = t[i + 1] - t_l;
    const double c2 = dot(v2, v2);
    const Vec3 r_next = c2 > 1e-300 ? r_l - v2 * (2.0 / c2 * dot(v2, r_l)) : r_l;
    frames[i + 1] = make_frame(t[i + 1], r_next);
  }
  return frames;
}

void check_segments(std::span<const Vec3> p) {
  if (p.size() < 2) throw DegenerateError("curve needs at least 2 vertices");
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    if (distance(p[i], p[i + 1]) < kDegenerateLength) {
      throw DegenerateError("zero-length segment at vertex " + std::to_string(i));
    }
  }
}

}  // namespace

std::vector<Frame> rmf_frames(std::span<const Vec3> curve, const Vec3& initial_normal) {
  check_segments(curve);
  const auto t = central_tangents(curve, nullptr, nullptr);
  return double_reflection(curve, t, initial_normal);
}

Vec3 default_initial_normal(const Vec3& tangent) {
  const Vec3 axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  int best = 0;
  for (int k = 1; k < 3; ++k) {
    if (std::abs(dot(axes[k], tangent)) < std::abs(dot(axes[best], tangent))) best = k;
  }
  return normalize(reject(axes[best], tangent));
}

double polyline_length(std::span<const Vec3> pts) {
  double len = 0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) len += distance(pts[i], pts[i + 1]);
  return len;
}

std::vector<Vec3> resample_polyline(std::span<const Vec3> pts, std::size_t segments) {
  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + distance(pts[i - 1], pts[i]);
  const double total = cum.back();
  std::vector<Vec3> out;
  out.reserve(segments + 1);
  std::size_t k = 0;
  for (std::size_t j = 0; j <= segments; ++j) {
    if (j == segments) {
      out.push_back(pts.back());
      break;
    }
    const double s = total * static_cast<double>(j) / static_cast<double>(segments);
    while (k + 2 < pts.size() && cum[k + 1] <= s) ++k;
    const double seg = cum[k + 1] - cum[k];
    const double a = seg > 0 ? std::clamp((s - cum[k]) / seg, 0.0, 1.0) : 0.0;
    out.push_back(lerp(pts[k], pts[k + 1], a));
  }
  return out;
}

void recompute_arclen(std::vector<PlyVertex>& vertices) {
  double s = 0;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (i > 0) s += distance(vertices[i - 1].position, vertices[i].position);
    vertices[i].arclen = s;
  }
}

std::vector<PlyCurve> generate_plies(const YarnCurve& yarn, const PlyParams& params, std::uint32_t yarn_id,
                                     std::optional<Vec3> initial_normal) {
  params.validate();
  std::vector<Vec3> src = yarn.vertices;
  if (yarn.closed) src.push_back(yarn.vertices.front() + yarn.period);
  check_segments(src);

  const double total = polyline_length(src);
  const auto segments =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(total / params.effective_step() - 1e-9)));
  const auto centers = resample_polyline(src, segments);
  const std::size_t n = centers.size();

  std::vector<Vec3> tangents;
  if (yarn.closed) {
    const Vec3 prev = centers[n - 2] - yarn.period;
    const Vec3 next = centers[1] + yarn.period;
    tangents = central_tangents(centers, &prev, &next);
    // Both seam samples represent the same point; share the periodic tangent.
    tangents[0] = normalize(centers[1] - prev);
    tangents[n - 1] = tangents[0];
  } else {
    tangents = central_tangents(centers, nullptr, nullptr);
  }
  const Vec3 n0 = initial_normal ? *initial_normal : default_initial_normal(tangents[0]);
  auto frames = double_reflection(centers, tangents, n0);

  std::vector<double> s(n);
  for (std::size_t j = 0; j < n; ++j) s[j] = total * static_cast<double>(j) / static_cast<double>(segments);

  double twist = params.twist_rate;
  if (yarn.closed) {
    const Frame& a = frames.back();
    const Frame& b = frames.front();
    const double mismatch = std::atan2(dot(cross(a.normal, b.normal), a.tangent), dot(a.normal, b.normal));
    for (std::size_t j = 0; j < n; ++j) {
      auto& f = frames[j];
      const double ang = mismatch * s[j] / total;
      f.normal = rotate(f.normal, f.tangent, ang);
      f = make_frame(f.tangent, f.normal);
    }
    frames.back() = frames.front();
    twist = kTwoPi * std::round(twist * total / kTwoPi) / total;
  }

  const int k_count = params.num_plies;
  std::vector<PlyCurve> plies(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    auto& ply = plies[static_cast<std::size_t>(k)];
    ply.radius = params.ply_radius;
    ply.yarn_id = yarn_id;
    ply.ply_index = static_cast<std::uint32_t>(k);
    ply.vertices.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double theta = kTwoPi * k / k_count + twist * s[j];
      const Vec3 radial = frames[j].normal * std::cos(theta) + frames[j].binormal * std::sin(theta);
      ply.vertices[j].position = centers[j] + radial * params.ply_offset;
      ply.vertices[j].normal = radial;
    }
    if (yarn.closed) ply.vertices.back().position = ply.vertices.front().position + yarn.period;
    // Make the stored normal exactly orthogonal to the discrete ply tangent.
    std::vector<Vec3> pos(n);
    for (std::size_t j = 0; j < n; ++j) pos[j] = ply.vertices[j].position;
    check_segments(pos);
    std::vector<Vec3> ply_t;
    if (yarn.closed) {
      const Vec3 prev = pos[n - 2] - yarn.period;
      const Vec3 next = pos[1] + yarn.period;
      ply_t = central_tangents(pos, &prev, &next);
    } else {
      ply_t = central_tangents(pos, nullptr, nullptr);
    }
    for (std::size_t j = 0; j < n; ++j) {
      const Vec3 nrm = reject(ply.vertices[j].normal, ply_t[j]);
      const double len = length(nrm);
      ply.vertices[j].normal = len > 1e-9 ? nrm / len : any_orthogonal(ply_t[j]);
    }
    recompute_arclen(ply.vertices);
  }
  return plies;
}

namespace {

// GCC 11 at -O3 drops the float narrowing when this is SLP-vectorized.
[[gnu::noinline]] double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

PlyCurve quantize(const PlyCurve& ply) {
  const auto q = round_to_float;
  PlyCurve out;
  out.yarn_id = ply.yarn_id;
  out.ply_index = ply.ply_index;
  out.radius = q(ply.radius);
  out.vertices.reserve(ply.vertices.size());
  for (const auto& v : ply.vertices) {
    const Vec3 p{q(v.position.x), q(v.position.y), q(v.position.z)};
    const Vec3 n{q(v.normal.x), q(v.normal.y), q(v.normal.z)};
    out.vertices.push_back({p, n, q(v.arclen)});
  }
  return out;
}

std::string serialize_plb(std::span<const PlyCurve> plies) {
  detail::ByteWriter w;
  w.raw("PLB1");
  w.u32(static_cast<std::uint32_t>(plies.size()));
  for (const auto& ply : plies) {
    w.u32(ply.yarn_id);
    w.u32(ply.ply_index);
    w.f32(static_cast<float>(ply.radius));
    w.u32(static_cast<std::uint32_t>(ply.vertices.size()));
    for (const auto& v : ply.vertices) {
      for (double c : {v.position.x, v.position.y, v.position.z, v.normal.x, v.normal.y, v.normal.z, v.arclen}) {
        w.f32(static_cast<float>(c));
      }
    }
  }
  return w.take();
}

std::vector<PlyCurve> deserialize_plb(std::string_view bytes) {
  detail::ByteReader r(bytes, "PLB");
  r.expect_magic("PLB1");
  const std::uint32_t count = r.u32();
  std::vector<PlyCurve> plies;
  plies.reserve(std::min<std::uint32_t>(count, 1u << 20));
  for (std::uint32_t p = 0; p < count; ++p) {
    PlyCurve ply;
    ply.yarn_id = r.u32();
    ply.ply_index = r.u32();
    ply.radius = r.f32();
    const std::uint32_t n = r.u32();
    if (std::size_t{n} * kPlbVertexBytes > r.remaining()) throw ParseError("PLB: truncated");
    ply.vertices.resize(n);
    for (auto& v : ply.vertices) {
      v.position = {r.f32(), r.f32(), r.f32()};
      v.normal = {r.f32(), r.f32(), r.f32()};
      v.arclen = r.f32();
    }
    plies.push_back(std::move(ply));
  }
  r.expect_end();
  return plies;
}

void write_plb(const std::filesystem::path& path, std::span<const PlyCurve> plies) {
  detail::write_text_file(path, serialize_plb(plies));
}

std::vector<PlyCurve> read_plb(const std::filesystem::path& path) {
  return deserialize_plb(detail::read_binary_file(path));
}

}  // namespace knitply
