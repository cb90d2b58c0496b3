#include "knitply/pattern.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "knitply/errors.hpp"
#include "text_util.hpp"

namespace knitply {

Neighbor opposite(Neighbor n) {
  switch (n) {
    case Neighbor::left: return Neighbor::right;
    case Neighbor::right: return Neighbor::left;
    case Neighbor::bottom: return Neighbor::top;
    case Neighbor::top: return Neighbor::bottom;
  }
  return n;
}

std::pair<int, int> neighbor_offset(Neighbor n) {
  switch (n) {
    case Neighbor::left: return {-1, 0};
    case Neighbor::right: return {1, 0};
    case Neighbor::bottom: return {0, -1};
    case Neighbor::top: return {0, 1};
  }
  return {0, 0};
}

const char* to_string(Neighbor n) {
  switch (n) {
    case Neighbor::left: return "left";
    case Neighbor::right: return "right";
    case Neighbor::bottom: return "bottom";
    case Neighbor::top: return "top";
  }
  return "?";
}

const char* to_string(CurveEnd e) { return e == CurveEnd::head ? "head" : "tail"; }

namespace {

constexpr Neighbor kNeighbors[] = {Neighbor::left, Neighbor::right, Neighbor::bottom, Neighbor::top};
constexpr CurveEnd kEnds[] = {CurveEnd::tail, CurveEnd::head};

double boundary_distance(const Vec3& p) {
  return std::min({std::abs(p.x), std::abs(p.x - 1.0), std::abs(p.y), std::abs(p.y - 1.0)});
}

}  // namespace

void validate(const PatternCell& cell, double edge_eps) {
  if (!(cell.du > 0) || !(cell.dv > 0)) throw InvariantError("tile size must be positive");
  for (std::size_t c = 0; c < cell.curves.size(); ++c) {
    const auto& curve = cell.curves[c];
    if (curve.points.size() < 2) {
      throw ParseError("curve " + std::to_string(c) + " has fewer than 2 vertices");
    }
    for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
      if (!(distance(curve.points[i], curve.points[i + 1]) > 0)) {
        throw InvariantError("curve " + std::to_string(c) + " has a zero-length segment at vertex " +
                             std::to_string(i));
      }
    }
    for (CurveEnd e : kEnds) {
      if (curve.is_free(e)) continue;
      if (boundary_distance(curve.endpoint(e)) > edge_eps) {
        throw InvariantError("curve " + std::to_string(c) + " " + to_string(e) +
                             " is off the tile boundary and not flagged free");
      }
    }
  }
}

PatternCell parse_kcf(const std::string& text) {
  PatternCell cell;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool have_magic = false, have_tile = false;
  std::size_t pending = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw ParseError("KCF line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0].starts_with('#')) continue;
    if (!have_magic) {
      if (tok.size() != 2 || tok[0] != "KCF" || tok[1] != "1") fail("expected 'KCF 1'");
      have_magic = true;
      continue;
    }
    if (!have_tile) {
      if (tok.size() != 3 || tok[0] != "tile") fail("expected 'tile <du> <dv>'");
      cell.du = detail::parse_double(tok[1], line_no);
      cell.dv = detail::parse_double(tok[2], line_no);
      have_tile = true;
      continue;
    }
    if (tok[0] == "curve") {
      if (pending != 0) fail("previous curve is missing vertices");
      if (tok.size() < 3) fail("expected 'curve <id> <vertex_count> [free_head] [free_tail]'");
      const auto id = detail::parse_uint(tok[1], line_no);
      if (id != cell.curves.size()) fail("curve ids must be dense and ascending");
      pending = detail::parse_uint(tok[2], line_no);
      if (pending < 2) fail("curve " + std::to_string(id) + " has fewer than 2 vertices");
      PatternCurve curve;
      for (std::size_t k = 3; k < tok.size(); ++k) {
        if (tok[k] == "free_head") {
          curve.free_head = true;
        } else if (tok[k] == "free_tail") {
          curve.free_tail = true;
        } else {
          fail("unknown curve flag '" + std::string(tok[k]) + "'");
        }
      }
      cell.curves.push_back(std::move(curve));
    } else if (tok[0] == "v") {
      if (pending == 0) fail("vertex outside a curve block");
      if (tok.size() != 4) fail("expected 'v <u> <v> <h>'");
      cell.curves.back().points.push_back({detail::parse_double(tok[1], line_no),
                                           detail::parse_double(tok[2], line_no),
                                           detail::parse_double(tok[3], line_no)});
      --pending;
    } else {
      fail("unknown record '" + std::string(tok[0]) + "'");
    }
  }
  if (!have_magic || !have_tile) throw ParseError("KCF: missing header");
  if (pending != 0) throw ParseError("KCF: truncated curve block");
  validate(cell);
  return cell;
}

PatternCell load_pattern(const std::filesystem::path& path) {
  return parse_kcf(detail::read_text_file(path));
}

std::string format_kcf(const PatternCell& cell) {
  std::ostringstream out;
  out << "KCF 1\n";
  out << "tile " << detail::fmt_double(cell.du) << ' ' << detail::fmt_double(cell.dv) << '\n';
  for (std::size_t c = 0; c < cell.curves.size(); ++c) {
    const auto& curve = cell.curves[c];
    out << "curve " << c << ' ' << curve.points.size();
    if (curve.free_head) out << " free_head";
    if (curve.free_tail) out << " free_tail";
    out << '\n';
    for (const auto& p : curve.points) {
      out << "v " << detail::fmt_double(p.x) << ' ' << detail::fmt_double(p.y) << ' '
          << detail::fmt_double(p.z) << '\n';
    }
  }
  return out.str();
}

std::vector<EndpointLabel> compute_partners(const PatternCell& cell, double match_eps) {
  validate(cell);
  struct Candidate {
    double dist;
    std::uint32_t curve;
    CurveEnd end;
    Neighbor neighbor;
  };
  const auto curve_count = static_cast<std::uint32_t>(cell.curves.size());
  std::vector<EndpointLabel> labels;
  for (std::uint32_t c = 0; c < curve_count; ++c) {
    for (CurveEnd e : kEnds) {
      if (cell.curves[c].is_free(e)) continue;
      const Vec3 p = cell.curves[c].endpoint(e);
      Candidate best{std::numeric_limits<double>::infinity(), 0, CurveEnd::tail, Neighbor::left};
      double second = std::numeric_limits<double>::infinity();
      for (Neighbor nb : kNeighbors) {
        const auto [di, dj] = neighbor_offset(nb);
        const Vec3 shift{static_cast<double>(di), static_cast<double>(dj), 0};
        for (std::uint32_t oc = 0; oc < curve_count; ++oc) {
          for (CurveEnd oe : kEnds) {
            if (cell.curves[oc].is_free(oe)) continue;
            const double d = distance(p, cell.curves[oc].endpoint(oe) + shift);
            if (d < best.dist) {
              second = best.dist;
              best = {d, oc, oe, nb};
            } else if (d < second) {
              second = d;
            }
          }
        }
      }
      const std::string who = "curve " + std::to_string(c) + " " + to_string(e);
      if (best.dist > match_eps) {
        std::string msg = who + ": no partner endpoint within " + detail::fmt_double(match_eps);
        // Diagonal neighbors are not part of the lattice; report them explicitly.
        for (int di : {-1, 1}) {
          for (int dj : {-1, 1}) {
            for (std::uint32_t oc = 0; oc < curve_count; ++oc) {
              for (CurveEnd oe : kEnds) {
                if (!cell.curves[oc].is_free(oe) &&
                    distance(p, cell.curves[oc].endpoint(oe) + Vec3{double(di), double(dj), 0}) <= match_eps) {
                  msg += " (a diagonal-neighbor endpoint matches; only 4-neighborhoods are supported)";
                }
              }
            }
          }
        }
        throw NoPartnerError(msg);
      }
      if (second <= match_eps && second - best.dist <= match_eps / 10) {
        throw AmbiguityError(who + ": two partner candidates tie within " + detail::fmt_double(match_eps / 10));
      }
      labels.push_back({c, e, best.neighbor, best.curve, best.end});
    }
  }
  for (const auto& l : labels) {
    auto it = std::find_if(labels.begin(), labels.end(), [&](const EndpointLabel& o) {
      return o.curve_id == l.partner_curve_id && o.end == l.partner_end;
    });
    if (it == labels.end() || it->partner_curve_id != l.curve_id || it->partner_end != l.end ||
        it->neighbor != opposite(l.neighbor)) {
      throw AmbiguityError("curve " + std::to_string(l.curve_id) + " " + to_string(l.end) +
                           ": partnering is not symmetric");
    }
  }
  return labels;
}

std::vector<int> TiledGraph::degrees() const {
  std::vector<int> deg(node_count(), 0);
  for (const auto& e : edges) {
    ++deg[e.a.node];
    ++deg[e.b.node];
  }
  return deg;
}

TiledGraph tile(const PatternCell& cell, const std::vector<EndpointLabel>& labels, int n, int m, bool wrap_u,
                bool wrap_v) {
  if (n < 1 || m < 1) throw InvariantError("tiling dimensions must be >= 1");
  TiledGraph g;
  g.n = n;
  g.m = m;
  g.curve_count = static_cast<std::uint32_t>(cell.curves.size());
  g.wrap_u = wrap_u;
  g.wrap_v = wrap_v;
  std::map<std::pair<EndpointRef, EndpointRef>, std::size_t> seen;
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) {
      for (const auto& l : labels) {
        const auto [di, dj] = neighbor_offset(l.neighbor);
        int ti = i + di, tj = j + dj;
        if (ti < 0 || ti >= n) {
          if (!wrap_u) continue;
          ti = (ti + n) % n;
        }
        if (tj < 0 || tj >= m) {
          if (!wrap_v) continue;
          tj = (tj + m) % m;
        }
        TiledEdge e{{g.node_id(i, j, l.curve_id), l.end}, {g.node_id(ti, tj, l.partner_curve_id), l.partner_end}, di,
                    dj};
        if (e.b < e.a) {
          std::swap(e.a, e.b);
          e.di = -e.di;
          e.dj = -e.dj;
        }
        if (seen.emplace(std::pair{e.a, e.b}, g.edges.size()).second) g.edges.push_back(e);
      }
    }
  }
  return g;
}

Vec3 texture_position(const PatternCell& cell, const Vec3& local, double ci, double cj) {
  return {(ci + local.x) * cell.du, (cj + local.y) * cell.dv, local.z * cell.du};
}

namespace {

CurveEnd other(CurveEnd e) { return e == CurveEnd::head ? CurveEnd::tail : CurveEnd::head; }

std::size_t slot(EndpointRef r) { return std::size_t{r.node} * 2 + static_cast<std::size_t>(r.end); }

}  // namespace

std::vector<YarnCurve> stitch(const TiledGraph& graph, const PatternCell& cell) {
  if (graph.curve_count != cell.curves.size()) throw InvariantError("graph does not match pattern cell");
  const std::uint32_t node_count = graph.node_count();
  for (const auto& e : graph.edges) {
    if (e.a.node >= node_count || e.b.node >= node_count) throw TopologyError("edge references a missing node");
  }
  const auto deg = graph.degrees();
  for (std::uint32_t v = 0; v < node_count; ++v) {
    if (deg[v] > 2) throw TopologyError("node " + std::to_string(v) + " has degree " + std::to_string(deg[v]));
  }
  std::vector<std::ptrdiff_t> adj(std::size_t{node_count} * 2, -1);
  for (std::size_t k = 0; k < graph.edges.size(); ++k) {
    for (EndpointRef r : {graph.edges[k].a, graph.edges[k].b}) {
      if (adj[slot(r)] != -1) {
        throw TopologyError("endpoint " + std::string(to_string(r.end)) + " of node " + std::to_string(r.node) +
                            " has more than one connection");
      }
      adj[slot(r)] = static_cast<std::ptrdiff_t>(k);
    }
  }
  // Returns the endpoint reached from `from` and the cell step taken.
  auto follow = [&](EndpointRef from, int& di, int& dj) -> std::optional<EndpointRef> {
    const auto k = adj[slot(from)];
    if (k < 0) return std::nullopt;
    const auto& e = graph.edges[static_cast<std::size_t>(k)];
    if (e.a == from) {
      di = e.di;
      dj = e.dj;
      return e.b;
    }
    di = -e.di;
    dj = -e.dj;
    return e.a;
  };

  std::vector<char> visited(node_count, 0);
  std::vector<YarnCurve> out;
  for (std::uint32_t start_node = 0; start_node < node_count; ++start_node) {
    if (visited[start_node]) continue;

    // Walk forward from the head to detect a cycle or find the chain's terminal endpoints.
    bool cycle = false;
    EndpointRef terminal_fwd{start_node, CurveEnd::head};
    {
      EndpointRef cur{start_node, CurveEnd::head};
      for (std::uint32_t steps = 0; steps <= node_count; ++steps) {
        int di, dj;
        auto nxt = follow(cur, di, dj);
        if (!nxt) {
          terminal_fwd = cur;
          break;
        }
        if (nxt->node == start_node) {
          cycle = true;
          break;
        }
        cur = {nxt->node, other(nxt->end)};
      }
    }
    EndpointRef entry{start_node, CurveEnd::tail};
    if (!cycle) {
      EndpointRef cur{start_node, CurveEnd::tail};
      EndpointRef terminal_bwd = cur;
      for (std::uint32_t steps = 0; steps <= node_count; ++steps) {
        int di, dj;
        auto nxt = follow(cur, di, dj);
        if (!nxt) {
          terminal_bwd = cur;
          break;
        }
        cur = {nxt->node, other(nxt->end)};
      }
      entry = std::min(terminal_fwd, terminal_bwd);
    }

    // Traverse, collecting oriented per-node vertex lists in an unwrapped frame.
    std::vector<std::vector<Vec3>> pieces;
    YarnCurve yarn;
    yarn.closed = cycle;
    const int i0 = static_cast<int>(graph.cell_of(entry.node) % static_cast<std::uint32_t>(graph.n));
    const int j0 = static_cast<int>(graph.cell_of(entry.node) / static_cast<std::uint32_t>(graph.n));
    int fi = i0, fj = j0;
    EndpointRef cur = entry;
    while (true) {
      if (visited[cur.node]) throw TopologyError("node " + std::to_string(cur.node) + " visited twice");
      visited[cur.node] = 1;
      yarn.nodes.push_back(cur.node);
      const auto& pts = cell.curves[graph.curve_of(cur.node)].points;
      std::vector<Vec3> piece;
      piece.reserve(pts.size());
      for (std::size_t k = 0; k < pts.size(); ++k) {
        const auto& p = cur.end == CurveEnd::tail ? pts[k] : pts[pts.size() - 1 - k];
        piece.push_back(texture_position(cell, p, fi, fj));
      }
      pieces.push_back(std::move(piece));
      int di = 0, dj = 0;
      auto nxt = follow({cur.node, other(cur.end)}, di, dj);
      fi += di;
      fj += dj;
      if (!nxt) break;
      if (cycle && nxt->node == entry.node) {
        if (nxt->end != entry.end) throw TopologyError("cycle re-enters its start node through the wrong end");
        yarn.period = {(fi - i0) * cell.du, (fj - j0) * cell.dv, 0};
        break;
      }
      cur = *nxt;
    }

    auto mid = [](const Vec3& a, const Vec3& b) { return (a + b) * 0.5; };
    auto& v = yarn.vertices;
    if (!cycle) {
      v.insert(v.end(), pieces[0].begin(), pieces[0].end() - 1);
      for (std::size_t k = 1; k < pieces.size(); ++k) {
        v.push_back(mid(pieces[k - 1].back(), pieces[k].front()));
        v.insert(v.end(), pieces[k].begin() + 1, pieces[k].end() - 1);
      }
      v.push_back(pieces.back().back());
    } else {
      v.push_back(mid(pieces.back().back() - yarn.period, pieces.front().front()));
      for (std::size_t k = 0; k < pieces.size(); ++k) {
        if (k > 0) v.push_back(mid(pieces[k - 1].back(), pieces[k].front()));
        v.insert(v.end(), pieces[k].begin() + 1, pieces[k].end() - 1);
      }
    }
    out.push_back(std::move(yarn));
  }
  return out;
}

void write_yarns(const std::filesystem::path& path, const std::vector<YarnCurve>& yarns) {
  std::ostringstream out;
  out << "YRN 1\n" << yarns.size() << '\n';
  for (const auto& y : yarns) {
    out << "yarn " << y.vertices.size() << ' ' << (y.closed ? 1 : 0) << ' ' << detail::fmt_double(y.period.x) << ' '
        << detail::fmt_double(y.period.y) << ' ' << detail::fmt_double(y.period.z) << '\n';
    for (const auto& p : y.vertices) {
      out << "v " << detail::fmt_double(p.x) << ' ' << detail::fmt_double(p.y) << ' ' << detail::fmt_double(p.z)
          << '\n';
    }
  }
  detail::write_text_file(path, out.str());
}

std::vector<YarnCurve> read_yarns(const std::filesystem::path& path) {
  std::istringstream in(detail::read_text_file(path));
  std::string magic, ver;
  std::size_t count = 0;
  if (!(in >> magic >> ver >> count) || magic != "YRN" || ver != "1") {
    throw ParseError(path.string() + ": bad magic (expected 'YRN 1')");
  }
  std::vector<YarnCurve> yarns(count);
  for (auto& y : yarns) {
    std::string tag;
    std::size_t n = 0;
    int closed = 0;
    if (!(in >> tag >> n >> closed >> y.period.x >> y.period.y >> y.period.z) || tag != "yarn") {
      throw ParseError(path.string() + ": malformed yarn header");
    }
    y.closed = closed != 0;
    y.vertices.resize(n);
    for (auto& p : y.vertices) {
      if (!(in >> tag >> p.x >> p.y >> p.z) || tag != "v") throw ParseError(path.string() + ": malformed vertex");
    }
  }
  return yarns;
}

}  // namespace knitply
