#pragma once

// Quadtree meshes over a quadrilateral macro mesh: uniform and adaptive
// refinement with 2:1 edge balance, hanging vertex detection and nested grid
// hierarchies.
//
// Vertex indices are stable under refinement: a mesh derived from another by
// refinement keeps every existing vertex at its index and appends new ones.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "vanka/error.hpp"
#include "vanka/linalg.hpp"

namespace vanka {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double length(Point a) { return std::hypot(a.x, a.y); }

enum class BoundaryTag : std::uint8_t {
  DirichletWall,
  DirichletLid,
  DirichletInflow,
  NeumannOutflow,
  Cylinder,
};

inline const char* to_string(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::DirichletWall: return "wall";
    case BoundaryTag::DirichletLid: return "lid";
    case BoundaryTag::DirichletInflow: return "inflow";
    case BoundaryTag::NeumannOutflow: return "outflow";
    case BoundaryTag::Cylinder: return "cylinder";
  }
  return "?";
}

struct UnitSquare {};

struct ChannelWithCylinder {
  double length = 2.2;
  double height = 0.41;
  Point center{0.2, 0.2};
  double radius = 0.05;
};

using Geometry = std::variant<UnitSquare, ChannelWithCylinder>;

struct MacroMeshSpec {
  Geometry geometry = UnitSquare{};
  int initial_uniform_levels = 0;

  void validate() const {
    if (initial_uniform_levels < 0) throw MeshError("initial_uniform_levels must be >= 0");
    if (const auto* ch = std::get_if<ChannelWithCylinder>(&geometry)) {
      if (!(ch->length > 0.0) || !(ch->height > 0.0)) throw MeshError("channel dimensions must be positive");
      if (!(ch->radius > 0.0)) throw MeshError("cylinder radius must be positive");
      const auto& c = ch->center;
      if (c.x - ch->radius <= 0.0 || c.x + ch->radius >= ch->length || c.y - ch->radius <= 0.0 ||
          c.y + ch->radius >= ch->height)
        throw MeshError("cylinder must lie strictly inside the channel");
      if (2.0 * c.x >= ch->length) throw MeshError("cylinder too far downstream for the O-grid block");
    }
  }
};

/// Undirected edge, stored with a < b.
struct EdgeKey {
  Index a = 0;
  Index b = 0;

  EdgeKey() = default;
  EdgeKey(Index u, Index v) : a(std::min(u, v)), b(std::max(u, v)) {}

  friend bool operator==(const EdgeKey&, const EdgeKey&) = default;
  friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
};

struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& e) const noexcept {
    return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(static_cast<std::uint32_t>(e.a)) << 32) |
                                      static_cast<std::uint32_t>(e.b));
  }
};

/// How a vertex came into existence.
struct VertexOrigin {
  enum class Kind : std::uint8_t { Macro, EdgeMidpoint, CellCenter };
  Kind kind = Kind::Macro;
  std::array<Index, 4> parents{-1, -1, -1, -1};  // 2 entries for midpoints, 4 corners for centers
};

struct QuadElement {
  std::array<Index, 4> v{};  // counter-clockwise
  int level = 0;
  Index parent = -1;  // element index in the mesh this one was derived from
};

struct HangingVertex {
  Index vertex;
  Index a;  // endpoints of the unrefined parent edge
  Index b;
};

struct QuadMesh {
  std::vector<Point> vertices;
  std::vector<VertexOrigin> origins;
  std::vector<QuadElement> elements;
  /// Every edge ever split, mapped to its midpoint vertex.
  std::unordered_map<EdgeKey, Index, EdgeKeyHash> edge_midpoints;
  /// Boundary edges of the current leaf elements.
  std::map<EdgeKey, BoundaryTag> boundary_edges;
  std::vector<HangingVertex> hanging_vertices;
  Geometry geometry = UnitSquare{};
  int adaptive_steps = 0;

  Index num_vertices() const { return static_cast<Index>(vertices.size()); }
  Index num_elements() const { return static_cast<Index>(elements.size()); }

  std::optional<Index> midpoint(Index a, Index b) const {
    const auto it = edge_midpoints.find(EdgeKey(a, b));
    if (it == edge_midpoints.end()) return std::nullopt;
    return it->second;
  }
};

inline std::array<Point, 4> corners(const QuadMesh& mesh, const QuadElement& e) {
  return {mesh.vertices[e.v[0]], mesh.vertices[e.v[1]], mesh.vertices[e.v[2]], mesh.vertices[e.v[3]]};
}

inline Point centroid(const QuadMesh& mesh, const QuadElement& e) {
  const auto c = corners(mesh, e);
  return 0.25 * (c[0] + c[1] + c[2] + c[3]);
}

/// Longer diagonal of the quadrilateral.
inline double element_diameter(const QuadMesh& mesh, const QuadElement& e) {
  const auto c = corners(mesh, e);
  return std::max(length(c[2] - c[0]), length(c[3] - c[1]));
}

/// Per-vertex bitmask of the tags of adjacent boundary edges (bit = tag value).
inline std::vector<std::uint8_t> vertex_boundary_tags(const QuadMesh& mesh) {
  std::vector<std::uint8_t> tags(mesh.vertices.size(), 0);
  for (const auto& [edge, tag] : mesh.boundary_edges) {
    const auto bit = static_cast<std::uint8_t>(1u << static_cast<unsigned>(tag));
    tags[edge.a] |= bit;
    tags[edge.b] |= bit;
  }
  return tags;
}

inline bool has_tag(std::uint8_t mask, BoundaryTag t) {
  return (mask >> static_cast<unsigned>(t)) & 1u;
}

namespace detail {

inline std::optional<ChannelWithCylinder> cylinder_of(const Geometry& g) {
  if (const auto* ch = std::get_if<ChannelWithCylinder>(&g)) return *ch;
  return std::nullopt;
}

inline void recompute_hanging(QuadMesh& mesh) {
  mesh.hanging_vertices.clear();
  for (const auto& e : mesh.elements)
    for (int k = 0; k < 4; ++k) {
      const Index a = e.v[k], b = e.v[(k + 1) % 4];
      if (auto m = mesh.midpoint(a, b)) mesh.hanging_vertices.push_back({*m, std::min(a, b), std::max(a, b)});
    }
  std::sort(mesh.hanging_vertices.begin(), mesh.hanging_vertices.end(),
            [](const HangingVertex& x, const HangingVertex& y) { return x.vertex < y.vertex; });
}

inline Index add_vertex(QuadMesh& mesh, Point p, VertexOrigin origin) {
  mesh.vertices.push_back(p);
  mesh.origins.push_back(origin);
  return mesh.num_vertices() - 1;
}

inline Index get_or_create_midpoint(QuadMesh& mesh, Index a, Index b,
                                    const std::optional<ChannelWithCylinder>& cylinder) {
  const EdgeKey key(a, b);
  if (auto it = mesh.edge_midpoints.find(key); it != mesh.edge_midpoints.end()) return it->second;
  Point p = 0.5 * (mesh.vertices[key.a] + mesh.vertices[key.b]);
  const auto bt = mesh.boundary_edges.find(key);
  if (cylinder && bt != mesh.boundary_edges.end() && bt->second == BoundaryTag::Cylinder) {
    const Point d = p - cylinder->center;
    p = cylinder->center + (cylinder->radius / length(d)) * d;
  }
  VertexOrigin o;
  o.kind = VertexOrigin::Kind::EdgeMidpoint;
  o.parents = {key.a, key.b, -1, -1};
  const Index m = add_vertex(mesh, p, o);
  mesh.edge_midpoints.emplace(key, m);
  return m;
}

}  // namespace detail

/// Splits every marked element into four children. No balance closure.
inline QuadMesh refine_marked(const QuadMesh& mesh, const std::vector<bool>& marks) {
  if (marks.size() != mesh.elements.size()) throw DimensionError("refine_marked: mark vector size mismatch");
  const auto cylinder = detail::cylinder_of(mesh.geometry);
  QuadMesh out;
  out.vertices = mesh.vertices;
  out.origins = mesh.origins;
  out.edge_midpoints = mesh.edge_midpoints;
  out.boundary_edges = mesh.boundary_edges;
  out.geometry = mesh.geometry;
  out.adaptive_steps = mesh.adaptive_steps;
  out.elements.reserve(mesh.elements.size() + 3 * std::count(marks.begin(), marks.end(), true));

  for (Index ei = 0; ei < mesh.num_elements(); ++ei) {
    const auto& e = mesh.elements[ei];
    if (!marks[ei]) {
      out.elements.push_back({e.v, e.level, ei});
      continue;
    }
    std::array<Index, 4> m{};
    for (int k = 0; k < 4; ++k) m[k] = detail::get_or_create_midpoint(out, e.v[k], e.v[(k + 1) % 4], cylinder);
    VertexOrigin co;
    co.kind = VertexOrigin::Kind::CellCenter;
    co.parents = e.v;
    const auto c = corners(mesh, e);
    const Index center = detail::add_vertex(out, 0.25 * (c[0] + c[1] + c[2] + c[3]), co);
    const int lvl = e.level + 1;
    out.elements.push_back({{e.v[0], m[0], center, m[3]}, lvl, ei});
    out.elements.push_back({{m[0], e.v[1], m[1], center}, lvl, ei});
    out.elements.push_back({{center, m[1], e.v[2], m[2]}, lvl, ei});
    out.elements.push_back({{m[3], center, m[2], e.v[3]}, lvl, ei});
  }

  std::map<EdgeKey, BoundaryTag> boundary;
  for (const auto& [edge, tag] : mesh.boundary_edges) {
    if (auto mid = out.midpoint(edge.a, edge.b)) {
      boundary.emplace(EdgeKey(edge.a, *mid), tag);
      boundary.emplace(EdgeKey(*mid, edge.b), tag);
    } else {
      boundary.emplace(edge, tag);
    }
  }
  out.boundary_edges = std::move(boundary);
  detail::recompute_hanging(out);
  return out;
}

inline QuadMesh refine_uniform(const QuadMesh& mesh) {
  return refine_marked(mesh, std::vector<bool>(mesh.elements.size(), true));
}

/// Elements that sit next to a neighbor two levels finer across one of their edges.
inline std::vector<bool> balance_violations(const QuadMesh& mesh) {
  std::vector<bool> bad(mesh.elements.size(), false);
  for (Index ei = 0; ei < mesh.num_elements(); ++ei) {
    const auto& e = mesh.elements[ei];
    for (int k = 0; k < 4 && !bad[ei]; ++k) {
      const Index a = e.v[k], b = e.v[(k + 1) % 4];
      const auto m = mesh.midpoint(a, b);
      if (!m) continue;
      if (mesh.midpoint(a, *m) || mesh.midpoint(*m, b)) bad[ei] = true;
    }
  }
  return bad;
}

/// Refines until every pair of edge neighbors differs by at most one level.
inline QuadMesh enforce_two_to_one_balance(const QuadMesh& mesh) {
  QuadMesh current = mesh;
  for (;;) {
    const auto bad = balance_violations(current);
    if (std::none_of(bad.begin(), bad.end(), [](bool b) { return b; })) return current;
    current = refine_marked(current, bad);
  }
}

enum class MarkerRule : std::uint8_t { Uniform, TowardAllBoundaries, TowardWallsAndCylinder };

/// Geometric distance-band marking. An element is marked when its closest
/// vertex lies within the band of the target boundary. At the k-th adaptive
/// step the band is `band_widths[k]` when a per-level list is given (the last
/// entry repeats), otherwise `band_width * shrink_factor^k`.
struct RefinementMarker {
  MarkerRule rule = MarkerRule::Uniform;
  double band_width = 0.0;
  double shrink_factor = 1.0;
  std::vector<double> band_widths;

  static RefinementMarker uniform() { return {}; }
  static RefinementMarker toward_all_boundaries(double band_width) {
    return {MarkerRule::TowardAllBoundaries, band_width, 1.0, {}};
  }
  static RefinementMarker toward_all_boundaries(std::vector<double> band_widths) {
    return {MarkerRule::TowardAllBoundaries, band_widths.empty() ? 0.0 : band_widths.front(), 1.0,
            std::move(band_widths)};
  }
  static RefinementMarker toward_walls_and_cylinder(double band_width, double shrink_factor) {
    return {MarkerRule::TowardWallsAndCylinder, band_width, shrink_factor, {}};
  }

  void validate() const {
    if (rule == MarkerRule::Uniform) return;
    if (!(band_width > 0.0)) throw ConfigError("marker band width must be positive");
    for (double w : band_widths)
      if (!(w > 0.0)) throw ConfigError("marker band widths must be positive");
    if (rule == MarkerRule::TowardWallsAndCylinder && !(shrink_factor > 0.0 && shrink_factor < 1.0))
      throw ConfigError("marker shrink factor must lie in (0,1)");
  }

  double band_at(int step) const {
    if (!band_widths.empty()) return band_widths[std::min<std::size_t>(step, band_widths.size() - 1)];
    return band_width * std::pow(shrink_factor, step);
  }
};

/// Distance from p to the boundary targeted by `rule` (0 on it).
inline double target_distance(const Geometry& g, MarkerRule rule, Point p) {
  if (std::holds_alternative<UnitSquare>(g)) return std::max(0.0, std::min({p.x, 1.0 - p.x, p.y, 1.0 - p.y}));
  const auto& ch = std::get<ChannelWithCylinder>(g);
  const double walls = std::min(p.y, ch.height - p.y);
  const double cyl = length(p - ch.center) - ch.radius;
  double d = std::min(walls, cyl);
  if (rule == MarkerRule::TowardAllBoundaries) d = std::min({d, p.x, ch.length - p.x});
  return std::max(0.0, d);
}

inline std::vector<bool> mark_elements(const QuadMesh& mesh, const RefinementMarker& marker) {
  marker.validate();
  std::vector<bool> marks(mesh.elements.size(), false);
  if (marker.rule == MarkerRule::Uniform) {
    std::fill(marks.begin(), marks.end(), true);
    return marks;
  }
  const double band = marker.band_at(mesh.adaptive_steps);
  for (Index ei = 0; ei < mesh.num_elements(); ++ei) {
    double d = std::numeric_limits<double>::infinity();
    for (Index v : mesh.elements[ei].v)
      d = std::min(d, target_distance(mesh.geometry, marker.rule, mesh.vertices[v]));
    marks[ei] = d <= band + 1e-12;
  }
  return marks;
}

/// Extends `marks` so that splitting the marked set keeps 2:1 edge balance.
inline std::vector<bool> balance_closure(const QuadMesh& mesh, std::vector<bool> marks) {
  std::unordered_map<EdgeKey, std::vector<Index>, EdgeKeyHash> owners;
  for (Index ei = 0; ei < mesh.num_elements(); ++ei)
    for (int k = 0; k < 4; ++k)
      owners[EdgeKey(mesh.elements[ei].v[k], mesh.elements[ei].v[(k + 1) % 4])].push_back(ei);

  auto half_marked = [&](Index a, Index b) {
    const auto it = owners.find(EdgeKey(a, b));
    if (it == owners.end()) return false;
    return std::any_of(it->second.begin(), it->second.end(), [&](Index o) { return marks[o]; });
  };

  bool changed = true;
  while (changed) {
    changed = false;
    for (Index ei = 0; ei < mesh.num_elements(); ++ei) {
      if (marks[ei]) continue;
      const auto& e = mesh.elements[ei];
      for (int k = 0; k < 4; ++k) {
        const Index a = e.v[k], b = e.v[(k + 1) % 4];
        const auto m = mesh.midpoint(a, b);
        if (m && (half_marked(a, *m) || half_marked(*m, b))) {
          marks[ei] = true;
          changed = true;
          break;
        }
      }
    }
  }
  return marks;
}

struct AdaptiveRefinement {
  QuadMesh mesh;
  Index marked = 0;        // elements selected by the marker
  Index closure = 0;       // additional elements split to keep balance
  bool refined() const { return marked + closure > 0; }
};

/// Marks, closes for balance and splits. An empty marking returns the input mesh
/// unchanged with `refined() == false`.
inline AdaptiveRefinement refine_adaptive(const QuadMesh& mesh, const RefinementMarker& marker) {
  const auto marks = mark_elements(mesh, marker);
  AdaptiveRefinement result;
  result.marked = static_cast<Index>(std::count(marks.begin(), marks.end(), true));
  if (result.marked == 0) {
    result.mesh = mesh;
    return result;
  }
  const auto closed = balance_closure(mesh, marks);
  result.closure = static_cast<Index>(std::count(closed.begin(), closed.end(), true)) - result.marked;
  result.mesh = refine_marked(mesh, closed);
  ++result.mesh.adaptive_steps;
  return result;
}

namespace detail {

inline QuadMesh unit_square_macro() {
  QuadMesh m;
  m.geometry = UnitSquare{};
  for (Point p : {Point{0, 0}, Point{1, 0}, Point{1, 1}, Point{0, 1}}) add_vertex(m, p, {});
  m.elements.push_back({{0, 1, 2, 3}, 0, -1});
  m.boundary_edges = {{EdgeKey(0, 1), BoundaryTag::DirichletWall},
                      {EdgeKey(1, 2), BoundaryTag::DirichletWall},
                      {EdgeKey(2, 3), BoundaryTag::DirichletLid},
                      {EdgeKey(3, 0), BoundaryTag::DirichletWall}};
  return m;
}

// O-grid block around the cylinder on [0, 2 cx] x [0, H]: two rings of eight
// quads between the circle and the block outline, followed by two rows of
// roughly square channel blocks down to the outflow.
inline QuadMesh channel_macro(const ChannelWithCylinder& ch) {
  constexpr double kPi = 3.14159265358979323846;
  constexpr double kRingBlend = 0.3;
  QuadMesh m;
  m.geometry = ch;
  const double H = ch.height;
  const Point c = ch.center;
  const double xb = 2.0 * c.x;
  const std::array<Point, 8> outer{Point{xb, c.y}, Point{xb, H},  Point{c.x, H}, Point{0.0, H},
                                   Point{0.0, c.y}, Point{0.0, 0.0}, Point{c.x, 0.0}, Point{xb, 0.0}};
  std::array<Index, 8> ci{}, mi{}, oi{};
  for (int k = 0; k < 8; ++k) {
    const double th = kPi / 4.0 * k;
    const Point on_circle = c + ch.radius * Point{std::cos(th), std::sin(th)};
    ci[k] = add_vertex(m, on_circle, {});
    mi[k] = add_vertex(m, on_circle + kRingBlend * (outer[k] - on_circle), {});
    oi[k] = add_vertex(m, outer[k], {});
  }
  for (int k = 0; k < 8; ++k) {
    const int n = (k + 1) % 8;
    m.elements.push_back({{ci[k], mi[k], mi[n], ci[n]}, 0, -1});
    m.elements.push_back({{mi[k], oi[k], oi[n], mi[n]}, 0, -1});
    m.boundary_edges.emplace(EdgeKey(ci[k], ci[n]), BoundaryTag::Cylinder);
  }
  m.boundary_edges.emplace(EdgeKey(oi[1], oi[2]), BoundaryTag::DirichletWall);
  m.boundary_edges.emplace(EdgeKey(oi[2], oi[3]), BoundaryTag::DirichletWall);
  m.boundary_edges.emplace(EdgeKey(oi[3], oi[4]), BoundaryTag::DirichletInflow);
  m.boundary_edges.emplace(EdgeKey(oi[4], oi[5]), BoundaryTag::DirichletInflow);
  m.boundary_edges.emplace(EdgeKey(oi[5], oi[6]), BoundaryTag::DirichletWall);
  m.boundary_edges.emplace(EdgeKey(oi[6], oi[7]), BoundaryTag::DirichletWall);

  const int nx = std::max(1, static_cast<int>(std::lround((ch.length - xb) / (0.5 * H))));
  std::vector<std::array<Index, 3>> column(nx + 1);
  column[0] = {oi[7], oi[0], oi[1]};
  for (int i = 1; i <= nx; ++i) {
    const double x = xb + (ch.length - xb) * i / nx;
    for (int j = 0; j < 3; ++j) column[i][j] = add_vertex(m, {x, std::array{0.0, c.y, H}[j]}, {});
  }
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < 2; ++j)
      m.elements.push_back({{column[i][j], column[i + 1][j], column[i + 1][j + 1], column[i][j + 1]}, 0, -1});
    m.boundary_edges.emplace(EdgeKey(column[i][0], column[i + 1][0]), BoundaryTag::DirichletWall);
    m.boundary_edges.emplace(EdgeKey(column[i][2], column[i + 1][2]), BoundaryTag::DirichletWall);
  }
  m.boundary_edges.emplace(EdgeKey(column[nx][0], column[nx][1]), BoundaryTag::NeumannOutflow);
  m.boundary_edges.emplace(EdgeKey(column[nx][1], column[nx][2]), BoundaryTag::NeumannOutflow);
  return m;
}

}  // namespace detail

inline QuadMesh build_macro_mesh(const MacroMeshSpec& spec) {
  spec.validate();
  QuadMesh m = std::holds_alternative<UnitSquare>(spec.geometry)
                   ? detail::unit_square_macro()
                   : detail::channel_macro(std::get<ChannelWithCylinder>(spec.geometry));
  for (int i = 0; i < spec.initial_uniform_levels; ++i) m = refine_uniform(m);
  return m;
}

/// Relation of a fine-level vertex to the next coarser level.
struct VertexParent {
  enum class Kind : std::uint8_t { Coincident, EdgeMidpoint, CellCenter };
  Kind kind = Kind::Coincident;
  std::array<Index, 4> vertices{-1, -1, -1, -1};  // coarse vertices used for interpolation
  Index element = -1;                             // coarse element for cell centers
};

struct GridHierarchy {
  std::vector<QuadMesh> levels;  // coarsest first
  /// element_parents[l][e]: parent of element e of level l in level l-1 (empty for l = 0).
  std::vector<std::vector<Index>> element_parents;
  std::vector<std::vector<VertexParent>> vertex_parents;

  std::size_t num_levels() const { return levels.size(); }
};

/// Parent relation of `fine` relative to `coarse`, where `fine` was produced
/// from `coarse` by a single refine_marked/refine_adaptive step.
inline std::vector<VertexParent> vertex_parents(const QuadMesh& coarse, const QuadMesh& fine) {
  std::vector<VertexParent> parents(fine.vertices.size());
  const Index nc = coarse.num_vertices();
  std::vector<Index> center_owner(fine.vertices.size(), -1);
  for (const auto& e : fine.elements)
    for (Index v : e.v)
      if (v >= nc && fine.origins[v].kind == VertexOrigin::Kind::CellCenter) center_owner[v] = e.parent;

  for (Index v = 0; v < fine.num_vertices(); ++v) {
    auto& p = parents[v];
    if (v < nc) {
      p.kind = VertexParent::Kind::Coincident;
      p.vertices[0] = v;
      continue;
    }
    const auto& o = fine.origins[v];
    if (o.kind == VertexOrigin::Kind::EdgeMidpoint) {
      p.kind = VertexParent::Kind::EdgeMidpoint;
      p.vertices = o.parents;
      if (o.parents[0] >= nc || o.parents[1] >= nc)
        throw MeshError("hierarchy corruption: midpoint vertex " + std::to_string(v) + " has non-coarse parents");
    } else if (o.kind == VertexOrigin::Kind::CellCenter) {
      p.kind = VertexParent::Kind::CellCenter;
      p.vertices = o.parents;
      p.element = center_owner[v];
      for (Index c : o.parents)
        if (c >= nc) throw MeshError("hierarchy corruption: center vertex " + std::to_string(v) + " has non-coarse corners");
    } else {
      throw MeshError("hierarchy corruption: vertex " + std::to_string(v) + " is not nested");
    }
  }
  return parents;
}

/// Level 0 is the macro mesh after the initial uniform refinements; each
/// further level applies one marker step with balance closure.
inline GridHierarchy build_hierarchy(const MacroMeshSpec& spec, const RefinementMarker& marker, int n_levels) {
  if (n_levels < 2) throw ConfigError("a hierarchy needs at least two levels");
  marker.validate();
  GridHierarchy h;
  h.levels.push_back(build_macro_mesh(spec));
  h.element_parents.emplace_back();
  h.vertex_parents.emplace_back();
  for (int l = 1; l < n_levels; ++l) {
    auto step = refine_adaptive(h.levels.back(), marker);
    if (!step.refined()) throw MeshError("marker produced no refinement at level " + std::to_string(l + 1));
    std::vector<Index> ep(step.mesh.elements.size());
    for (std::size_t e = 0; e < ep.size(); ++e) ep[e] = step.mesh.elements[e].parent;
    h.vertex_parents.push_back(vertex_parents(h.levels.back(), step.mesh));
    h.element_parents.push_back(std::move(ep));
    h.levels.push_back(std::move(step.mesh));
  }
  return h;
}

/// Signed area of the quadrilateral (positive when counter-clockwise).
inline double signed_area(const std::array<Point, 4>& c) {
  double a = 0.0;
  for (int k = 0; k < 4; ++k) a += cross(c[k], c[(k + 1) % 4]);
  return 0.5 * a;
}

/// Checks convexity/orientation of every element, edge balance and hanging
/// vertex placement. Returns an empty string when valid.
inline std::string check_mesh(const QuadMesh& mesh, double tol = 1e-12) {
  for (Index ei = 0; ei < mesh.num_elements(); ++ei) {
    const auto c = corners(mesh, mesh.elements[ei]);
    for (int k = 0; k < 4; ++k) {
      const Point e1 = c[(k + 1) % 4] - c[k];
      const Point e2 = c[(k + 2) % 4] - c[(k + 1) % 4];
      if (!(cross(e1, e2) > 0.0)) return "element " + std::to_string(ei) + " is not convex and counter-clockwise";
    }
  }
  const auto bad = balance_violations(mesh);
  if (auto it = std::find(bad.begin(), bad.end(), true); it != bad.end())
    return "element " + std::to_string(it - bad.begin()) + " violates 2:1 balance";
  const auto cyl = detail::cylinder_of(mesh.geometry);
  for (const auto& h : mesh.hanging_vertices) {
    const Point mid = 0.5 * (mesh.vertices[h.a] + mesh.vertices[h.b]);
    if (length(mid - mesh.vertices[h.vertex]) > tol * (1.0 + length(mid)))
      return "hanging vertex " + std::to_string(h.vertex) + " is off its parent edge midpoint";
  }
  if (cyl) {
    for (const auto& [edge, tag] : mesh.boundary_edges) {
      if (tag != BoundaryTag::Cylinder) continue;
      for (Index v : {edge.a, edge.b})
        if (std::abs(length(mesh.vertices[v] - cyl->center) - cyl->radius) > 1e-12)
          return "cylinder vertex " + std::to_string(v) + " is off the circle";
    }
  }
  return {};
}

}  // namespace vanka
