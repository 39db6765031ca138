#pragma once

// Stabilized equal-order Q1-Q1 Stokes discretization on quadtree meshes.
//
// Unknowns per vertex: (u_x, u_y, p). The global system
//
//   [ A   B ] [u]   [f]
//   [ B^T C ] [p] = [0]
//
// with A = (eta grad v, grad u), B = -(div v, p) and the pressure penalty
// C = -beta sum_e h_e^2 (grad q, grad p)_e. Hanging vertices, Dirichlet
// values and an optional pressure pin are eliminated by condensation.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "vanka/error.hpp"
#include "vanka/linalg.hpp"
#include "vanka/mesh.hpp"

namespace vanka {

inline constexpr int kFieldsPerVertex = 3;  // u_x, u_y, p

/// Raw (unconstrained) DoF id: three consecutive entries per vertex.
inline Index raw_dof(Index vertex, int component) { return kFieldsPerVertex * vertex + component; }

using VelocityField = std::function<std::array<double, 2>(Point)>;

struct BoundaryCondition {
  enum class Kind : std::uint8_t { Dirichlet, Neumann };
  Kind kind = Kind::Dirichlet;
  VelocityField velocity;  // Dirichlet data; Neumann data is homogeneous

  static BoundaryCondition no_slip() {
    return {Kind::Dirichlet, [](Point) { return std::array<double, 2>{0.0, 0.0}; }};
  }
  static BoundaryCondition dirichlet(VelocityField f) { return {Kind::Dirichlet, std::move(f)}; }
  static BoundaryCondition do_nothing() { return {Kind::Neumann, {}}; }
};

struct BoundaryConditions {
  std::map<BoundaryTag, BoundaryCondition> by_tag;
  /// Fix one pressure value (enclosed flows, where pressure is only defined up to a constant).
  bool pin_pressure = false;
  Index pin_vertex = 0;
  /// Let lid values win over wall values at shared corners.
  bool leaky_lid = false;

  static BoundaryConditions driven_cavity(double lid_velocity = 1.0) {
    BoundaryConditions bc;
    bc.by_tag[BoundaryTag::DirichletWall] = BoundaryCondition::no_slip();
    bc.by_tag[BoundaryTag::DirichletLid] = BoundaryCondition::dirichlet(
        [lid_velocity](Point) { return std::array<double, 2>{lid_velocity, 0.0}; });
    bc.pin_pressure = true;
    return bc;
  }
};

/// Parabolic inflow u_x(0,y) = 4 u y (H - y) / H^2.
inline double inflow_velocity(double y, double u_peak, double height) {
  return 4.0 * u_peak * y * (height - y) / (height * height);
}

inline BoundaryConditions apply_inflow_profile(BoundaryConditions bcs, double u_peak, double height) {
  if (!(u_peak > 0.0) || !(height > 0.0)) throw ConfigError("inflow profile needs positive velocity and height");
  bcs.by_tag[BoundaryTag::DirichletInflow] = BoundaryCondition::dirichlet([u_peak, height](Point p) {
    return std::array<double, 2>{inflow_velocity(p.y, u_peak, height), 0.0};
  });
  return bcs;
}

inline BoundaryConditions channel_flow(double u_peak, double height) {
  BoundaryConditions bc;
  bc.by_tag[BoundaryTag::DirichletWall] = BoundaryCondition::no_slip();
  bc.by_tag[BoundaryTag::Cylinder] = BoundaryCondition::no_slip();
  bc.by_tag[BoundaryTag::NeumannOutflow] = BoundaryCondition::do_nothing();
  return apply_inflow_profile(std::move(bc), u_peak, height);
}

struct StokesParameters {
  double eta = 1e-3;  // kinematic viscosity, m^2/s
  std::optional<double> beta;  // stabilization scale; defaults to 0.1 / eta

  double stabilization() const { return beta.value_or(0.1 / eta); }
};

enum class ConstraintKind : std::uint8_t { Dirichlet, HangingNode, PressurePin };

struct Constraint {
  Index dof;  // raw DoF
  ConstraintKind kind;
  std::vector<std::pair<Index, double>> masters;  // raw DoFs and weights
  double inhomogeneity = 0.0;
};

/// Affine constraints on raw DoFs. After close(), no constrained DoF appears
/// among the masters of another constraint.
class ConstraintSet {
 public:
  explicit ConstraintSet(Index n_raw = 0) : lookup_(n_raw, -1) {}

  void add(Constraint c) {
    if (c.dof < 0 || c.dof >= static_cast<Index>(lookup_.size())) throw DimensionError("constraint DoF out of range");
    if (lookup_[c.dof] >= 0) return;  // first constraint wins
    lookup_[c.dof] = static_cast<Index>(list_.size());
    list_.push_back(std::move(c));
  }

  bool is_constrained(Index raw) const { return lookup_[raw] >= 0; }
  const Constraint* find(Index raw) const { return lookup_[raw] >= 0 ? &list_[lookup_[raw]] : nullptr; }
  const std::vector<Constraint>& list() const { return list_; }
  Index raw_size() const { return static_cast<Index>(lookup_.size()); }

  void close() {
    for (auto& c : list_) {
      std::vector<Index> stack;
      resolve(c, stack);
    }
  }

 private:
  void resolve(Constraint& c, std::vector<Index>& stack) {
    if (std::find(stack.begin(), stack.end(), c.dof) != stack.end())
      throw AssemblyError("cyclic constraint chain at DoF " + std::to_string(c.dof));
    bool again = true;
    while (again) {
      again = false;
      std::map<Index, double> merged;
      double g = c.inhomogeneity;
      for (const auto& [m, w] : c.masters) {
        if (const Index k = lookup_[m]; k >= 0) {
          stack.push_back(c.dof);
          resolve(list_[k], stack);
          stack.pop_back();
          for (const auto& [mm, ww] : list_[k].masters) merged[mm] += w * ww;
          g += w * list_[k].inhomogeneity;
          again = true;
        } else {
          merged[m] += w;
        }
      }
      c.masters.assign(merged.begin(), merged.end());
      c.inhomogeneity = g;
    }
  }

  std::vector<Index> lookup_;
  std::vector<Constraint> list_;
};

/// Free DoF numbering: velocities first (vertex-major, x then y), then
/// pressures in vertex order. Constrained raw DoFs map to -1.
struct DofMap {
  std::vector<std::array<Index, 3>> vertex_dofs;
  std::vector<Index> free_to_raw;
  Index n_u = 0;
  Index n_p = 0;

  Index n() const { return n_u + n_p; }
  Index free_index(Index raw) const { return vertex_dofs[raw / kFieldsPerVertex][raw % kFieldsPerVertex]; }
  bool is_pressure(Index free) const { return free >= n_u; }
  Index vertex_of(Index free) const { return free_to_raw[free] / kFieldsPerVertex; }
};

inline DofMap build_dof_map(const QuadMesh& mesh, const ConstraintSet& constraints) {
  const Index nv = mesh.num_vertices();
  DofMap map;
  map.vertex_dofs.assign(nv, {-1, -1, -1});
  Index next = 0;
  for (Index v = 0; v < nv; ++v)
    for (int c = 0; c < 2; ++c)
      if (!constraints.is_constrained(raw_dof(v, c))) {
        map.vertex_dofs[v][c] = next++;
        map.free_to_raw.push_back(raw_dof(v, c));
      }
  map.n_u = next;
  for (Index v = 0; v < nv; ++v)
    if (!constraints.is_constrained(raw_dof(v, 2))) {
      map.vertex_dofs[v][2] = next++;
      map.free_to_raw.push_back(raw_dof(v, 2));
    }
  map.n_p = next - map.n_u;
  return map;
}

/// Hanging-vertex constraints (weights 1/2, 1/2 on every field).
inline ConstraintSet hanging_constraints(const QuadMesh& mesh) {
  ConstraintSet cs(kFieldsPerVertex * mesh.num_vertices());
  for (const auto& h : mesh.hanging_vertices)
    for (int c = 0; c < kFieldsPerVertex; ++c)
      cs.add({raw_dof(h.vertex, c), ConstraintKind::HangingNode, {{raw_dof(h.a, c), 0.5}, {raw_dof(h.b, c), 0.5}}, 0.0});
  cs.close();
  return cs;
}

inline DofMap build_dof_map(const QuadMesh& mesh) { return build_dof_map(mesh, hanging_constraints(mesh)); }

namespace detail {

// Dirichlet precedence at vertices shared by differently tagged edges.
inline std::vector<BoundaryTag> dirichlet_priority(bool leaky_lid) {
  if (leaky_lid)
    return {BoundaryTag::DirichletLid, BoundaryTag::DirichletWall, BoundaryTag::Cylinder, BoundaryTag::DirichletInflow};
  return {BoundaryTag::DirichletWall, BoundaryTag::Cylinder, BoundaryTag::DirichletInflow, BoundaryTag::DirichletLid};
}

}  // namespace detail

/// Hanging, Dirichlet and pin constraints for `mesh`, closed.
inline ConstraintSet build_constraints(const QuadMesh& mesh, const BoundaryConditions& bcs) {
  for (const auto& [edge, tag] : mesh.boundary_edges)
    if (!bcs.by_tag.contains(tag))
      throw AssemblyError(std::string("boundary edge with tag '") + to_string(tag) + "' has no boundary condition");

  ConstraintSet cs(kFieldsPerVertex * mesh.num_vertices());
  const auto tags = vertex_boundary_tags(mesh);
  const auto priority = detail::dirichlet_priority(bcs.leaky_lid);
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    if (!tags[v]) continue;
    for (BoundaryTag t : priority) {
      if (!has_tag(tags[v], t)) continue;
      const auto& bc = bcs.by_tag.at(t);
      if (bc.kind != BoundaryCondition::Kind::Dirichlet) continue;
      const auto value = bc.velocity(mesh.vertices[v]);
      for (int c = 0; c < 2; ++c) cs.add({raw_dof(v, c), ConstraintKind::Dirichlet, {}, value[c]});
      break;
    }
  }
  for (const auto& h : mesh.hanging_vertices)
    for (int c = 0; c < kFieldsPerVertex; ++c)
      cs.add({raw_dof(h.vertex, c), ConstraintKind::HangingNode, {{raw_dof(h.a, c), 0.5}, {raw_dof(h.b, c), 0.5}}, 0.0});
  if (bcs.pin_pressure) {
    if (bcs.pin_vertex < 0 || bcs.pin_vertex >= mesh.num_vertices()) throw ConfigError("pressure pin vertex out of range");
    if (cs.is_constrained(raw_dof(bcs.pin_vertex, 2))) throw ConfigError("pressure pin on a hanging vertex");
    cs.add({raw_dof(bcs.pin_vertex, 2), ConstraintKind::PressurePin, {}, 0.0});
  }
  cs.close();
  return cs;
}

/// Dense element blocks. Velocity ordering is (u_x at corners 0..3, u_y at corners 0..3).
struct ElementMatrices {
  std::array<std::array<double, 8>, 8> A{};
  std::array<std::array<double, 4>, 8> B{};
  std::array<std::array<double, 4>, 4> C{};
};

namespace detail {

inline constexpr std::array<double, 4> kCornerXi{-1.0, 1.0, 1.0, -1.0};
inline constexpr std::array<double, 4> kCornerEta{-1.0, -1.0, 1.0, 1.0};

struct QuadraturePoint {
  std::array<double, 4> phi;
  std::array<Point, 4> grad;  // physical gradients
  Point x;
  double weight;  // includes det J
};

/// Tensor Gauss rule with `order` points per direction (2 or 3), mapped isoparametrically.
inline std::vector<QuadraturePoint> quadrature(const std::array<Point, 4>& c, int order = 2) {
  std::vector<double> pts, wts;
  if (order == 2) {
    const double g = 1.0 / std::sqrt(3.0);
    pts = {-g, g};
    wts = {1.0, 1.0};
  } else if (order == 3) {
    const double g = std::sqrt(0.6);
    pts = {-g, 0.0, g};
    wts = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  } else {
    throw ConfigError("unsupported quadrature order");
  }
  std::vector<QuadraturePoint> out;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const double xi = pts[i], et = pts[j];
      QuadraturePoint q{};
      std::array<double, 4> dxi{}, det{};
      double j11 = 0, j12 = 0, j21 = 0, j22 = 0;
      for (int k = 0; k < 4; ++k) {
        q.phi[k] = 0.25 * (1 + kCornerXi[k] * xi) * (1 + kCornerEta[k] * et);
        dxi[k] = 0.25 * kCornerXi[k] * (1 + kCornerEta[k] * et);
        det[k] = 0.25 * kCornerEta[k] * (1 + kCornerXi[k] * xi);
        j11 += c[k].x * dxi[k];
        j12 += c[k].x * det[k];
        j21 += c[k].y * dxi[k];
        j22 += c[k].y * det[k];
        q.x = q.x + q.phi[k] * c[k];
      }
      const double detj = j11 * j22 - j12 * j21;
      if (!(detj > 0.0)) throw AssemblyError("non-positive Jacobian at a quadrature point");
      for (int k = 0; k < 4; ++k) {
        // grad = J^{-T} (dxi, deta)
        q.grad[k] = {(j22 * dxi[k] - j21 * det[k]) / detj, (-j12 * dxi[k] + j11 * det[k]) / detj};
      }
      q.weight = wts[i] * wts[j] * detj;
      out.push_back(q);
    }
  return out;
}

}  // namespace detail

inline ElementMatrices element_matrices(const std::array<Point, 4>& c, double eta, double beta) {
  ElementMatrices m;
  const double h = std::max(length(c[2] - c[0]), length(c[3] - c[1]));
  const double cscale = -beta * h * h;
  std::array<std::array<double, 4>, 4> K{};
  for (const auto& q : detail::quadrature(c)) {
    for (int a = 0; a < 4; ++a) {
      for (int b = a; b < 4; ++b)
        K[a][b] += q.weight * (q.grad[a].x * q.grad[b].x + q.grad[a].y * q.grad[b].y);
      for (int b = 0; b < 4; ++b) {
        m.B[a][b] -= q.weight * q.grad[a].x * q.phi[b];
        m.B[4 + a][b] -= q.weight * q.grad[a].y * q.phi[b];
      }
    }
  }
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < a; ++b) K[a][b] = K[b][a];
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      m.A[a][b] = eta * K[a][b];
      m.A[4 + a][4 + b] = eta * K[a][b];
      m.C[a][b] = cscale * K[a][b];
    }
  return m;
}

/// Symmetric 12x12 element matrix in local order (u_x 0..3, u_y 0..3, p 0..3).
inline std::array<std::array<double, 12>, 12> element_matrix_12(const ElementMatrices& m) {
  std::array<std::array<double, 12>, 12> K{};
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) K[a][b] = m.A[a][b];
    for (int b = 0; b < 4; ++b) {
      K[a][8 + b] = m.B[a][b];
      K[8 + b][a] = m.B[a][b];
    }
  }
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) K[8 + a][8 + b] = m.C[a][b];
  return K;
}

using BodyForce = std::function<std::array<double, 2>(Point)>;

struct SaddleSystem {
  SparseMatrix L;
  Vector b;
  DofMap dofs;
  ConstraintSet constraints;
  double eta = 0.0;
  double beta = 0.0;

  Index n() const { return dofs.n(); }
};

namespace detail {

/// Raw DoF expressed through free DoFs: u_raw = sum w_k x_{free_k} + g.
struct Expansion {
  std::vector<std::pair<Index, double>> terms;
  double g = 0.0;
};

inline std::vector<Expansion> expansions(const DofMap& dofs, const ConstraintSet& cs) {
  std::vector<Expansion> out(cs.raw_size());
  for (Index r = 0; r < cs.raw_size(); ++r) {
    if (const auto* c = cs.find(r)) {
      for (const auto& [m, w] : c->masters) {
        const Index f = dofs.free_index(m);
        if (f < 0) throw AssemblyError("unresolved constraint master");
        out[r].terms.emplace_back(f, w);
      }
      out[r].g = c->inhomogeneity;
    } else {
      out[r].terms.emplace_back(dofs.free_index(r), 1.0);
    }
  }
  return out;
}

inline std::array<Index, 12> local_raw_dofs(const QuadElement& e) {
  std::array<Index, 12> r{};
  for (int k = 0; k < 4; ++k) {
    r[k] = raw_dof(e.v[k], 0);
    r[4 + k] = raw_dof(e.v[k], 1);
    r[8 + k] = raw_dof(e.v[k], 2);
  }
  return r;
}

inline std::array<double, 12> element_load(const std::array<Point, 4>& c, const BodyForce& f) {
  std::array<double, 12> F{};
  if (!f) return F;
  for (const auto& q : quadrature(c)) {
    const auto fx = f(q.x);
    for (int k = 0; k < 4; ++k) {
      F[k] += q.weight * fx[0] * q.phi[k];
      F[4 + k] += q.weight * fx[1] * q.phi[k];
    }
  }
  return F;
}

// Assembles the condensed operator (upper triangle mirrored, so the stored
// matrix is exactly symmetric) and/or the right-hand side.
inline void assemble(const QuadMesh& mesh, const DofMap& dofs, const ConstraintSet& cs, double eta, double beta,
                     const BodyForce& f, SparseMatrix* L, Vector* b) {
  const auto exp = expansions(dofs, cs);
  std::vector<SparseMatrix::Triplet> upper;
  if (L) upper.reserve(mesh.elements.size() * 100);
  if (b) b->assign(dofs.n(), 0.0);
  for (const auto& e : mesh.elements) {
    const auto c = corners(mesh, e);
    const auto K = element_matrix_12(element_matrices(c, eta, beta));
    const auto raw = local_raw_dofs(e);
    if (L) {
      for (int a = 0; a < 12; ++a)
        for (const auto& [ra, wa] : exp[raw[a]].terms)
          for (int bb = 0; bb < 12; ++bb)
            for (const auto& [rb, wb] : exp[raw[bb]].terms)
              if (ra <= rb) upper.push_back({ra, rb, wa * wb * K[a][bb]});
    }
    if (b) {
      const auto F = element_load(c, f);
      for (int a = 0; a < 12; ++a) {
        double local = F[a];
        for (int bb = 0; bb < 12; ++bb) local -= K[a][bb] * exp[raw[bb]].g;
        if (local == 0.0) continue;
        for (const auto& [ra, wa] : exp[raw[a]].terms) (*b)[ra] += wa * local;
      }
    }
  }
  if (L) {
    const auto U = SparseMatrix::from_triplets(dofs.n(), dofs.n(), std::move(upper));
    std::vector<SparseMatrix::Triplet> full;
    full.reserve(2 * U.nonzeros());
    for (Index i = 0; i < U.rows(); ++i) {
      const auto cols = U.row_cols(i);
      const auto vals = U.row_values(i);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        full.push_back({i, cols[k], vals[k]});
        if (cols[k] != i) full.push_back({cols[k], i, vals[k]});
      }
    }
    *L = SparseMatrix::from_triplets(dofs.n(), dofs.n(), std::move(full));
  }
}

inline void check_parameters(double eta, double beta) {
  if (!(eta > 0.0)) throw AssemblyError("viscosity must be positive");
  if (!(beta > 0.0)) throw AssemblyError("stabilization beta must be positive");
}

}  // namespace detail

inline SaddleSystem assemble_system(const QuadMesh& mesh, const BoundaryConditions& bcs,
                                    const StokesParameters& params, const BodyForce& f = {}) {
  const double eta = params.eta, beta = params.stabilization();
  detail::check_parameters(eta, beta);
  SaddleSystem s{{}, {}, {}, build_constraints(mesh, bcs), eta, beta};
  s.dofs = build_dof_map(mesh, s.constraints);
  detail::assemble(mesh, s.dofs, s.constraints, eta, beta, f, &s.L, &s.b);
  return s;
}

/// Load vector including Dirichlet lifts, in the free numbering of assemble_system.
inline Vector assemble_rhs(const QuadMesh& mesh, const BoundaryConditions& bcs, const StokesParameters& params,
                           const BodyForce& f = {}) {
  const double eta = params.eta, beta = params.stabilization();
  detail::check_parameters(eta, beta);
  const auto cs = build_constraints(mesh, bcs);
  const auto dofs = build_dof_map(mesh, cs);
  Vector b;
  detail::assemble(mesh, dofs, cs, eta, beta, f, nullptr, &b);
  return b;
}

/// Nodal (u_x, u_y, p) values for every vertex, constraints applied.
inline std::vector<std::array<double, 3>> expand_solution(const SaddleSystem& s, std::span<const double> x) {
  if (static_cast<Index>(x.size()) != s.n()) throw DimensionError("expand_solution: size mismatch");
  const auto exp = detail::expansions(s.dofs, s.constraints);
  std::vector<std::array<double, 3>> out(exp.size() / kFieldsPerVertex);
  for (std::size_t r = 0; r < exp.size(); ++r) {
    double v = exp[r].g;
    for (const auto& [f, w] : exp[r].terms) v += w * x[f];
    out[r / kFieldsPerVertex][r % kFieldsPerVertex] = v;
  }
  return out;
}

/// Shifts nodal pressure to zero mean over the domain.
inline void shift_pressure_to_zero_mean(const QuadMesh& mesh, std::vector<std::array<double, 3>>& nodal) {
  double integral = 0.0, area = 0.0;
  for (const auto& e : mesh.elements)
    for (const auto& q : detail::quadrature(corners(mesh, e))) {
      double p = 0.0;
      for (int k = 0; k < 4; ++k) p += q.phi[k] * nodal[e.v[k]][2];
      integral += q.weight * p;
      area += q.weight;
    }
  const double mean = integral / area;
  for (auto& n : nodal) n[2] -= mean;
}

/// L2 norm of (u_h - u_exact) using a 3x3 Gauss rule.
inline double velocity_l2_error(const QuadMesh& mesh, const std::vector<std::array<double, 3>>& nodal,
                                const VelocityField& exact) {
  double sum = 0.0;
  for (const auto& e : mesh.elements)
    for (const auto& q : detail::quadrature(corners(mesh, e), 3)) {
      double ux = 0.0, uy = 0.0;
      for (int k = 0; k < 4; ++k) {
        ux += q.phi[k] * nodal[e.v[k]][0];
        uy += q.phi[k] * nodal[e.v[k]][1];
      }
      const auto u = exact(q.x);
      sum += q.weight * ((ux - u[0]) * (ux - u[0]) + (uy - u[1]) * (uy - u[1]));
    }
  return std::sqrt(sum);
}

}  // namespace vanka
