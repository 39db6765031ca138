#pragma once

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "vanka/vanka.hpp"

namespace vanka::testing {

/// n x n structured cavity on the unit square (lid on top).
inline QuadMesh structured_cavity(int n) {
  QuadMesh m;
  m.geometry = UnitSquare{};
  auto id = [n](int i, int j) { return static_cast<Index>(j * (n + 1) + i); };
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) detail::add_vertex(m, {double(i) / n, double(j) / n}, {});
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m.elements.push_back({{id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)}, 0, -1});
  for (int i = 0; i < n; ++i) {
    m.boundary_edges[EdgeKey(id(i, 0), id(i + 1, 0))] = BoundaryTag::DirichletWall;
    m.boundary_edges[EdgeKey(id(i, n), id(i + 1, n))] = BoundaryTag::DirichletLid;
    m.boundary_edges[EdgeKey(id(0, i), id(0, i + 1))] = BoundaryTag::DirichletWall;
    m.boundary_edges[EdgeKey(id(n, i), id(n, i + 1))] = BoundaryTag::DirichletWall;
  }
  return m;
}

/// Uniform cavity with one corner element refined once more (hanging nodes).
inline QuadMesh cavity_with_hanging_nodes(int initial_levels = 1) {
  MacroMeshSpec spec;
  spec.initial_uniform_levels = initial_levels;
  auto m = build_macro_mesh(spec);
  std::vector<bool> marks(m.elements.size(), false);
  marks[0] = true;
  return refine_marked(m, marks);
}

inline Vector random_vector(Index n, unsigned seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Vector v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

inline Eigen::MatrixXd to_eigen(const SparseMatrix& m) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    const auto c = m.row_cols(i);
    const auto v = m.row_values(i);
    for (std::size_t k = 0; k < c.size(); ++k) out(i, c[k]) += v[k];
  }
  return out;
}

inline Eigen::SparseMatrix<double> to_eigen_sparse(const SparseMatrix& m) {
  std::vector<Eigen::Triplet<double>> t;
  for (Index i = 0; i < m.rows(); ++i) {
    const auto c = m.row_cols(i);
    const auto v = m.row_values(i);
    for (std::size_t k = 0; k < c.size(); ++k) t.emplace_back(i, c[k], v[k]);
  }
  Eigen::SparseMatrix<double> out(m.rows(), m.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

inline Vector from_eigen(const Eigen::VectorXd& v) { return Vector(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd to_eigen(const Vector& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

/// Direct sparse solve of a nonsingular system.
inline Vector direct_solve(const SparseMatrix& L, const Vector& b) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(to_eigen_sparse(L));
  return from_eigen(lu.solve(to_eigen(b)));
}

inline constexpr double kPi = 3.14159265358979323846;

/// u = (sin(pi x) sin(pi y), cos(pi x) cos(pi y)), p = sin(pi x) - 2/pi.
inline std::array<double, 2> mms_velocity(Point p) {
  return {std::sin(kPi * p.x) * std::sin(kPi * p.y), std::cos(kPi * p.x) * std::cos(kPi * p.y)};
}

inline BodyForce mms_force(double eta) {
  return [eta](Point p) {
    return std::array<double, 2>{2.0 * eta * kPi * kPi * std::sin(kPi * p.x) * std::sin(kPi * p.y) + kPi * std::cos(kPi * p.x),
                                 2.0 * eta * kPi * kPi * std::cos(kPi * p.x) * std::cos(kPi * p.y)};
  };
}

inline BoundaryConditions mms_conditions() {
  BoundaryConditions bcs;
  bcs.by_tag[BoundaryTag::DirichletWall] = BoundaryCondition::dirichlet(mms_velocity);
  bcs.by_tag[BoundaryTag::DirichletLid] = BoundaryCondition::dirichlet(mms_velocity);
  bcs.pin_pressure = true;
  return bcs;
}

/// Velocity L2 errors of the direct solution on `levels` successive uniform refinements.
inline std::vector<double> mms_errors(int initial_levels, int levels, double eta = 1e-3) {
  MacroMeshSpec spec;
  spec.initial_uniform_levels = initial_levels;
  auto mesh = build_macro_mesh(spec);
  StokesParameters params;
  params.eta = eta;
  std::vector<double> out;
  for (int l = 0; l < levels; ++l) {
    const auto s = assemble_system(mesh, mms_conditions(), params, mms_force(eta));
    const auto nodal = expand_solution(s, direct_solve(s.L, s.b));
    out.push_back(velocity_l2_error(mesh, nodal, mms_velocity));
    mesh = refine_uniform(mesh);
  }
  return out;
}

/// Free velocity DoFs of all vertices sharing an element with vertex v, then p(v).
inline std::vector<Index> geometric_patch(const QuadMesh& mesh, const DofMap& dofs, Index v) {
  std::vector<Index> out;
  for (const auto& e : mesh.elements) {
    if (std::find(e.v.begin(), e.v.end(), v) == e.v.end()) continue;
    for (Index w : e.v)
      for (int c = 0; c < 2; ++c)
        if (dofs.vertex_dofs[w][c] >= 0) out.push_back(dofs.vertex_dofs[w][c]);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  out.push_back(dofs.vertex_dofs[v][2]);
  return out;
}

/// Explicit restriction matrices of one subdomain: R (patch x n) and the
/// truncated R~ (rows outside the center vertex zeroed).
struct DenseSubdomain {
  Eigen::MatrixXd R;
  Eigen::MatrixXd Rt;
};

inline std::vector<DenseSubdomain> dense_subdomains(const QuadMesh& mesh, const SaddleSystem& s) {
  std::vector<DenseSubdomain> out;
  const auto& dm = s.dofs;
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    if (dm.vertex_dofs[v][2] < 0) continue;
    const auto patch = geometric_patch(mesh, dm, v);
    DenseSubdomain d{Eigen::MatrixXd::Zero(patch.size(), s.n()), Eigen::MatrixXd::Zero(patch.size(), s.n())};
    for (std::size_t k = 0; k < patch.size(); ++k) {
      d.R(k, patch[k]) = 1.0;
      if (dm.vertex_of(patch[k]) == v) d.Rt(k, patch[k]) = 1.0;
    }
    out.push_back(std::move(d));
  }
  return out;
}

inline Eigen::VectorXd oracle_step(const Eigen::MatrixXd& L, const std::vector<DenseSubdomain>& sds, const Eigen::VectorXd& x0,
                     const Eigen::VectorXd& b, double w, SmootherVariant v) {
  Eigen::VectorXd x = x0;
  if (v == SmootherVariant::MV) {
    for (const auto& d : sds) {
      const Eigen::MatrixXd Li = d.R * L * d.R.transpose();
      x += w * d.R.transpose() * Li.fullPivLu().solve(d.R * (b - L * x));
    }
    return x;
  }
  const Eigen::VectorXd r = b - L * x0;
  for (const auto& d : sds) {
    const Eigen::MatrixXd Li = d.R * L * d.R.transpose();
    const Eigen::MatrixXd& W = v == SmootherVariant::AV ? d.R : d.Rt;
    x += w * W.transpose() * Li.fullPivLu().solve(d.R * r);
  }
  return x;
}

}  // namespace vanka::testing
