#pragma once

// Geometric multigrid on a nested quadtree hierarchy: Q1 transfer operators
// with constraints folded in, rediscretized level operators, dense LU on the
// coarsest level and V-cycles driven as a stationary iteration.

#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "vanka/discretization.hpp"
#include "vanka/error.hpp"
#include "vanka/linalg.hpp"
#include "vanka/mesh.hpp"
#include "vanka/smoothers.hpp"

namespace vanka {

struct TransferOperator {
  SparseMatrix prolongation;  // fine free x coarse free
  SparseMatrix restriction;   // exact transpose of prolongation
};

/// Q1 interpolation from `coarse` to `fine`, expressed on free DoFs. Coarse
/// constrained DoFs are expanded through their (homogeneous) constraints.
inline TransferOperator build_transfer(const SaddleSystem& coarse, const SaddleSystem& fine,
                                       const std::vector<VertexParent>& parents) {
  const auto coarse_exp = detail::expansions(coarse.dofs, coarse.constraints);
  const Index n_coarse_vertices = coarse.constraints.raw_size() / kFieldsPerVertex;
  std::vector<SparseMatrix::Triplet> t;
  for (Index f = 0; f < fine.n(); ++f) {
    const Index raw = fine.dofs.free_to_raw[f];
    const Index v = raw / kFieldsPerVertex;
    const int comp = raw % kFieldsPerVertex;
    if (v >= static_cast<Index>(parents.size())) throw MeshError("hierarchy corruption: vertex without parent data");
    const auto& p = parents[v];
    std::vector<std::pair<Index, double>> stencil;
    switch (p.kind) {
      case VertexParent::Kind::Coincident: stencil = {{p.vertices[0], 1.0}}; break;
      case VertexParent::Kind::EdgeMidpoint: stencil = {{p.vertices[0], 0.5}, {p.vertices[1], 0.5}}; break;
      case VertexParent::Kind::CellCenter:
        for (Index c : p.vertices) stencil.emplace_back(c, 0.25);
        break;
    }
    std::map<Index, double> row;
    for (const auto& [cv, w] : stencil) {
      if (cv < 0 || cv >= n_coarse_vertices) throw MeshError("hierarchy corruption: non-nested vertex " + std::to_string(v));
      for (const auto& [cf, cw] : coarse_exp[raw_dof(cv, comp)].terms) row[cf] += w * cw;
    }
    for (const auto& [cf, w] : row)
      if (w != 0.0) t.push_back({f, cf, w});
  }
  TransferOperator op;
  op.prolongation = SparseMatrix::from_triplets(fine.n(), coarse.n(), std::move(t));
  op.restriction = op.prolongation.transposed();
  return op;
}

/// Dense LU of the coarsest operator. When `pin` is set the operator is
/// singular up to a constant pressure and that DoF is fixed to zero inside
/// the factorization only.
struct CoarseSolver {
  DenseLU lu;
  std::optional<Index> pin;

  Vector solve(std::span<const double> rhs) const {
    if (!pin) return lu_solve(lu, rhs);
    Vector r(rhs.begin(), rhs.end());
    r[*pin] = 0.0;
    return lu_solve(lu, r);
  }
};

inline CoarseSolver factorize_coarse(const SaddleSystem& coarse, std::optional<Index> pin = std::nullopt) {
  auto dense = coarse.L.to_dense();
  if (pin) {
    for (Index j = 0; j < dense.cols(); ++j) dense(*pin, j) = 0.0;
    for (Index i = 0; i < dense.rows(); ++i) dense(i, *pin) = 0.0;
    dense(*pin, *pin) = 1.0;
  }
  try {
    return {lu_factor(std::move(dense), -1), pin};
  } catch (const SingularLocalSystem&) {
    throw ConfigError("singular coarse-grid matrix (missing pressure pin?)");
  }
}

/// Solves the coarsest system.
inline Vector coarse_solve(const CoarseSolver& solver, std::span<const double> rhs) { return solver.solve(rhs); }

/// How an enclosed flow's constant-pressure nullspace is handled.
enum class PressureNullspace : std::uint8_t {
  PinAllLevels,    // PressurePin constraint assembled on every level
  PinCoarseOnly,   // levels keep the nullspace; only the coarse LU fixes one pressure
};

/// Assembled systems and transfers for every level, plus the coarse LU.
struct DiscreteHierarchy {
  std::vector<SaddleSystem> systems;         // coarsest first
  std::vector<TransferOperator> transfers;   // transfers[l]: level l-1 -> l; transfers[0] unused
  std::shared_ptr<const CoarseSolver> coarse;
  std::vector<Index> elements;               // per level
  std::vector<Index> vertices;               // per level
  std::vector<double> assembly_seconds;      // per level
  std::vector<double> transfer_seconds;      // per level
  double coarse_lu_seconds = 0.0;

  std::size_t num_levels() const { return systems.size(); }

  /// Setup wall time attributable to a solve that uses levels [0, depth).
  double setup_seconds(std::size_t depth) const {
    double t = coarse_lu_seconds;
    for (std::size_t l = 0; l < depth; ++l) t += assembly_seconds[l] + transfer_seconds[l];
    return t;
  }
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

inline DiscreteHierarchy discretize(const GridHierarchy& grids, const BoundaryConditions& bcs_in,
                                    const StokesParameters& params, const BodyForce& f = {},
                                    PressureNullspace nullspace = PressureNullspace::PinAllLevels) {
  DiscreteHierarchy h;
  BoundaryConditions bcs = bcs_in;
  const bool coarse_pin = bcs.pin_pressure && nullspace == PressureNullspace::PinCoarseOnly;
  if (coarse_pin) bcs.pin_pressure = false;
  for (std::size_t l = 0; l < grids.num_levels(); ++l) {
    const auto& mesh = grids.levels[l];
    auto t0 = std::chrono::steady_clock::now();
    h.systems.push_back(assemble_system(mesh, bcs, params, f));
    h.assembly_seconds.push_back(detail::seconds_since(t0));
    h.elements.push_back(mesh.num_elements());
    h.vertices.push_back(mesh.num_vertices());
    t0 = std::chrono::steady_clock::now();
    if (l == 0)
      h.transfers.emplace_back();
    else
      h.transfers.push_back(build_transfer(h.systems[l - 1], h.systems[l], grids.vertex_parents[l]));
    h.transfer_seconds.push_back(detail::seconds_since(t0));
  }
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<Index> pin;
  if (coarse_pin) pin = h.systems.front().dofs.vertex_dofs.at(bcs.pin_vertex)[2];
  h.coarse = std::make_shared<const CoarseSolver>(factorize_coarse(h.systems.front(), pin));
  h.coarse_lu_seconds = detail::seconds_since(t0);
  return h;
}

struct MultigridConfig {
  int n_pre = 3;
  int n_post = 3;
  SmootherConfig smoother = SmootherConfig::defaults(SmootherVariant::MV);
  double reduction_target = 1e-8;
  int max_iterations = 500;
  /// Abort once the residual grows beyond this factor of the initial one.
  double divergence_factor = 1e10;

  void validate() const {
    if (n_pre < 0 || n_post < 0) throw ConfigError("smoothing step counts must be non-negative");
    if (!(reduction_target > 0.0 && reduction_target < 1.0)) throw ConfigError("reduction target must lie in (0,1)");
    if (max_iterations < 0) throw ConfigError("max_iterations must be non-negative");
    smoother.validate();
  }
};

struct SolveReport {
  int iterations = 0;
  std::vector<double> residual_history;
  bool converged = false;
  bool diverged = false;
  std::optional<double> reduction_factor;  // (|r_k| / |r_0|)^(1/k)
  double setup_seconds = 0.0;
  double per_iteration_seconds = 0.0;
  double total_seconds = 0.0;
  std::vector<Index> level_dofs;
  std::vector<Index> level_elements;
  SmootherConfig smoother;
  int n_pre = 0;
  int n_post = 0;
};

struct SolveMetrics {
  std::optional<double> reduction_factor;
  double per_iteration_seconds = 0.0;
};

/// Geometric-mean reduction factor and mean iteration time. Undefined for k = 0.
inline SolveMetrics compute_metrics(std::span<const double> residual_history, double setup_seconds,
                                    double total_seconds) {
  SolveMetrics m;
  if (residual_history.size() < 2) return m;
  const auto k = static_cast<double>(residual_history.size() - 1);
  const double r0 = residual_history.front(), rk = residual_history.back();
  m.reduction_factor = r0 > 0.0 ? std::pow(rk / r0, 1.0 / k) : 0.0;
  m.per_iteration_seconds = (total_seconds - setup_seconds) / k;
  return m;
}

/// V-cycle multigrid over levels [0, depth) of a discrete hierarchy.
class Multigrid {
 public:
  Multigrid(const DiscreteHierarchy& hierarchy, std::size_t depth, MultigridConfig cfg)
      : h_(&hierarchy), depth_(depth), cfg_(cfg) {
    cfg_.validate();
    if (depth_ < 1 || depth_ > hierarchy.num_levels()) throw ConfigError("multigrid depth out of range");
    if (!hierarchy.coarse) throw ConfigError("hierarchy has no coarse factorization");
    const auto t0 = std::chrono::steady_clock::now();
    smoothers_.emplace_back();  // no smoothing on the coarsest level
    for (std::size_t l = 1; l < depth_; ++l)
      smoothers_.push_back(std::make_unique<VankaSmoother>(hierarchy.systems[l], cfg_.smoother));
    smoother_setup_seconds_ = detail::seconds_since(t0);
  }

  const SaddleSystem& finest() const { return h_->systems[depth_ - 1]; }
  const MultigridConfig& config() const { return cfg_; }
  double smoother_setup_seconds() const { return smoother_setup_seconds_; }
  const VankaSmoother& smoother(std::size_t level) const { return *smoothers_.at(level); }
  FlopCounter& flops() { return flops_; }

  void v_cycle(std::size_t level, Vector& x, std::span<const double> b) {
    if (level == 0) {
      x = coarse_solve(*h_->coarse, b);
      return;
    }
    const auto& sys = h_->systems[level];
    const auto& smoother = *smoothers_[level];
    for (int i = 0; i < cfg_.n_pre; ++i) smoother.apply(x, b, &flops_);
    const auto r = residual(sys.L, x, b);
    const auto& transfer = h_->transfers[level];
    const auto rc = spmv(transfer.restriction, r);
    Vector ec(rc.size(), 0.0);
    v_cycle(level - 1, ec, rc);
    const auto correction = spmv(transfer.prolongation, ec);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += correction[i];
    for (int i = 0; i < cfg_.n_post; ++i) smoother.apply(x, b, &flops_);
  }

  /// Stationary iteration x <- x + V(b - L x) from x = 0 until the residual
  /// drops by `reduction_target` or the iteration budget is spent.
  Vector solve(std::span<const double> b, SolveReport& report, double extra_setup_seconds = 0.0) {
    const auto& sys = finest();
    if (static_cast<Index>(b.size()) != sys.n()) throw DimensionError("multigrid solve: rhs size mismatch");
    const auto t0 = std::chrono::steady_clock::now();
    Vector x(sys.n(), 0.0);
    report = {};
    report.smoother = cfg_.smoother;
    report.n_pre = cfg_.n_pre;
    report.n_post = cfg_.n_post;
    for (std::size_t l = 0; l < depth_; ++l) {
      report.level_dofs.push_back(h_->systems[l].n());
      report.level_elements.push_back(l < h_->elements.size() ? h_->elements[l] : 0);
    }
    const double r0 = norm2(b);
    report.residual_history.push_back(r0);
    double rk = r0;
    while (true) {
      if (rk <= cfg_.reduction_target * r0) {
        report.converged = true;
        break;
      }
      if (!std::isfinite(rk) || rk > cfg_.divergence_factor * r0) {
        report.diverged = true;
        break;
      }
      if (report.iterations >= cfg_.max_iterations) break;
      v_cycle(depth_ - 1, x, b);
      rk = norm2(residual(sys.L, x, b));
      report.residual_history.push_back(rk);
      ++report.iterations;
    }
    const double iter_seconds = detail::seconds_since(t0);
    report.setup_seconds = extra_setup_seconds + smoother_setup_seconds_;
    report.total_seconds = report.setup_seconds + iter_seconds;
    const auto m = compute_metrics(report.residual_history, report.setup_seconds, report.total_seconds);
    report.reduction_factor = m.reduction_factor;
    report.per_iteration_seconds = m.per_iteration_seconds;
    return x;
  }

  Vector solve(SolveReport& report, double extra_setup_seconds = 0.0) {
    return solve(finest().b, report, extra_setup_seconds);
  }

 private:
  const DiscreteHierarchy* h_;
  std::size_t depth_;
  MultigridConfig cfg_;
  std::vector<std::unique_ptr<VankaSmoother>> smoothers_;
  double smoother_setup_seconds_ = 0.0;
  FlopCounter flops_;
};

}  // namespace vanka
