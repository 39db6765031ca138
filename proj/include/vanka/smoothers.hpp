#pragma once

// Pressure-centered Vanka subdomains and the three smoother variants:
//
//   MV   x <- x + w R_i^T L_i^{-1} R_i (b - L x)   sequentially over subdomains
//   AV   x <- x + sum_i w R_i^T L_i^{-1} R_i r,      r = b - L x computed once
//   RAV  x <- x + sum_i w Rt_i^T L_i^{-1} R_i r,     Rt_i keeps only the center DoFs
//
// Each subdomain holds one free pressure DoF and every free velocity DoF
// coupled to it through B^T. For RAV only the rows of L_i^{-1} that belong to
// the center vertex are stored.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vanka/discretization.hpp"
#include "vanka/error.hpp"
#include "vanka/linalg.hpp"

namespace vanka {

enum class SmootherVariant : std::uint8_t { MV, AV, RAV };

inline const char* to_string(SmootherVariant v) {
  switch (v) {
    case SmootherVariant::MV: return "mv";
    case SmootherVariant::AV: return "av";
    case SmootherVariant::RAV: return "rav";
  }
  return "?";
}

inline SmootherVariant parse_smoother(const std::string& s) {
  if (s == "mv" || s == "MV") return SmootherVariant::MV;
  if (s == "av" || s == "AV") return SmootherVariant::AV;
  if (s == "rav" || s == "RAV") return SmootherVariant::RAV;
  throw ConfigError("unknown smoother '" + s + "' (expected mv, av or rav)");
}

enum class SweepOrder : std::uint8_t { Ascending, Descending };

struct SmootherConfig {
  SmootherVariant variant = SmootherVariant::MV;
  double damping = 0.66;
  SweepOrder sweep_order = SweepOrder::Ascending;

  /// Damping 0.1 for AV, 0.66 for MV and RAV.
  static double default_damping(SmootherVariant v) { return v == SmootherVariant::AV ? 0.1 : 0.66; }
  static SmootherConfig defaults(SmootherVariant v) { return {v, default_damping(v), SweepOrder::Ascending}; }

  void validate() const {
    if (!(damping > 0.0 && damping < 2.0)) throw ConfigError("smoother damping must lie in (0,2)");
  }
};

struct VankaSubdomain {
  Index id = 0;
  Index center_pressure = 0;           // free index of p_i
  std::vector<Index> dofs;             // coupled velocity DoFs (ascending), then p_i
  std::vector<Index> restricted_dofs;  // free DoFs at the center vertex (u_x, u_y, p)
  std::vector<Index> restricted_local; // positions of restricted_dofs within dofs
  std::optional<DenseLU> lu;           // MV and AV
  DenseMatrix inverse_rows;            // RAV: rows of L_i^{-1} for restricted_local

  Index size() const { return static_cast<Index>(dofs.size()); }
};

/// Work counters for smoother applications (multiply-add pairs counted as two flops).
struct FlopCounter {
  std::uint64_t subdomain_flops = 0;  // local solves / inverse-row products
  std::uint64_t residual_flops = 0;   // global or local residual evaluation
  std::uint64_t subdomain_applications = 0;

  void reset() { *this = {}; }
};

/// One subdomain per free pressure DoF, from the sparsity of its row of L.
inline std::vector<VankaSubdomain> build_subdomains(const SaddleSystem& s) {
  const auto& L = s.L;
  const auto& dm = s.dofs;
  std::vector<VankaSubdomain> out;
  out.reserve(dm.n_p);
  for (Index p = dm.n_u; p < dm.n(); ++p) {
    VankaSubdomain sd;
    sd.id = static_cast<Index>(out.size());
    sd.center_pressure = p;
    for (Index c : L.row_cols(p))
      if (c < dm.n_u) sd.dofs.push_back(c);
    if (sd.dofs.empty() && L.coeff(p, p) == 0.0)
      throw AssemblyError("isolated pressure DoF " + std::to_string(p) + " has an empty Vanka patch");
    sd.dofs.push_back(p);

    const Index v = dm.vertex_of(p);
    for (int c = 0; c < 2; ++c) {
      const Index u = dm.vertex_dofs[v][c];
      if (u < 0) continue;
      const auto it = std::lower_bound(sd.dofs.begin(), sd.dofs.end() - 1, u);
      if (it == sd.dofs.end() - 1 || *it != u) continue;
      sd.restricted_dofs.push_back(u);
      sd.restricted_local.push_back(static_cast<Index>(it - sd.dofs.begin()));
    }
    sd.restricted_dofs.push_back(p);
    sd.restricted_local.push_back(sd.size() - 1);
    out.push_back(std::move(sd));
  }
  return out;
}

/// MV/AV keep the LU of L_i; RAV keeps only the center rows of L_i^{-1},
/// obtained from transposed solves L_i^T y = e_j.
inline void factorize_subdomains(const SaddleSystem& s, std::vector<VankaSubdomain>& subdomains,
                                 SmootherVariant variant) {
  for (auto& sd : subdomains) {
    auto lu = lu_factor(extract_submatrix(s.L, sd.dofs, sd.dofs), sd.id);
    if (variant == SmootherVariant::RAV) {
      const Index n = sd.size();
      sd.inverse_rows = DenseMatrix(static_cast<Index>(sd.restricted_local.size()), n);
      Vector e(n, 0.0);
      for (std::size_t j = 0; j < sd.restricted_local.size(); ++j) {
        e[sd.restricted_local[j]] = 1.0;
        const auto row = lu_solve_transposed(lu, e);
        e[sd.restricted_local[j]] = 0.0;
        std::copy(row.begin(), row.end(), sd.inverse_rows.row(static_cast<Index>(j)).begin());
      }
      sd.lu.reset();
    } else {
      sd.lu = std::move(lu);
      sd.inverse_rows = {};
    }
  }
}

namespace detail {

inline void check_sizes(const SaddleSystem& s, const Vector& x, std::span<const double> b) {
  if (static_cast<Index>(x.size()) != s.n() || static_cast<Index>(b.size()) != s.n())
    throw DimensionError("smoother: vector size mismatch");
}

inline std::uint64_t solve_flops(Index n) { return 2ull * static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n); }

}  // namespace detail

inline void smooth_multiplicative(const SaddleSystem& s, const std::vector<VankaSubdomain>& subdomains, Vector& x,
                                  std::span<const double> b, double omega,
                                  SweepOrder order = SweepOrder::Ascending, FlopCounter* flops = nullptr) {
  detail::check_sizes(s, x, b);
  Vector local;
  auto apply = [&](const VankaSubdomain& sd) {
    if (!sd.lu) throw ConfigError("multiplicative smoother needs LU-factorized subdomains");
    local.resize(sd.dofs.size());
    std::uint64_t rflops = 0;
    for (std::size_t k = 0; k < sd.dofs.size(); ++k) {
      const Index row = sd.dofs[k];
      local[k] = b[row] - s.L.row_dot(row, x);
      rflops += 2 * s.L.row_cols(row).size();
    }
    const auto d = lu_solve(*sd.lu, local);
    for (std::size_t k = 0; k < sd.dofs.size(); ++k) x[sd.dofs[k]] += omega * d[k];
    if (flops) {
      flops->residual_flops += rflops;
      flops->subdomain_flops += detail::solve_flops(sd.size());
      ++flops->subdomain_applications;
    }
  };
  if (order == SweepOrder::Ascending)
    for (const auto& sd : subdomains) apply(sd);
  else
    for (auto it = subdomains.rbegin(); it != subdomains.rend(); ++it) apply(*it);
}

inline void smooth_additive(const SaddleSystem& s, const std::vector<VankaSubdomain>& subdomains, Vector& x,
                            std::span<const double> b, double omega, FlopCounter* flops = nullptr) {
  detail::check_sizes(s, x, b);
  const auto r = residual(s.L, x, b);
  Vector delta(x.size(), 0.0);
  Vector local;
  for (const auto& sd : subdomains) {
    if (!sd.lu) throw ConfigError("additive smoother needs LU-factorized subdomains");
    local.resize(sd.dofs.size());
    for (std::size_t k = 0; k < sd.dofs.size(); ++k) local[k] = r[sd.dofs[k]];
    const auto d = lu_solve(*sd.lu, local);
    for (std::size_t k = 0; k < sd.dofs.size(); ++k) delta[sd.dofs[k]] += d[k];
    if (flops) {
      flops->subdomain_flops += detail::solve_flops(sd.size());
      ++flops->subdomain_applications;
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += omega * delta[i];
  if (flops) flops->residual_flops += 2 * s.L.nonzeros();
}

inline void smooth_restricted_additive(const SaddleSystem& s, const std::vector<VankaSubdomain>& subdomains,
                                       Vector& x, std::span<const double> b, double omega,
                                       FlopCounter* flops = nullptr) {
  detail::check_sizes(s, x, b);
  const auto r = residual(s.L, x, b);
  for (const auto& sd : subdomains) {
    const auto& inv = sd.inverse_rows;
    if (inv.rows() != static_cast<Index>(sd.restricted_dofs.size()) || inv.cols() != sd.size())
      throw ConfigError("restricted additive smoother needs inverse-row factorized subdomains");
    for (Index j = 0; j < inv.rows(); ++j) {
      const auto row = inv.row(j);
      double d = 0.0;
      for (std::size_t k = 0; k < sd.dofs.size(); ++k) d += row[k] * r[sd.dofs[k]];
      x[sd.restricted_dofs[j]] += omega * d;
    }
    if (flops) {
      flops->subdomain_flops += 2ull * inv.rows() * inv.cols();
      ++flops->subdomain_applications;
    }
  }
  if (flops) flops->residual_flops += 2 * s.L.nonzeros();
}

/// Subdomains of one level, factorized for one variant.
class VankaSmoother {
 public:
  VankaSmoother(const SaddleSystem& system, SmootherConfig cfg) : system_(&system), cfg_(cfg) {
    cfg_.validate();
    subdomains_ = build_subdomains(system);
    factorize_subdomains(system, subdomains_, cfg_.variant);
  }

  void apply(Vector& x, std::span<const double> b, FlopCounter* flops = nullptr) const {
    switch (cfg_.variant) {
      case SmootherVariant::MV:
        smooth_multiplicative(*system_, subdomains_, x, b, cfg_.damping, cfg_.sweep_order, flops);
        break;
      case SmootherVariant::AV:
        smooth_additive(*system_, subdomains_, x, b, cfg_.damping, flops);
        break;
      case SmootherVariant::RAV:
        smooth_restricted_additive(*system_, subdomains_, x, b, cfg_.damping, flops);
        break;
    }
  }

  const SmootherConfig& config() const { return cfg_; }
  const std::vector<VankaSubdomain>& subdomains() const { return subdomains_; }

 private:
  const SaddleSystem* system_;
  SmootherConfig cfg_;
  std::vector<VankaSubdomain> subdomains_;
};

}  // namespace vanka
