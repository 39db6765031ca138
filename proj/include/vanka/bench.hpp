#pragma once

// Driven-cavity and cylinder-channel benchmarks: hierarchy sweeps,
// smoothing-step sweeps and CSV/JSON reports.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "json.hpp"

#include "vanka/discretization.hpp"
#include "vanka/error.hpp"
#include "vanka/mesh.hpp"
#include "vanka/multigrid.hpp"
#include "vanka/smoothers.hpp"
#include "vanka/vtk.hpp"

namespace vanka {

enum class Benchmark : std::uint8_t { Cavity, Cylinder };

inline const char* to_string(Benchmark b) { return b == Benchmark::Cavity ? "cavity" : "cylinder"; }

inline Benchmark parse_benchmark(const std::string& s) {
  if (s == "cavity") return Benchmark::Cavity;
  if (s == "cylinder") return Benchmark::Cylinder;
  throw ConfigError("unknown benchmark '" + s + "' (expected cavity or cylinder)");
}

enum class ReportFormat : std::uint8_t { CSV, JSON };

inline ReportFormat parse_format(const std::string& s) {
  if (s == "csv") return ReportFormat::CSV;
  if (s == "json") return ReportFormat::JSON;
  throw ConfigError("unknown report format '" + s + "' (expected csv or json)");
}

/// "mv", "rav,mv" or "all".
inline std::vector<SmootherVariant> parse_smoother_list(const std::string& s) {
  if (s == "all") return {SmootherVariant::MV, SmootherVariant::AV, SmootherVariant::RAV};
  std::vector<SmootherVariant> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_smoother(item));
  if (out.empty()) throw ConfigError("empty smoother list");
  return out;
}

struct RunConfig {
  Benchmark benchmark = Benchmark::Cavity;
  int n_levels = 4;
  int min_depth = 2;
  std::vector<SmootherVariant> smoothers{SmootherVariant::MV};
  int n_pre = 3;
  int n_post = 3;
  std::optional<double> damping;  // overrides the per-variant default
  std::optional<double> beta;
  double eta = 1e-3;
  double reduction_target = 1e-8;
  int max_iterations = 500;
  std::vector<int> sweep_steps{1, 2, 3, 4, 5};
  bool pin_all_levels = false;
  bool deterministic = false;
  std::string output;
  ReportFormat format = ReportFormat::CSV;
  std::string vtk;

  void validate() const {
    if (n_levels < 2) throw ConfigError("n_levels must be at least 2");
    if (min_depth < 1 || min_depth > n_levels) throw ConfigError("min_depth must lie in [1, n_levels]");
    if (smoothers.empty()) throw ConfigError("no smoother selected");
    if (n_pre < 0 || n_post < 0) throw ConfigError("smoothing step counts must be non-negative");
    if (damping && !(*damping > 0.0 && *damping < 2.0)) throw ConfigError("damping must lie in (0,2)");
    if (beta && !(*beta > 0.0)) throw ConfigError("beta must be positive");
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    if (!(reduction_target > 0.0 && reduction_target < 1.0)) throw ConfigError("tolerance must lie in (0,1)");
    if (max_iterations < 0) throw ConfigError("max_iterations must be non-negative");
    for (int s : sweep_steps)
      if (s < 0) throw ConfigError("sweep steps must be non-negative");
  }

  SmootherConfig smoother_config(SmootherVariant v) const {
    auto c = SmootherConfig::defaults(v);
    if (damping) c.damping = *damping;
    return c;
  }

  MultigridConfig multigrid_config(SmootherVariant v) const {
    MultigridConfig c;
    c.n_pre = n_pre;
    c.n_post = n_post;
    c.smoother = smoother_config(v);
    c.reduction_target = reduction_target;
    c.max_iterations = max_iterations;
    return c;
  }

  StokesParameters parameters() const { return {eta, beta}; }
};

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["benchmark"] = to_string(c.benchmark);
  j["levels"] = c.n_levels;
  j["min_depth"] = c.min_depth;
  auto& sm = j["smoothers"] = nlohmann::ordered_json::array();
  for (auto v : c.smoothers) sm.push_back(to_string(v));
  j["pre"] = c.n_pre;
  j["post"] = c.n_post;
  j["damping"] = c.damping ? nlohmann::ordered_json(*c.damping) : nlohmann::ordered_json(nullptr);
  j["beta"] = c.parameters().stabilization();
  j["eta"] = c.eta;
  j["tol"] = c.reduction_target;
  j["max_iters"] = c.max_iterations;
  j["steps"] = c.sweep_steps;
  j["pin_all_levels"] = c.pin_all_levels;
  j["deterministic"] = c.deterministic;
  return j;
}

/// Keys mirror the CLI flags; absent keys keep their defaults.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c = {}) {
  try {
    if (j.contains("benchmark")) c.benchmark = parse_benchmark(j.at("benchmark").get<std::string>());
    if (j.contains("levels")) c.n_levels = j.at("levels").get<int>();
    if (j.contains("min_depth")) c.min_depth = j.at("min_depth").get<int>();
    if (j.contains("smoothers")) {
      const auto& s = j.at("smoothers");
      if (s.is_string()) {
        c.smoothers = parse_smoother_list(s.get<std::string>());
      } else {
        c.smoothers.clear();
        for (const auto& item : s) c.smoothers.push_back(parse_smoother(item.get<std::string>()));
      }
    }
    if (j.contains("smoother")) c.smoothers = parse_smoother_list(j.at("smoother").get<std::string>());
    if (j.contains("pre")) c.n_pre = j.at("pre").get<int>();
    if (j.contains("post")) c.n_post = j.at("post").get<int>();
    if (j.contains("damping") && !j.at("damping").is_null()) c.damping = j.at("damping").get<double>();
    if (j.contains("beta") && !j.at("beta").is_null()) c.beta = j.at("beta").get<double>();
    if (j.contains("eta")) c.eta = j.at("eta").get<double>();
    if (j.contains("tol")) c.reduction_target = j.at("tol").get<double>();
    if (j.contains("max_iters")) c.max_iterations = j.at("max_iters").get<int>();
    if (j.contains("steps")) c.sweep_steps = j.at("steps").get<std::vector<int>>();
    if (j.contains("pin_all_levels")) c.pin_all_levels = j.at("pin_all_levels").get<bool>();
    if (j.contains("deterministic")) c.deterministic = j.at("deterministic").get<bool>();
    if (j.contains("out")) c.output = j.at("out").get<std::string>();
    if (j.contains("format")) c.format = parse_format(j.at("format").get<std::string>());
    if (j.contains("vtk")) c.vtk = j.at("vtk").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Benchmark geometry

struct BenchmarkSetup {
  MacroMeshSpec spec;
  RefinementMarker marker;
  BoundaryConditions bcs;
};

/// Unit square with 3 uniform refinements; bands toward all four sides.
inline BenchmarkSetup cavity_setup() {
  BenchmarkSetup s;
  s.spec.geometry = UnitSquare{};
  s.spec.initial_uniform_levels = 3;
  s.marker = RefinementMarker::toward_all_boundaries(std::vector<double>{0.15, 0.15, 0.15, 0.11, 0.10, 0.072});
  s.bcs = BoundaryConditions::driven_cavity(1.0);
  return s;
}

inline constexpr double kCylinderInflow = 0.3;

/// Channel with cylinder, 2 uniform refinements of the macro mesh; a band
/// toward walls and cylinder that shrinks with every step.
inline BenchmarkSetup cylinder_setup() {
  BenchmarkSetup s;
  const ChannelWithCylinder ch;
  s.spec.geometry = ch;
  s.spec.initial_uniform_levels = 2;
  s.marker = RefinementMarker::toward_walls_and_cylinder(0.05, 0.6);
  s.bcs = channel_flow(kCylinderInflow, ch.height);
  return s;
}

inline BenchmarkSetup benchmark_setup(Benchmark b) { return b == Benchmark::Cavity ? cavity_setup() : cylinder_setup(); }

/// Scalar DoFs counted over non-hanging vertices, three per vertex.
inline Index count_dofs(const QuadMesh& mesh) {
  return kFieldsPerVertex * (mesh.num_vertices() - static_cast<Index>(mesh.hanging_vertices.size()));
}

// ---------------------------------------------------------------------------
// Reports

struct BenchmarkRow {
  int depth = 0;
  Index n_e = 0;
  Index n_dof = 0;
  SmootherVariant smoother = SmootherVariant::MV;
  int n_pre = 0;
  int n_post = 0;
  double damping = 0.0;
  int iterations = 0;
  bool converged = false;
  std::optional<double> reduction_factor;
  double setup_s = 0.0;
  double per_iter_s = 0.0;
  double total_s = 0.0;
  // Not serialized.
  bool diverged = false;
  std::vector<double> residual_history;
  FlopCounter flops;
};

struct BenchmarkReport {
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
  std::vector<BenchmarkRow> rows;
};

inline constexpr std::array<const char*, 13> kReportColumns{
    "depth", "n_e",       "n_dof",    "smoother", "n_pre",      "n_post", "damping",
    "iterations", "converged", "reduction_factor", "setup_s", "per_iter_s", "total_s"};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string hostname() {
  char buf[256] = {};
  if (gethostname(buf, sizeof buf - 1) != 0) return "unknown";
  return buf;
}

inline nlohmann::ordered_json make_metadata(const RunConfig& cfg, const char* kind) {
  nlohmann::ordered_json m;
  m["run"] = kind;
  m["config"] = to_json(cfg);
  m["timestamp"] = timestamp_utc();
  m["host"] = hostname();
  return m;
}

}  // namespace detail

inline nlohmann::ordered_json row_to_json(const BenchmarkRow& r) {
  nlohmann::ordered_json j;
  j["depth"] = r.depth;
  j["n_e"] = r.n_e;
  j["n_dof"] = r.n_dof;
  j["smoother"] = to_string(r.smoother);
  j["n_pre"] = r.n_pre;
  j["n_post"] = r.n_post;
  j["damping"] = r.damping;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["reduction_factor"] = r.reduction_factor ? nlohmann::ordered_json(*r.reduction_factor) : nlohmann::ordered_json(nullptr);
  j["setup_s"] = r.setup_s;
  j["per_iter_s"] = r.per_iter_s;
  j["total_s"] = r.total_s;
  return j;
}

inline BenchmarkRow row_from_json(const nlohmann::ordered_json& j) {
  BenchmarkRow r;
  r.depth = j.at("depth").get<int>();
  r.n_e = j.at("n_e").get<Index>();
  r.n_dof = j.at("n_dof").get<Index>();
  r.smoother = parse_smoother(j.at("smoother").get<std::string>());
  r.n_pre = j.at("n_pre").get<int>();
  r.n_post = j.at("n_post").get<int>();
  r.damping = j.at("damping").get<double>();
  r.iterations = j.at("iterations").get<int>();
  r.converged = j.at("converged").get<bool>();
  if (!j.at("reduction_factor").is_null()) r.reduction_factor = j.at("reduction_factor").get<double>();
  r.setup_s = j.at("setup_s").get<double>();
  r.per_iter_s = j.at("per_iter_s").get<double>();
  r.total_s = j.at("total_s").get<double>();
  return r;
}

inline std::string to_csv(const BenchmarkReport& report) {
  std::string out;
  for (std::size_t i = 0; i < kReportColumns.size(); ++i) {
    if (i) out += ',';
    out += kReportColumns[i];
  }
  out += '\n';
  using detail::format_double;
  for (const auto& r : report.rows) {
    out += std::to_string(r.depth) + ',' + std::to_string(r.n_e) + ',' + std::to_string(r.n_dof) + ',' +
           to_string(r.smoother) + ',' + std::to_string(r.n_pre) + ',' + std::to_string(r.n_post) + ',' +
           format_double(r.damping) + ',' + std::to_string(r.iterations) + ',' + (r.converged ? "true" : "false") +
           ',' + (r.reduction_factor ? format_double(*r.reduction_factor) : std::string()) + ',' +
           format_double(r.setup_s) + ',' + format_double(r.per_iter_s) + ',' + format_double(r.total_s) + '\n';
  }
  return out;
}

inline std::string to_json_string(const BenchmarkReport& report) {
  nlohmann::ordered_json j;
  j["metadata"] = report.metadata;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) j["rows"].push_back(row_to_json(r));
  return j.dump(2) + '\n';
}

inline BenchmarkReport report_from_json(const std::string& text) {
  const auto j = nlohmann::ordered_json::parse(text);
  BenchmarkReport rep;
  if (j.contains("metadata")) rep.metadata = j.at("metadata");
  for (const auto& r : j.at("rows")) rep.rows.push_back(row_from_json(r));
  return rep;
}

inline void emit_report(const BenchmarkReport& report, ReportFormat format, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open report file '" + path + "' for writing");
  out << (format == ReportFormat::CSV ? to_csv(report) : to_json_string(report));
  if (!out) throw Error("write to report file '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Solution post-checks

/// Signs of u_x along the vertical centerline x = 0.5 (bottom to top):
/// a single primary vortex shows both positive and negative values.
inline bool has_primary_vortex(const QuadMesh& mesh, const std::vector<std::array<double, 3>>& nodal) {
  double lo = 0.0, hi = 0.0;
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const auto& p = mesh.vertices[v];
    if (std::abs(p.x - 0.5) > 1e-12 || p.y <= 0.0 || p.y >= 1.0) continue;
    lo = std::min(lo, nodal[v][0]);
    hi = std::max(hi, nodal[v][0]);
  }
  return lo < 0.0 && hi > 0.0;
}

struct FluxBalance {
  double inflow = 0.0;
  double outflow = 0.0;

  double relative_mismatch() const { return std::abs(outflow - inflow) / std::abs(inflow); }
};

/// Integral of u_x over the inflow and outflow boundaries (exact for the
/// piecewise linear trace).
inline FluxBalance flux_balance(const QuadMesh& mesh, const std::vector<std::array<double, 3>>& nodal) {
  FluxBalance f;
  for (const auto& [edge, tag] : mesh.boundary_edges) {
    if (tag != BoundaryTag::DirichletInflow && tag != BoundaryTag::NeumannOutflow) continue;
    const double dy = std::abs(mesh.vertices[edge.a].y - mesh.vertices[edge.b].y);
    const double q = 0.5 * dy * (nodal[edge.a][0] + nodal[edge.b][0]);
    (tag == BoundaryTag::DirichletInflow ? f.inflow : f.outflow) += q;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Runs

/// A discretized benchmark hierarchy shared by all smoothers of one run.
struct PreparedBenchmark {
  GridHierarchy grids;
  DiscreteHierarchy systems;
};

inline PreparedBenchmark prepare_benchmark(const RunConfig& cfg) {
  cfg.validate();
  const auto setup = benchmark_setup(cfg.benchmark);
  PreparedBenchmark p;
  p.grids = build_hierarchy(setup.spec, setup.marker, cfg.n_levels);
  p.systems = discretize(p.grids, setup.bcs, cfg.parameters(), {},
                         cfg.pin_all_levels ? PressureNullspace::PinAllLevels : PressureNullspace::PinCoarseOnly);
  return p;
}

struct SolveResult {
  BenchmarkRow row;
  Vector x;
};

inline SolveResult solve_depth(const PreparedBenchmark& p, int depth, const MultigridConfig& mg_cfg) {
  Multigrid mg(p.systems, static_cast<std::size_t>(depth), mg_cfg);
  SolveReport rep;
  SolveResult out;
  out.x = mg.solve(rep, p.systems.setup_seconds(static_cast<std::size_t>(depth)));
  auto& r = out.row;
  const auto& mesh = p.grids.levels[depth - 1];
  r.depth = depth;
  r.n_e = mesh.num_elements();
  r.n_dof = count_dofs(mesh);
  r.smoother = mg_cfg.smoother.variant;
  r.n_pre = mg_cfg.n_pre;
  r.n_post = mg_cfg.n_post;
  r.damping = mg_cfg.smoother.damping;
  r.iterations = rep.iterations;
  r.converged = rep.converged;
  r.diverged = rep.diverged;
  r.reduction_factor = rep.reduction_factor;
  r.setup_s = rep.setup_seconds;
  r.per_iter_s = rep.per_iteration_seconds;
  r.total_s = rep.total_seconds;
  r.residual_history = std::move(rep.residual_history);
  r.flops = mg.flops();
  return out;
}

inline void export_vtk(const PreparedBenchmark& p, int depth, const Vector& x, const std::string& path) {
  const auto& sys = p.systems.systems[depth - 1];
  auto nodal = expand_solution(sys, x);
  write_vtk(path, p.grids.levels[depth - 1], nodal);
}

/// One row per (smoother, depth) for depths min_depth..n_levels.
inline BenchmarkReport run_benchmark(const RunConfig& cfg) {
  const auto p = prepare_benchmark(cfg);
  BenchmarkReport report;
  report.metadata = detail::make_metadata(cfg, "hierarchy");
  for (auto v : cfg.smoothers) {
    for (int depth = cfg.min_depth; depth <= cfg.n_levels; ++depth) {
      auto res = solve_depth(p, depth, cfg.multigrid_config(v));
      if (!cfg.vtk.empty() && v == cfg.smoothers.front() && depth == cfg.n_levels)
        export_vtk(p, depth, res.x, cfg.vtk);
      report.rows.push_back(std::move(res.row));
    }
  }
  return report;
}

inline BenchmarkReport run_cavity(RunConfig cfg) {
  cfg.benchmark = Benchmark::Cavity;
  return run_benchmark(cfg);
}

inline BenchmarkReport run_cylinder(RunConfig cfg) {
  cfg.benchmark = Benchmark::Cylinder;
  return run_benchmark(cfg);
}

/// Rows for n_pre = n_post = s, s in `steps`, on the finest configured depth.
inline BenchmarkReport sweep_smoothing_steps(const RunConfig& cfg, const std::vector<int>& steps) {
  const auto p = prepare_benchmark(cfg);
  BenchmarkReport report;
  report.metadata = detail::make_metadata(cfg, "sweep");
  for (auto v : cfg.smoothers) {
    for (int s : steps) {
      if (s < 0) throw ConfigError("sweep steps must be non-negative");
      auto mg_cfg = cfg.multigrid_config(v);
      mg_cfg.n_pre = mg_cfg.n_post = s;
      report.rows.push_back(solve_depth(p, cfg.n_levels, mg_cfg).row);
    }
  }
  return report;
}

inline BenchmarkReport sweep_smoothing_steps(const RunConfig& cfg) { return sweep_smoothing_steps(cfg, cfg.sweep_steps); }

}  // namespace vanka
