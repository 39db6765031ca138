#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

namespace vanka {
namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::stringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    out.push_back(cells);
  }
  return out;
}

BenchmarkRow sample_row() {
  BenchmarkRow r;
  r.depth = 3;
  r.n_e = 676;
  r.n_dof = 2139;
  r.smoother = SmootherVariant::RAV;
  r.n_pre = 3;
  r.n_post = 3;
  r.damping = 0.66;
  r.iterations = 9;
  r.converged = true;
  r.reduction_factor = 0.1 + 0.2;
  r.setup_s = 1.0 / 3.0;
  r.per_iter_s = 2.0e-7 / 7.0;
  r.total_s = 5e-324;
  return r;
}

TEST(Report, EmptyReportIsHeaderOnly) {
  EXPECT_EQ(to_csv({}),
            "depth,n_e,n_dof,smoother,n_pre,n_post,damping,iterations,converged,reduction_factor,setup_s,per_iter_s,"
            "total_s\n");
}

TEST(Report, JsonRoundTripIsBitExact) {
  BenchmarkReport rep;
  rep.rows.push_back(sample_row());
  auto r2 = sample_row();
  r2.reduction_factor.reset();
  r2.converged = false;
  rep.rows.push_back(r2);
  const auto back = report_from_json(to_json_string(rep));
  ASSERT_EQ(back.rows.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& a = rep.rows[i];
    const auto& b = back.rows[i];
    EXPECT_EQ(a.depth, b.depth);
    EXPECT_EQ(a.n_e, b.n_e);
    EXPECT_EQ(a.n_dof, b.n_dof);
    EXPECT_EQ(a.smoother, b.smoother);
    EXPECT_EQ(a.damping, b.damping);
    EXPECT_EQ(a.iterations, b.iterations);
    EXPECT_EQ(a.converged, b.converged);
    EXPECT_EQ(a.reduction_factor, b.reduction_factor);
    EXPECT_EQ(a.setup_s, b.setup_s);
    EXPECT_EQ(a.per_iter_s, b.per_iter_s);
    EXPECT_EQ(a.total_s, b.total_s);
  }
}

TEST(Report, CsvAndJsonAgree) {
  BenchmarkReport rep;
  rep.rows.push_back(sample_row());
  const auto csv = parse_csv(to_csv(rep));
  ASSERT_EQ(csv.size(), 2u);
  ASSERT_EQ(csv[0].size(), kReportColumns.size());
  ASSERT_EQ(csv[1].size(), kReportColumns.size());
  const auto j = nlohmann::ordered_json::parse(to_json_string(rep));
  const auto& row = j.at("rows").at(0);
  std::size_t k = 0;
  for (const auto& [key, value] : row.items()) {
    EXPECT_EQ(key, csv[0][k]);
    const auto& cell = csv[1][k];
    if (value.is_number_float()) EXPECT_EQ(std::strtod(cell.c_str(), nullptr), value.get<double>()) << key;
    else if (value.is_number()) EXPECT_EQ(std::stoll(cell), value.get<long long>()) << key;
    else if (value.is_boolean()) EXPECT_EQ(cell, value.get<bool>() ? "true" : "false");
    else if (value.is_string()) EXPECT_EQ(cell, value.get<std::string>());
    ++k;
  }
  EXPECT_EQ(k, kReportColumns.size());
}

TEST(Report, MissingReductionFactorIsEmptyCsvCellAndJsonNull) {
  BenchmarkReport rep;
  rep.rows.push_back(sample_row());
  rep.rows[0].reduction_factor.reset();
  const auto csv = parse_csv(to_csv(rep));
  EXPECT_EQ(csv[1][9], "");
  EXPECT_TRUE(nlohmann::json::parse(to_json_string(rep))["rows"][0]["reduction_factor"].is_null());
}

TEST(Report, EmitWritesFileAndRejectsBadPath) {
  BenchmarkReport rep;
  rep.rows.push_back(sample_row());
  const auto path = (std::filesystem::temp_directory_path() / "vanka_report_test.csv").string();
  emit_report(rep, ReportFormat::CSV, path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), to_csv(rep));
  std::filesystem::remove(path);
  EXPECT_THROW(emit_report(rep, ReportFormat::JSON, "/nonexistent-dir/x.json"), Error);
}

TEST(Config, JsonValuesAndValidation) {
  const auto j = nlohmann::json::parse(R"({"benchmark":"cylinder","levels":3,"smoothers":["rav","mv"],
      "pre":2,"post":1,"damping":0.5,"eta":0.01,"tol":1e-6,"max_iters":50,"format":"json"})");
  const auto c = run_config_from_json(j);
  EXPECT_EQ(c.benchmark, Benchmark::Cylinder);
  EXPECT_EQ(c.n_levels, 3);
  ASSERT_EQ(c.smoothers.size(), 2u);
  EXPECT_EQ(c.smoothers[0], SmootherVariant::RAV);
  EXPECT_EQ(c.n_pre, 2);
  EXPECT_EQ(c.n_post, 1);
  EXPECT_EQ(c.smoother_config(SmootherVariant::MV).damping, 0.5);
  EXPECT_DOUBLE_EQ(c.parameters().stabilization(), 10.0);
  EXPECT_EQ(c.format, ReportFormat::JSON);
  EXPECT_EQ(c.multigrid_config(SmootherVariant::RAV).max_iterations, 50);

  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"smoothers":"gs"})")), ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"levels":"three"})")), ConfigError);
  RunConfig bad;
  bad.n_levels = 1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.eta = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent.json"), ConfigError);
}

TEST(Config, SmootherLists) {
  EXPECT_EQ(parse_smoother_list("all").size(), 3u);
  const auto l = parse_smoother_list("rav,av");
  ASSERT_EQ(l.size(), 2u);
  EXPECT_EQ(l[1], SmootherVariant::AV);
  EXPECT_THROW(parse_smoother_list(""), ConfigError);
}

TEST(Cavity, CoarseGridAnchorAndLidValues) {
  const auto setup = cavity_setup();
  const auto m = build_macro_mesh(setup.spec);
  EXPECT_EQ(m.num_elements(), 64);
  EXPECT_EQ(count_dofs(m), 243);
  const auto cs = build_constraints(m, setup.bcs);
  int lid = 0;
  for (Index v = 0; v < m.num_vertices(); ++v)
    if (m.vertices[v].y == 1.0 && m.vertices[v].x > 0.0 && m.vertices[v].x < 1.0) {
      EXPECT_EQ(cs.find(raw_dof(v, 0))->inhomogeneity, 1.0);
      ++lid;
    }
  EXPECT_EQ(lid, 7);
}

TEST(Cavity, RunProducesOneRowPerSmootherAndDepth) {
  RunConfig c;
  c.n_levels = 3;
  c.smoothers = parse_smoother_list("all");
  const auto rep = run_cavity(c);
  ASSERT_EQ(rep.rows.size(), 6u);
  EXPECT_EQ(parse_csv(to_csv(rep)).size(), 7u);
  for (const auto& r : rep.rows) {
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.n_dof, r.depth == 2 ? 699 : 2139);
  }
  EXPECT_EQ(rep.metadata["config"]["levels"], 3);
}

TEST(Cavity, SolutionHasPrimaryVortex) {
  RunConfig c;
  c.n_levels = 3;
  const auto p = prepare_benchmark(c);
  const auto res = solve_depth(p, 3, c.multigrid_config(SmootherVariant::MV));
  ASSERT_TRUE(res.row.converged);
  const auto nodal = expand_solution(p.systems.systems[2], res.x);
  EXPECT_TRUE(has_primary_vortex(p.grids.levels[2], nodal));
  // A zero field has none.
  EXPECT_FALSE(has_primary_vortex(p.grids.levels[2], std::vector<std::array<double, 3>>(nodal.size())));
}

TEST(Cavity, SmoothersAgreeOnTheSolution) {
  RunConfig c;
  c.n_levels = 3;
  const auto p = prepare_benchmark(c);
  std::vector<Vector> xs;
  for (auto v : {SmootherVariant::MV, SmootherVariant::AV, SmootherVariant::RAV}) {
    auto res = solve_depth(p, 3, c.multigrid_config(v));
    ASSERT_TRUE(res.row.converged);
    xs.push_back(std::move(res.x));
  }
  // Compare velocities; the pressure constant is free on the fine level.
  const Index nu = p.systems.systems[2].dofs.n_u;
  auto rel = [nu](const Vector& a, const Vector& b) {
    double d = 0.0, n = 0.0;
    for (Index i = 0; i < nu; ++i) {
      d += (a[i] - b[i]) * (a[i] - b[i]);
      n += b[i] * b[i];
    }
    return std::sqrt(d / n);
  };
  EXPECT_LE(rel(xs[1], xs[0]), 1e-6);
  EXPECT_LE(rel(xs[2], xs[0]), 1e-6);
}

TEST(Cavity, DeterministicResidualHistories) {
  RunConfig c;
  c.n_levels = 3;
  c.min_depth = 3;
  c.deterministic = true;
  c.smoothers = parse_smoother_list("all");
  const auto a = run_cavity(c);
  const auto b = run_cavity(c);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].residual_history, b.rows[i].residual_history);
}

TEST(Cylinder, InflowPeakAndCoarseGridSize) {
  const auto setup = cylinder_setup();
  const auto m = build_macro_mesh(setup.spec);
  EXPECT_EQ(count_dofs(m), 1836);
  const auto& inflow = setup.bcs.by_tag.at(BoundaryTag::DirichletInflow);
  EXPECT_DOUBLE_EQ(inflow.velocity({0.0, 0.205})[0], 0.3);
  EXPECT_EQ(inflow.velocity({0.0, 0.205})[1], 0.0);
  const auto cs = build_constraints(m, setup.bcs);
  const auto tags = vertex_boundary_tags(m);
  for (Index v = 0; v < m.num_vertices(); ++v) {
    if (m.vertices[v].x != 0.0) continue;
    const double expected = has_tag(tags[v], BoundaryTag::DirichletWall) ? 0.0 : inflow_velocity(m.vertices[v].y, 0.3, 0.41);
    EXPECT_DOUBLE_EQ(cs.find(raw_dof(v, 0))->inhomogeneity, expected);
  }
}

TEST(Cylinder, FluxIsConserved) {
  RunConfig c;
  c.benchmark = Benchmark::Cylinder;
  c.n_levels = 3;
  const auto p = prepare_benchmark(c);
  const auto res = solve_depth(p, 3, c.multigrid_config(SmootherVariant::MV));
  ASSERT_TRUE(res.row.converged);
  const auto nodal = expand_solution(p.systems.systems[2], res.x);
  const auto flux = flux_balance(p.grids.levels[2], nodal);
  // 2/3 * peak * H
  EXPECT_NEAR(flux.inflow, 2.0 / 3.0 * 0.3 * 0.41, 1e-3);
  EXPECT_LE(flux.relative_mismatch(), 0.02);
}

TEST(Sweep, OneRowPerStepCount) {
  RunConfig c;
  c.n_levels = 2;
  c.smoothers = {SmootherVariant::RAV};
  const auto rep = sweep_smoothing_steps(c, {1, 2, 3});
  ASSERT_EQ(rep.rows.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(rep.rows[i].n_pre, i + 1);
    EXPECT_EQ(rep.rows[i].n_post, i + 1);
    EXPECT_EQ(rep.rows[i].depth, 2);
  }
}

TEST(Vtk, WritesLegacyFile) {
  const auto m = testing::structured_cavity(2);
  std::vector<std::array<double, 3>> nodal(m.vertices.size(), {1.0, 2.0, 3.0});
  const auto path = (std::filesystem::temp_directory_path() / "vanka_test.vtk").string();
  write_vtk(path, m, nodal);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("POINTS 9 double"), std::string::npos);
  EXPECT_NE(text.find("CELLS 4 20"), std::string::npos);
  EXPECT_NE(text.find("VECTORS velocity double"), std::string::npos);
  EXPECT_NE(text.find("SCALARS pressure double 1"), std::string::npos);
  std::filesystem::remove(path);
  EXPECT_THROW(write_vtk(path, m, {}), DimensionError);
}

}  // namespace
}  // namespace vanka
