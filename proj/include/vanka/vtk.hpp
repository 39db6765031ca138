#pragma once

// Legacy ASCII VTK export of a nodal Q1 solution.

#include <array>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "vanka/error.hpp"
#include "vanka/mesh.hpp"

namespace vanka {

/// `nodal[v]` holds (u_x, u_y, p) at vertex v.
inline void write_vtk(const std::string& path, const QuadMesh& mesh,
                      const std::vector<std::array<double, 3>>& nodal) {
  if (nodal.size() != mesh.vertices.size()) throw DimensionError("write_vtk: nodal field size mismatch");
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  char buf[96];
  out << "# vtk DataFile Version 3.0\nstokes solution\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.vertices.size() << " double\n";
  for (const auto& p : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g 0\n", p.x, p.y);
    out << buf;
  }
  const auto ne = mesh.elements.size();
  out << "CELLS " << ne << ' ' << 5 * ne << '\n';
  for (const auto& e : mesh.elements) out << "4 " << e.v[0] << ' ' << e.v[1] << ' ' << e.v[2] << ' ' << e.v[3] << '\n';
  out << "CELL_TYPES " << ne << '\n';
  for (std::size_t i = 0; i < ne; ++i) out << "9\n";
  out << "POINT_DATA " << nodal.size() << "\nVECTORS velocity double\n";
  for (const auto& n : nodal) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g 0\n", n[0], n[1]);
    out << buf;
  }
  out << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (const auto& n : nodal) {
    std::snprintf(buf, sizeof buf, "%.17g\n", n[2]);
    out << buf;
  }
  if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace vanka
