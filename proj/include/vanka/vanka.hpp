#pragma once

#include "vanka/error.hpp"
#include "vanka/linalg.hpp"
#include "vanka/mesh.hpp"
#include "vanka/discretization.hpp"
#include "vanka/smoothers.hpp"
#include "vanka/multigrid.hpp"
#include "vanka/vtk.hpp"
#include "vanka/bench.hpp"
