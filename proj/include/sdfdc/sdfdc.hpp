#pragma once

#include "baselines.hpp"
#include "cell_optimizer.hpp"
#include "closest_point.hpp"
#include "contour_mesh.hpp"
#include "hermite.hpp"
#include "mesh.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "sample_assignment.hpp"
#include "sdf_grid.hpp"
#include "sdfgen.hpp"
