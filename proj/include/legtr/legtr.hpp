#pragma once

#include "legtr/error.hpp"
#include "legtr/time_basis.hpp"
#include "legtr/grid.hpp"
#include "legtr/viscosity.hpp"
#include "legtr/spatial_disc.hpp"
#include "legtr/forward_solver.hpp"
#include "legtr/reduced_model.hpp"
#include "legtr/normal_inverse.hpp"
#include "legtr/inverse_solver.hpp"
#include "legtr/io.hpp"
#include "legtr/config.hpp"
#include "legtr/pipeline.hpp"
