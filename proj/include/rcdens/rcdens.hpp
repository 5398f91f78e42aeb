#pragma once

#include "grid.hpp"
#include "io.hpp"
#include "likelihood.hpp"
#include "operator.hpp"
#include "parallel.hpp"
#include "results.hpp"
#include "rng.hpp"
#include "sample_matrix.hpp"
#include "select.hpp"
#include "shift.hpp"
#include "simulate.hpp"
#include "solver.hpp"
#include "spline.hpp"
