#pragma once

#include "multiindex.hpp"
#include "expression.hpp"
#include "box.hpp"
#include "problem.hpp"
#include "bspline.hpp"
#include "linalg.hpp"
#include "discretization.hpp"
#include "fdcalc.hpp"
#include "analysis.hpp"
#include "harness.hpp"
