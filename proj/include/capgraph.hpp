#pragma once
/**
 * @file capgraph.hpp
 * @brief Umbrella header for the capgraph library.
 */
#include "capgraph/assembly.hpp"
#include "capgraph/config.hpp"
#include "capgraph/error.hpp"
#include "capgraph/expression.hpp"
#include "capgraph/geometry.hpp"
#include "capgraph/io.hpp"
#include "capgraph/mesh.hpp"
#include "capgraph/metric.hpp"
#include "capgraph/mms.hpp"
#include "capgraph/oracle1d.hpp"
#include "capgraph/problem.hpp"
#include "capgraph/recovery.hpp"
#include "capgraph/solver.hpp"
#include "capgraph/verify.hpp"
