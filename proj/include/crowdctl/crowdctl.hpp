#pragma once

#include "assignment.hpp"
#include "control.hpp"
#include "errors.hpp"
#include "expression.hpp"
#include "field.hpp"
#include "flow.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "measures.hpp"
#include "mesh.hpp"
#include "mintime.hpp"
#include "pipeline.hpp"
#include "region.hpp"
#include "scenario.hpp"
#include "simulator.hpp"
#include "synthesis.hpp"
#include "wasserstein.hpp"
