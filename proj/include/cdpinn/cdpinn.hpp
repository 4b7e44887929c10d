#pragma once

#include "cdpinn/errors.hpp"
#include "cdpinn/scalar.hpp"
#include "cdpinn/multi_index.hpp"
#include "cdpinn/jet.hpp"
#include "cdpinn/random.hpp"
#include "cdpinn/binary_io.hpp"
#include "cdpinn/network.hpp"
#include "cdpinn/jet_engine.hpp"
#include "cdpinn/graph.hpp"
#include "cdpinn/problems.hpp"
#include "cdpinn/solution_grid.hpp"
#include "cdpinn/sampling.hpp"
#include "cdpinn/losses.hpp"
#include "cdpinn/optim.hpp"
#include "cdpinn/solvers.hpp"
#include "cdpinn/inverse.hpp"
#include "cdpinn/metrics.hpp"
#include "cdpinn/config.hpp"
#include "cdpinn/experiment.hpp"
