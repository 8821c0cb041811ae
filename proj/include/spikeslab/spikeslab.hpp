#pragma once

#include "spikeslab/common.hpp"
#include "spikeslab/config.hpp"
#include "spikeslab/decomposition.hpp"
#include "spikeslab/design.hpp"
#include "spikeslab/experiments.hpp"
#include "spikeslab/feasibility.hpp"
#include "spikeslab/io.hpp"
#include "spikeslab/oracle.hpp"
#include "spikeslab/parallel.hpp"
#include "spikeslab/potential.hpp"
#include "spikeslab/quadrature.hpp"
#include "spikeslab/rng.hpp"
#include "spikeslab/samplers.hpp"
#include "spikeslab/slab.hpp"
#include "spikeslab/special.hpp"
