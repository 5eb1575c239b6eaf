#pragma once

// Umbrella header for the NySALT toolkit: structure-preserving integration
// with data-fitted Nystrom parameters for large time-stepping.

#include "nysalt/config.hpp"
#include "nysalt/datagen.hpp"
#include "nysalt/experiments.hpp"
#include "nysalt/inference.hpp"
#include "nysalt/integrators.hpp"
#include "nysalt/io.hpp"
#include "nysalt/linear_analysis.hpp"
#include "nysalt/metrics.hpp"
#include "nysalt/models.hpp"
#include "nysalt/parallel.hpp"
#include "nysalt/rng.hpp"
#include "nysalt/state.hpp"
#include "nysalt/version.hpp"
