#pragma once

// Umbrella header for the motion-segmentation engine.

#include "laav/atoms.hpp"
#include "laav/dataio.hpp"
#include "laav/errors.hpp"
#include "laav/fine2coarse.hpp"
#include "laav/geometry.hpp"
#include "laav/multicut.hpp"
#include "laav/numerics.hpp"
#include "laav/pipeline.hpp"
#include "laav/rng.hpp"
#include "laav/rv.hpp"
#include "laav/trajectory.hpp"
