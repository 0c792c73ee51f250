#pragma once

// Umbrella header: the whole library.

#include "edgecache/bandit.hpp"
#include "edgecache/engine.hpp"
#include "edgecache/experiment.hpp"
#include "edgecache/features.hpp"
#include "edgecache/io_util.hpp"
#include "edgecache/rng.hpp"
#include "edgecache/types.hpp"
#include "edgecache/verify.hpp"
#include "edgecache/workload.hpp"
