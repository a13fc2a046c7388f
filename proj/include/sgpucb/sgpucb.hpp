#pragma once

#include "sgpucb/errors.hpp"
#include "sgpucb/kernel.hpp"
#include "sgpucb/features.hpp"
#include "sgpucb/gp.hpp"
#include "sgpucb/environment.hpp"
#include "sgpucb/phase_length.hpp"
#include "sgpucb/reachability.hpp"
#include "sgpucb/algorithms.hpp"
#include "sgpucb/analysis.hpp"
#include "sgpucb/bench.hpp"
