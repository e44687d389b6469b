#pragma once

#include "smooth_threshold/benchmark.hpp"
#include "smooth_threshold/diagnostics.hpp"
#include "smooth_threshold/error.hpp"
#include "smooth_threshold/io.hpp"
#include "smooth_threshold/kernels.hpp"
#include "smooth_threshold/numeric.hpp"
#include "smooth_threshold/optimizer.hpp"
#include "smooth_threshold/parallel.hpp"
#include "smooth_threshold/risk.hpp"
#include "smooth_threshold/rng.hpp"
#include "smooth_threshold/simulate.hpp"
#include "smooth_threshold/tuning.hpp"
