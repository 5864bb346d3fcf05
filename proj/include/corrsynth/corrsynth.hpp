#pragma once

#include "corrsynth/errors.hpp"
#include "corrsynth/numerics.hpp"
#include "corrsynth/dut_model.hpp"
#include "corrsynth/weighting.hpp"
#include "corrsynth/synthesis.hpp"
#include "corrsynth/noise.hpp"
#include "corrsynth/montecarlo.hpp"
#include "corrsynth/correlation_meter.hpp"
#include "corrsynth/lockin_baseline.hpp"
#include "corrsynth/serialization.hpp"
#include "corrsynth/config.hpp"
#include "corrsynth/bench.hpp"
