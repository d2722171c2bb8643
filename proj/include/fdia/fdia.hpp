#pragma once

#include "fdia/attack.hpp"
#include "fdia/csv.hpp"
#include "fdia/detector.hpp"
#include "fdia/errors.hpp"
#include "fdia/estimator.hpp"
#include "fdia/linear_model.hpp"
#include "fdia/metrics.hpp"
#include "fdia/presets.hpp"
#include "fdia/random.hpp"
#include "fdia/scenario.hpp"
#include "fdia/scheduler.hpp"
#include "fdia/simulation.hpp"
