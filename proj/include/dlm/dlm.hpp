#pragma once

// Umbrella header for the dynamic linear model library.

#include "components.hpp"
#include "diagnostics.hpp"
#include "errors.hpp"
#include "filter.hpp"
#include "inference.hpp"
#include "optimize.hpp"
#include "parameters.hpp"
#include "random.hpp"
#include "smoother.hpp"
#include "statespace.hpp"
#include "timeseries.hpp"
#include "trend.hpp"
#include "version.hpp"
