#pragma once

#include "scagwr/baseline.hpp"
#include "scagwr/calibration.hpp"
#include "scagwr/dataset.hpp"
#include "scagwr/diagnostics.hpp"
#include "scagwr/error.hpp"
#include "scagwr/estimator.hpp"
#include "scagwr/geometry.hpp"
#include "scagwr/io.hpp"
#include "scagwr/kernel.hpp"
#include "scagwr/moments.hpp"
#include "scagwr/simulation.hpp"
