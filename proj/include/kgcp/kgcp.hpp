#pragma once

#include "kgcp/acquisition.hpp"
#include "kgcp/benchmarks.hpp"
#include "kgcp/box.hpp"
#include "kgcp/design.hpp"
#include "kgcp/errors.hpp"
#include "kgcp/external.hpp"
#include "kgcp/harness.hpp"
#include "kgcp/hyperfit.hpp"
#include "kgcp/kriging.hpp"
#include "kgcp/pattern_search.hpp"
#include "kgcp/policies.hpp"
#include "kgcp/results_io.hpp"
