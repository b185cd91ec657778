#pragma once

#include "sspg/analysis.hpp"
#include "sspg/baseline.hpp"
#include "sspg/cfp.hpp"
#include "sspg/core.hpp"
#include "sspg/engine.hpp"
#include "sspg/experiment.hpp"
#include "sspg/rng.hpp"
#include "sspg/sr.hpp"
#include "sspg/sr_io.hpp"
