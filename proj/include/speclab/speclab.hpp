#pragma once

#include "speclab/errors.hpp"
#include "speclab/harness.hpp"
#include "speclab/json_io.hpp"
#include "speclab/metrics.hpp"
#include "speclab/model_zoo.hpp"
#include "speclab/pipeline.hpp"
#include "speclab/rng.hpp"
#include "speclab/specdec.hpp"
#include "speclab/verify_suite.hpp"
