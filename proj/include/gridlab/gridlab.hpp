#pragma once

#include "gridlab/analysis.hpp"
#include "gridlab/checkpoint.hpp"
#include "gridlab/error.hpp"
#include "gridlab/field.hpp"
#include "gridlab/harness/config.hpp"
#include "gridlab/harness/csv.hpp"
#include "gridlab/harness/experiments.hpp"
#include "gridlab/harness/svg.hpp"
#include "gridlab/mlp.hpp"
#include "gridlab/pwl.hpp"
#include "gridlab/rng.hpp"
#include "gridlab/signals.hpp"
#include "gridlab/train.hpp"
