#pragma once

#include "ustlab/errors.hpp"
#include "ustlab/rng.hpp"
#include "ustlab/graphs.hpp"
#include "ustlab/walks.hpp"
#include "ustlab/wilson.hpp"
#include "ustlab/tree_metrics.hpp"
#include "ustlab/potential.hpp"
#include "ustlab/crt_ref.hpp"
#include "ustlab/stats.hpp"
#include "ustlab/experiment.hpp"
