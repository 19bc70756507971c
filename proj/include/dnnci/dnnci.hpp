#pragma once

#include "dnnci/errors.hpp"
#include "dnnci/rng.hpp"
#include "dnnci/stats.hpp"
#include "dnnci/matrix.hpp"
#include "dnnci/network.hpp"
#include "dnnci/losses.hpp"
#include "dnnci/training.hpp"
#include "dnnci/causal.hpp"
#include "dnnci/policy.hpp"
#include "dnnci/simulation.hpp"
#include "dnnci/serialization.hpp"
#include "dnnci/csv.hpp"
#include "dnnci/report.hpp"
