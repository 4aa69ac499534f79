#pragma once

#include "ewoc/errors.hpp"
#include "ewoc/stats.hpp"
#include "ewoc/random.hpp"
#include "ewoc/model.hpp"
#include "ewoc/posterior.hpp"
#include "ewoc/policy.hpp"
#include "ewoc/trial.hpp"
#include "ewoc/simulation.hpp"
#include "ewoc/json_io.hpp"
