#pragma once

// Umbrella header for the whole library.

#include "ebm/crbm.hpp"
#include "ebm/csv.hpp"
#include "ebm/dbn.hpp"
#include "ebm/errors.hpp"
#include "ebm/exact.hpp"
#include "ebm/gibbs.hpp"
#include "ebm/hopfield.hpp"
#include "ebm/linalg.hpp"
#include "ebm/model.hpp"
#include "ebm/oracle_check.hpp"
#include "ebm/rng.hpp"
#include "ebm/serialize.hpp"
#include "ebm/trainer.hpp"
#include "ebm/unit_families.hpp"
#include "ebm/version.hpp"
