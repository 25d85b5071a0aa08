#pragma once

#include "mris/common.hpp"
#include "mris/qm_core.hpp"
#include "mris/rng.hpp"
#include "mris/chain.hpp"
#include "mris/unraveling.hpp"
#include "mris/extended.hpp"
#include "mris/probes.hpp"
#include "mris/parallel.hpp"
#include "mris/trajectories.hpp"
#include "mris/fluctuations.hpp"
#include "mris/adiabatic.hpp"
#include "mris/fixtures.hpp"
