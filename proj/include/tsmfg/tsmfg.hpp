#pragma once

#include "tsmfg/convergence.hpp"
#include "tsmfg/cost.hpp"
#include "tsmfg/errors.hpp"
#include "tsmfg/hamiltonian.hpp"
#include "tsmfg/meanfield.hpp"
#include "tsmfg/nplayer.hpp"
#include "tsmfg/rng.hpp"
#include "tsmfg/simulator.hpp"
