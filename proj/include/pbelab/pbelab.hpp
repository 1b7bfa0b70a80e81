#pragma once

#include "pbelab/error.hpp"
#include "pbelab/numerics.hpp"
#include "pbelab/rng.hpp"
#include "pbelab/mdp.hpp"
#include "pbelab/pbe.hpp"
#include "pbelab/dynamics.hpp"
#include "pbelab/epsilon_lab.hpp"
#include "pbelab/scenario.hpp"
#include "pbelab/cli.hpp"
