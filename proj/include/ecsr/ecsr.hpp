#pragma once

#include "ecsr/core.hpp"
#include "ecsr/denoiser.hpp"
#include "ecsr/ec_solver.hpp"
#include "ecsr/ensembles.hpp"
#include "ecsr/gfunc.hpp"
#include "ecsr/quadrature.hpp"
#include "ecsr/replica.hpp"
