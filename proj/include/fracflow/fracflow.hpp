#pragma once

// Umbrella header for the fracflow library: periodic pseudo-spectral solvers
// for fractional transport-diffusion / SQG / 2D fractional NS vorticity,
// alpha-stable sampling, McKean-Vlasov particle systems, and the norm and
// regularity diagnostics built on top of them.

#include "fracflow/errors.hpp"
#include "fracflow/field.hpp"
#include "fracflow/grid.hpp"
#include "fracflow/io.hpp"
#include "fracflow/norms.hpp"
#include "fracflow/particles.hpp"
#include "fracflow/regularity.hpp"
#include "fracflow/rng.hpp"
#include "fracflow/scenario.hpp"
#include "fracflow/solver.hpp"
#include "fracflow/spectral.hpp"
#include "fracflow/stable.hpp"
#include "fracflow/verify.hpp"
