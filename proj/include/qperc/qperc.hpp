#pragma once

// Umbrella header for the simulation library.  io.hpp is excluded because it
// additionally requires the vendored json.hpp; include it explicitly where
// file output is needed.

#include "qperc/ensemble.hpp"
#include "qperc/lattice.hpp"
#include "qperc/rng.hpp"
#include "qperc/spectral.hpp"
#include "qperc/transport.hpp"
#include "qperc/version.hpp"
