#pragma once

#include "histreg/core/transform.hpp"
#include "histreg/registration/features.hpp"

namespace histreg::reg {

/// Solve the standard TPS linear system for a warp whose control points are
/// the reference-side coordinates and whose outputs are the moving-side
/// coordinates, with smoothing lambda added to the kernel diagonal. lambda = 0
/// interpolates every correspondence exactly.
/// Throws SingularSystem on collinear or duplicate reference points.
TpsWarp estimate_tps(const feat::MatchSet& matches, double lambda);

/// Same solve with the roles swapped: control points on the moving side,
/// outputs on the reference side (used for the forward stages of the
/// registration map).
TpsWarp estimate_tps_forward(const feat::MatchSet& matches, double lambda);

}  // namespace histreg::reg
