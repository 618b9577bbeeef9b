#pragma once

#include "histreg/core/image.hpp"
#include "histreg/registration/features.hpp"

namespace histreg::reg {

struct BlockMatchConfig {
  int blockSize = 64;
  int searchRadius = 10;
  double minNcc = 0.5;
  double minTissueCoverage = 0.2;
};

struct BlockMatchResult {
  feat::MatchSet matches;       // (blockCenter + offset, blockCenter)
  std::vector<double> nccValues;  // parallel to matches
};

/// Zero-normalized cross-correlation block matching between a moving image
/// already resampled into the reference frame and the reference image itself.
/// Blocks sit on a regular non-overlapping grid; blocks with under
/// minTissueCoverage mask coverage or zero variance are skipped. The best
/// integer offset inside searchRadius is refined to sub-pixel by a quadratic
/// fit over the 3x3 NCC neighborhood. An empty result is valid.
BlockMatchResult block_match_refine(const ImageBuffer& moving, const ImageBuffer& reference,
                                    const TissueMask& referenceMask, const BlockMatchConfig& cfg = {});

}  // namespace histreg::reg
