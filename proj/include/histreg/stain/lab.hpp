#pragma once

#include <array>

#include "histreg/core/image.hpp"

namespace histreg::stain {

/// Per-channel mean and standard deviation in lalphabeta space, computed over
/// masked (tissue) pixels.
struct LabStats {
  std::array<double, 3> mean{};
  std::array<double, 3> stdDev{};
};

/// RGB -> LMS -> log10 (clamped at 1e-6) -> lalphabeta. 3-channel input only.
ImageBuffer rgb_to_lab(const ImageBuffer& img);

/// Exact inverse of rgb_to_lab (up to the log clamp); output is not clamped.
ImageBuffer lab_to_rgb(const ImageBuffer& lab);

/// Population statistics over masked pixels. Throws EmptyInput on an empty mask.
LabStats compute_lab_stats(const ImageBuffer& lab, const TissueMask& mask);

/// Masked channel-wise normalization in lalphabeta:
/// out = (in - mu_src) * (sigma_tgt / sigma_src) + mu_tgt.
/// Unmasked pixels pass through unchanged (source RGB copied verbatim); masked
/// pixels are converted back to RGB and clamped to [0,1].
/// Throws DegenerateStats when any source sigma < 1e-9.
ImageBuffer reinhard_transfer(const ImageBuffer& source, const TissueMask& sourceMask, const LabStats& targetStats);

/// The lalphabeta-domain core of reinhard_transfer, before conversion back to
/// RGB and clamping. Exposed so the statistics contract is checkable on the
/// pre-clamp values.
ImageBuffer reinhard_transfer_lab(const ImageBuffer& sourceLab, const TissueMask& mask, const LabStats& sourceStats,
                                  const LabStats& targetStats);

}  // namespace histreg::stain
