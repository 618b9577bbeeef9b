#pragma once

#include "histreg/core/image.hpp"

namespace histreg::pre {

enum class MaskPolarity { darkForeground, brightForeground };

struct PreprocessConfig {
  double stretchLowPercentile = 0.01;
  double stretchHighPercentile = 0.99;
  double denoiseSigma = 1.0;
  MaskPolarity maskPolarity = MaskPolarity::darkForeground;
};

/// Per-channel linear map sending the low-percentile sample value to 0 and
/// the high-percentile value to 1, clamped to [0,1]. Percentiles use the
/// nearest-rank rule over all pixels of the channel.
/// Throws DegenerateRange when a channel is constant between the two ranks.
ImageBuffer contrast_stretch(const ImageBuffer& img, const PreprocessConfig& cfg);

/// s -> 1 - s on every sample.
ImageBuffer invert(const ImageBuffer& img);

/// Otsu threshold over a 256-bin histogram of the Rec.709 luma. Foreground is
/// samples < t* under darkForeground, >= t* under brightForeground. Variance
/// ties break toward the smaller threshold.
/// Throws DegenerateHistogram when all samples fall in one bin.
TissueMask otsu_mask(const ImageBuffer& img, MaskPolarity polarity);

/// The threshold value t* chosen by otsu_mask (bin boundary in [0,1]).
double otsu_threshold(const ImageBuffer& img);

/// Per-channel Gaussian blur, kernel radius ceil(3*sigma), symmetric reflect
/// padding. sigma = 0 returns the input unchanged.
ImageBuffer denoise(const ImageBuffer& img, double sigma);

/// Nearest-rank percentile of a sample span (p in [0,1]).
double nearest_rank_percentile(std::span<const double> samples, double p);

}  // namespace histreg::pre
