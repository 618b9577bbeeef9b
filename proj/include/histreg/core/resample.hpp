#pragma once

#include "histreg/core/image.hpp"
#include "histreg/core/transform.hpp"

namespace histreg {

/// Bilinear sample of one channel at a continuous position. Out-of-bounds
/// contributions are zero.
double sample_bilinear(const ImageBuffer& img, int channel, double x, double y);

/// Render img under the forward transform t into an outWidth x outHeight
/// canvas. Inverse mapping: each output pixel pulls from t^-1(p) with
/// bilinear interpolation; samples outside img fill with 0.
ImageBuffer resample(const ImageBuffer& img, const AffineTransform2D& t, int outWidth, int outHeight);

/// Same contract for a TPS forward warp. The inverse is evaluated exactly on
/// a coarse lattice (fixed-point iteration seeded from the affine part) and
/// bilinearly interpolated in between; the deformations this pipeline
/// produces are smooth at that scale.
ImageBuffer resample(const ImageBuffer& img, const TpsWarp& t, int outWidth, int outHeight);

/// Render through an explicit pull map: pull(outputCoord) = sourceCoord.
/// Evaluated per pixel; no inversion involved.
ImageBuffer resample_pull(const ImageBuffer& img, const PointMap& pull, int outWidth, int outHeight);

/// Render through a pull map evaluated on a lattice with the given spacing
/// and bilinearly interpolated between nodes. Spacing 1 degenerates to
/// resample_pull.
ImageBuffer resample_pull_grid(const ImageBuffer& img, const PointMap& pull, int outWidth, int outHeight,
                               int gridSpacing);

}  // namespace histreg
