#pragma once

#include "histreg/core/image.hpp"

namespace histreg::metrics {

/// Alternating tiles from a and b: pixel comes from a when
/// (floor(x/tile) + floor(y/tile)) is even. Throws DimensionMismatch.
ImageBuffer checkerboard(const ImageBuffer& a, const ImageBuffer& b, int tile = 64);

/// alpha*a + (1-alpha)*b, clamped to [0,1]. Throws DimensionMismatch.
ImageBuffer overlay(const ImageBuffer& a, const ImageBuffer& b, double alpha = 0.5);

}  // namespace histreg::metrics
