#include "histreg/eval/visual.hpp"

#include <algorithm>

namespace histreg::metrics {

ImageBuffer checkerboard(const ImageBuffer& a, const ImageBuffer& b, int tile) {
  if (!a.sameShape(b)) throw DimensionMismatch("checkerboard: images differ in shape");
  if (tile < 1) throw Error("checkerboard: tile must be >= 1");
  ImageBuffer out(a.width(), a.height(), a.channels());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      const bool fromA = ((x / tile) + (y / tile)) % 2 == 0;
      const ImageBuffer& src = fromA ? a : b;
      for (int c = 0; c < a.channels(); ++c) out.at(c, y, x) = src.at(c, y, x);
    }
  }
  return out;
}

ImageBuffer overlay(const ImageBuffer& a, const ImageBuffer& b, double alpha) {
  if (!a.sameShape(b)) throw DimensionMismatch("overlay: images differ in shape");
  if (alpha < 0.0 || alpha > 1.0) throw Error("overlay: alpha must be in [0,1]");
  ImageBuffer out(a.width(), a.height(), a.channels());
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = std::clamp(alpha * a.data()[i] + (1.0 - alpha) * b.data()[i], 0.0, 1.0);
  return out;
}

}  // namespace histreg::metrics
