#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "histreg/core/image.hpp"

namespace histreg::feat {

struct Keypoint {
  PixelCoord position;      // original-image coordinates
  double scale = 1.0;       // 2^octave
  double orientation = 0.0; // radians
  double score = 0.0;       // segment-test corner response
  int octave = 0;
};

/// 512 pairwise intensity comparisons over a concentric sampling pattern.
struct BinaryDescriptor {
  std::array<std::uint64_t, 8> bits{};

  int hamming(const BinaryDescriptor& other) const {
    int d = 0;
    for (int i = 0; i < 8; ++i) d += __builtin_popcountll(bits[i] ^ other.bits[i]);
    return d;
  }
};

struct Match {
  PixelCoord movingPoint;
  PixelCoord referencePoint;
  int descriptorDistance = 0;  // Hamming bits, <= 512
};
using MatchSet = std::vector<Match>;

struct DetectConfig {
  int maxCount = 5000;
  int octaves = 4;
  double threshold = 0.04;  // segment-test contrast threshold on [0,1] values
};

/// Multi-octave segment-test corner detection with per-octave non-max
/// suppression. Result is ordered by (score desc, y, x, octave) and capped at
/// maxCount; an empty list is valid output.
std::vector<Keypoint> detect_keypoints(const ImageBuffer& img, const DetectConfig& cfg = {});

/// Keypoints together with their descriptors. Keypoints too close to the
/// border for the sampling pattern are dropped and counted.
struct DescribedKeypoints {
  std::vector<Keypoint> keypoints;
  std::vector<BinaryDescriptor> descriptors;
  int droppedCount = 0;
};

DescribedKeypoints describe(const ImageBuffer& img, const std::vector<Keypoint>& keypoints, int octaves = 4);

/// Hamming nearest-neighbor matching with a ratio test (nearest <
/// ratio * second-nearest) and mutual cross-check. Moving side is `a`.
MatchSet match(const DescribedKeypoints& a, const DescribedKeypoints& b, double ratio = 0.8);

}  // namespace histreg::feat
