#pragma once

#include <string>
#include <vector>

#include "histreg/core/image.hpp"
#include "histreg/eval/metrics.hpp"

namespace histreg::metrics {

struct Landmark {
  std::string label;
  PixelCoord point;
};

/// Landmark file: header line `# landmarks v1`, then one `label,x,y` line per
/// point. 0-based pixel coordinates, origin top-left, y downward.
/// Throws ParseError with the offending line number.
std::vector<Landmark> read_landmarks(const std::string& path);
void write_landmarks(const std::string& path, const std::vector<Landmark>& points);

/// Join two landmark files by label (order-independent). Throws ParseError
/// when a label is missing on either side or duplicated.
std::vector<LandmarkPair> pair_landmarks(const std::vector<Landmark>& moving, const std::vector<Landmark>& reference);

}  // namespace histreg::metrics
