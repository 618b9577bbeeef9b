#pragma once

#include <optional>
#include <string>

#include "histreg/core/transform.hpp"
#include "histreg/preprocess/preprocess.hpp"
#include "histreg/registration/block_match.hpp"
#include "histreg/registration/features.hpp"
#include "histreg/registration/robust.hpp"

namespace histreg::reg {

enum class DescriptorKind { brisk512 };  // single valid value; kept as an enum for forward compatibility

enum class Stage { rigidOnly, coarse, fine };

struct RegistrationConfig {
  int workingMaxDim = 1024;
  feat::DetectConfig detect;
  DescriptorKind descriptor = DescriptorKind::brisk512;
  double matchRatio = 0.8;
  RansacConfig ransac;
  TukeyConfig tukey;
  NeighborhoodConfig neighborhood;
  double coarseLambda = 1.0;
  double fineLambda = 0.1;
  int maxTpsControlPoints = 500;
  BlockMatchConfig blockMatch;
  pre::MaskPolarity maskPolarity = pre::MaskPolarity::darkForeground;
  std::uint64_t seed = 0;
  std::string preprocessingApplied;  // provenance echoed into the result file
};

struct RegistrationDiagnostics {
  int keypointsMoving = 0;
  int keypointsReference = 0;
  int rawMatches = 0;
  int ransacInliers = 0;
  int tukeyInliers = 0;
  int filteredInliers = 0;
  double inlierRatio = 0.0;
  int blockMatches = 0;
  double meanBlockNcc = 0.0;
  std::string failureReason;
  std::string preprocessing;  // provenance: which preprocessing the caller applied
};

/// Output of the registration chain. Forward warps map moving-image
/// coordinates toward the reference frame and compose as fine(coarse(rigid(p)));
/// pull warps (fit from the same correspondences with the roles swapped) map
/// reference-frame coordinates back toward the moving image and are what the
/// renderer consumes.
struct RegistrationResult {
  AffineTransform2D rigid;
  std::optional<TpsWarp> nonrigidCoarse;
  std::optional<TpsWarp> nonrigidFine;
  std::optional<TpsWarp> pullCoarse;
  std::optional<TpsWarp> pullFine;
  MatchSet inliers;       // post-filter match set, full-resolution coordinates
  int keypointCount = 0;  // == |inliers|
  Stage stageUsed = Stage::rigidOnly;
  RegistrationDiagnostics diagnostics;

  /// Composed forward map: fine(coarse(rigid(p))). Absent stages are skipped.
  PixelCoord map_point(PixelCoord p) const;

  /// Composed pull map: rigid^-1(pullCoarse(pullFine(p))).
  PixelCoord pull_point(PixelCoord p) const;

  PointMap forward_map() const;
  PointMap pull_map() const;
};

class RegistrationFailed : public Error {
 public:
  RegistrationFailed(const std::string& msg, RegistrationDiagnostics diag)
      : Error(msg), diagnostics(std::move(diag)) {}
  RegistrationDiagnostics diagnostics;
};

/// Full chain: downscale to the working resolution, detect/describe/match,
/// RANSAC -> Tukey -> neighborhood filtering, coarse TPS from the surviving
/// matches, block-match refinement at full resolution, fine TPS. Degrades to
/// coarse or rigidOnly when later stages lack points. Inputs are expected to
/// be preprocessed already.
RegistrationResult register_pair(const ImageBuffer& moving, const ImageBuffer& reference,
                                 const RegistrationConfig& cfg = {});

/// Serialize a result (forward stages + diagnostics) to the transform text
/// format; parse it back as a composed forward PointMap.
void write_registration(const std::string& path, const RegistrationResult& result);
PointMap read_registration_map(const std::string& path);

/// keypointCount of each result, in order (feed for metrics::keypoint_stats).
std::vector<int> keypoint_counts(const std::vector<RegistrationResult>& results);

}  // namespace histreg::reg
