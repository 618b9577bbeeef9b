#include "histreg/registration/register_pair.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "histreg/core/resample.hpp"
#include "histreg/core/serialize.hpp"
#include "histreg/registration/tps_fit.hpp"

namespace histreg::reg {

PixelCoord RegistrationResult::map_point(PixelCoord p) const {
  PixelCoord q = rigid.apply(p);
  if (nonrigidCoarse) q = nonrigidCoarse->apply(q);
  if (nonrigidFine) q = nonrigidFine->apply(q);
  return q;
}

PixelCoord RegistrationResult::pull_point(PixelCoord p) const {
  PixelCoord q = p;
  if (pullFine) q = pullFine->apply(q);
  if (pullCoarse) q = pullCoarse->apply(q);
  return rigid.inverse().apply(q);
}

PointMap RegistrationResult::forward_map() const {
  RegistrationResult copy = *this;
  return [copy](PixelCoord p) { return copy.map_point(p); };
}

PointMap RegistrationResult::pull_map() const {
  RegistrationResult copy = *this;
  const AffineTransform2D rigidInv = copy.rigid.inverse();
  return [copy, rigidInv](PixelCoord p) {
    PixelCoord q = p;
    if (copy.pullFine) q = copy.pullFine->apply(q);
    if (copy.pullCoarse) q = copy.pullCoarse->apply(q);
    return rigidInv.apply(q);
  };
}

namespace {

struct WorkingImage {
  ImageBuffer image;   // grayscale, working resolution
  double scale = 1.0;  // working = scale * full
};

WorkingImage downscale_to(const ImageBuffer& img, int maxDim) {
  WorkingImage out;
  const int dim = std::max(img.width(), img.height());
  if (dim <= maxDim) {
    out.image = to_gray(img);
    out.scale = 1.0;
    return out;
  }
  const double s = static_cast<double>(maxDim) / dim;
  const ImageBuffer gray = to_gray(img);
  // light prefilter against aliasing before the bilinear pull
  const ImageBuffer blurred = pre::denoise(gray, 0.5 / s - 0.5 + 0.3);
  const int w = std::max(1, static_cast<int>(std::lround(img.width() * s)));
  const int h = std::max(1, static_cast<int>(std::lround(img.height() * s)));
  out.image = resample(blurred, AffineTransform2D::scaling(s, s), w, h);
  out.scale = s;
  return out;
}

MatchSet unscale_matches(const MatchSet& matches, double movingScale, double referenceScale) {
  MatchSet out = matches;
  for (auto& m : out) {
    m.movingPoint = (1.0 / movingScale) * m.movingPoint;
    m.referencePoint = (1.0 / referenceScale) * m.referencePoint;
  }
  return out;
}

MatchSet apply_to_moving(const MatchSet& matches, const AffineTransform2D& t) {
  MatchSet out = matches;
  for (auto& m : out) m.movingPoint = t.apply(m.movingPoint);
  return out;
}

}  // namespace

RegistrationResult register_pair(const ImageBuffer& moving, const ImageBuffer& reference,
                                 const RegistrationConfig& cfg) {
  RegistrationDiagnostics diag;
  diag.preprocessing = cfg.preprocessingApplied;

  const WorkingImage workMov = downscale_to(moving, cfg.workingMaxDim);
  const WorkingImage workRef = downscale_to(reference, cfg.workingMaxDim);

  const std::vector<feat::Keypoint> kpMov = feat::detect_keypoints(workMov.image, cfg.detect);
  const std::vector<feat::Keypoint> kpRef = feat::detect_keypoints(workRef.image, cfg.detect);
  diag.keypointsMoving = static_cast<int>(kpMov.size());
  diag.keypointsReference = static_cast<int>(kpRef.size());

  const feat::DescribedKeypoints descMov = feat::describe(workMov.image, kpMov, cfg.detect.octaves);
  const feat::DescribedKeypoints descRef = feat::describe(workRef.image, kpRef, cfg.detect.octaves);

  MatchSet rawMatches;
  if (!descMov.descriptors.empty() && !descRef.descriptors.empty())
    rawMatches = feat::match(descMov, descRef, cfg.matchRatio);
  diag.rawMatches = static_cast<int>(rawMatches.size());

  RansacResult ransac;
  try {
    RansacConfig rcfg = cfg.ransac;
    rcfg.seed = cfg.seed;
    ransac = ransac_affine(rawMatches, rcfg);
  } catch (const Error& e) {
    diag.failureReason = e.what();
    throw RegistrationFailed(std::string("register_pair: rigid stage failed: ") + e.what(), diag);
  }
  diag.ransacInliers = static_cast<int>(ransac.inliers.size());

  TukeyResult tukey;
  MatchSet afterTukey;
  try {
    tukey = tukey_refine(ransac.inliers, ransac.transform, cfg.tukey);
    for (std::size_t i = 0; i < ransac.inliers.size(); ++i)
      if (tukey.weights[i] > 0.0) afterTukey.push_back(ransac.inliers[i]);
  } catch (const DegenerateWeights& e) {
    diag.failureReason = e.what();
    throw RegistrationFailed(std::string("register_pair: tukey stage failed: ") + e.what(), diag);
  }
  diag.tukeyInliers = static_cast<int>(afterTukey.size());

  const MatchSet filtered = neighborhood_filter(afterTukey, cfg.neighborhood);
  diag.filteredInliers = static_cast<int>(filtered.size());
  diag.inlierRatio =
      rawMatches.empty() ? 0.0 : static_cast<double>(filtered.size()) / static_cast<double>(rawMatches.size());

  // Transforms are fit on full-resolution coordinates.
  const MatchSet fullRes = unscale_matches(filtered, workMov.scale, workRef.scale);

  RegistrationResult result;
  result.inliers = fullRes;
  result.keypointCount = static_cast<int>(fullRes.size());
  result.stageUsed = Stage::rigidOnly;

  try {
    result.rigid = fit_affine_least_squares(fullRes);
  } catch (const Error&) {
    // fall back to the working-resolution tukey estimate conjugated by scale
    const AffineTransform2D toWork = AffineTransform2D::scaling(workMov.scale, workMov.scale);
    const AffineTransform2D fromWork =
        AffineTransform2D::scaling(1.0 / workRef.scale, 1.0 / workRef.scale);
    result.rigid = compose(fromWork, compose(tukey.transform, toWork));
  }

  // Coarse TPS over the rigid-mapped inliers. Control points are capped by
  // deterministic stride subsampling; beyond a few hundred the smoothing fit
  // stops improving while the dense solve grows cubically.
  if (fullRes.size() >= 3) {
    try {
      MatchSet rigidFrame = apply_to_moving(fullRes, result.rigid);
      if (rigidFrame.size() > static_cast<std::size_t>(cfg.maxTpsControlPoints)) {
        MatchSet sampled;
        const double stride = static_cast<double>(rigidFrame.size()) / cfg.maxTpsControlPoints;
        for (int i = 0; i < cfg.maxTpsControlPoints; ++i)
          sampled.push_back(rigidFrame[static_cast<std::size_t>(i * stride)]);
        rigidFrame = std::move(sampled);
      }
      result.nonrigidCoarse = estimate_tps_forward(rigidFrame, cfg.coarseLambda);
      result.pullCoarse = estimate_tps(rigidFrame, cfg.coarseLambda);
      result.stageUsed = Stage::coarse;
    } catch (const SingularSystem&) {
      result.nonrigidCoarse.reset();
      result.pullCoarse.reset();
    }
  }

  // Fine stage: render with the pull chain so far, then block-match.
  if (result.stageUsed == Stage::coarse) {
    const AffineTransform2D rigidInv = result.rigid.inverse();
    const TpsWarp& pullCoarse = *result.pullCoarse;
    const PointMap pull2 = [&rigidInv, &pullCoarse](PixelCoord p) {
      return rigidInv.apply(pullCoarse.apply(p));
    };
    const ImageBuffer rendered =
        resample_pull_grid(moving, pull2, reference.width(), reference.height(), 4);

    TissueMask refMask;
    try {
      refMask = pre::otsu_mask(reference, cfg.maskPolarity);
    } catch (const DegenerateHistogram&) {
      refMask = TissueMask(reference.width(), reference.height(), true);
    }

    const BlockMatchResult blocks = block_match_refine(rendered, reference, refMask, cfg.blockMatch);
    diag.blockMatches = static_cast<int>(blocks.matches.size());
    if (!blocks.nccValues.empty()) {
      double s = 0.0;
      for (double v : blocks.nccValues) s += v;
      diag.meanBlockNcc = s / static_cast<double>(blocks.nccValues.size());
    }

    if (blocks.matches.size() >= 3) {
      try {
        result.nonrigidFine = estimate_tps_forward(blocks.matches, cfg.fineLambda);
        result.pullFine = estimate_tps(blocks.matches, cfg.fineLambda);
        result.stageUsed = Stage::fine;
      } catch (const SingularSystem&) {
        result.nonrigidFine.reset();
        result.pullFine.reset();
      }
    }
  }

  result.diagnostics = diag;
  return result;
}

namespace {

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::rigidOnly: return "rigid";
    case Stage::coarse: return "coarse";
    case Stage::fine: return "fine";
  }
  return "rigid";
}

}  // namespace

void write_registration(const std::string& path, const RegistrationResult& result) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "# registration v1\n";
  os << "stage_used " << stage_name(result.stageUsed) << '\n';
  os << "stage rigid\n";
  write_transform(os, Transform(result.rigid));
  if (result.nonrigidCoarse) {
    os << "stage coarse\n";
    write_transform(os, Transform(*result.nonrigidCoarse));
  }
  if (result.nonrigidFine) {
    os << "stage fine\n";
    write_transform(os, Transform(*result.nonrigidFine));
  }
  os << "diagnostics\n";
  os << "keypoints_moving " << result.diagnostics.keypointsMoving << '\n';
  os << "keypoints_reference " << result.diagnostics.keypointsReference << '\n';
  os << "raw_matches " << result.diagnostics.rawMatches << '\n';
  os << "ransac_inliers " << result.diagnostics.ransacInliers << '\n';
  os << "tukey_inliers " << result.diagnostics.tukeyInliers << '\n';
  os << "filtered_inliers " << result.diagnostics.filteredInliers << '\n';
  os << "inlier_ratio " << format_double(result.diagnostics.inlierRatio) << '\n';
  os << "block_matches " << result.diagnostics.blockMatches << '\n';
  os << "mean_block_ncc " << format_double(result.diagnostics.meanBlockNcc) << '\n';
  os << "keypoint_count " << result.keypointCount << '\n';
  if (!result.diagnostics.preprocessing.empty()) os << "preprocessing " << result.diagnostics.preprocessing << '\n';
}

std::vector<int> keypoint_counts(const std::vector<RegistrationResult>& results) {
  std::vector<int> counts;
  counts.reserve(results.size());
  for (const RegistrationResult& r : results) counts.push_back(r.keypointCount);
  return counts;
}

PointMap read_registration_map(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::string header;
  if (!std::getline(is, header) || header != "# registration v1") {
    // plain transform file: a single stage
    is.clear();
    is.seekg(0);
    const Transform t = read_transform(is);
    if (std::holds_alternative<AffineTransform2D>(t)) {
      const AffineTransform2D a = std::get<AffineTransform2D>(t);
      return [a](PixelCoord p) { return a.apply(p); };
    }
    const TpsWarp w = std::get<TpsWarp>(t);
    return [w](PixelCoord p) { return w.apply(p); };
  }

  auto stages = std::make_shared<std::vector<Transform>>();
  std::string line;
  int lineNo = 1;
  while (std::getline(is, line)) {
    ++lineNo;
    std::istringstream ls(line);
    std::string key, value;
    ls >> key >> value;
    if (key == "stage") {
      stages->push_back(read_transform(is));
    } else if (key == "diagnostics") {
      break;  // trailing metadata
    } else if (key == "stage_used" || key.empty()) {
      continue;
    } else {
      throw ParseError("registration file: unexpected field '" + key + "'", lineNo);
    }
  }
  if (stages->empty()) throw ParseError("registration file: no stages", lineNo);

  return [stages](PixelCoord p) {
    for (const Transform& t : *stages) {
      if (std::holds_alternative<AffineTransform2D>(t))
        p = std::get<AffineTransform2D>(t).apply(p);
      else
        p = std::get<TpsWarp>(t).apply(p);
    }
    return p;
  };
}

}  // namespace histreg::reg
