#pragma once

#include <optional>
#include <string>
#include <vector>

#include "histreg/eval/metrics.hpp"
#include "histreg/preprocess/preprocess.hpp"
#include "histreg/registration/register_pair.hpp"

namespace histreg::run {

enum class ColorMethod { none, reinhard, macenko, vahadane, externalTiles };

std::string to_string(ColorMethod m);
ColorMethod color_method_from_string(const std::string& s);

struct PairSpec {
  std::string id;
  std::string movingPath;
  std::string referencePath;
  std::optional<std::string> movingLandmarksPath;
  std::optional<std::string> referenceLandmarksPath;
};

enum class InvertSetting { off, on, both };

struct PipelineConfig {
  std::vector<PairSpec> pairs;
  std::vector<ColorMethod> methods = {ColorMethod::none};
  InvertSetting invertMoving = InvertSetting::off;
  pre::PreprocessConfig preprocess;
  pre::MaskPolarity movingMaskPolarity = pre::MaskPolarity::brightForeground;   // raw moving image
  pre::MaskPolarity referenceMaskPolarity = pre::MaskPolarity::darkForeground;
  reg::RegistrationConfig registration;
  std::string outDir = "out";
  std::string tileDir;  // externalTiles inputs: <tileDir>/<pair_id>/{grid.json,tile_r_c.png}
  std::uint64_t seed = 0;
  int jobs = 1;
  bool saveImages = true;
};

/// Parse the flat key-value config format (one `key = value` per line, `#`
/// comments; `pair = moving, reference[, moving_lm, reference_lm]` may repeat).
PipelineConfig parse_config_file(const std::string& path);
PipelineConfig parse_config(std::istream& is, const std::string& sourceName);

struct PairOutcome {
  std::string method;  // combo name, e.g. "reinhard" / "reinhard_inv"
  std::string pairId;
  bool ok = false;
  std::string failureReason;
  reg::Stage stageUsed = reg::Stage::rigidOnly;
  int keypointCount = 0;
  bool hasLandmarks = false;
  double medianRtre = 0.0;
  double medianPointDistance = 0.0;
  double medianPointDistanceNorm = 0.0;
  int pointCount = 0;
};

struct RunReport {
  std::vector<PairOutcome> outcomes;
  int succeeded = 0;
  int failed = 0;
};

/// Execute the batch: per method/inversion combo and pair, preprocess,
/// color-transform, register, render, score, and write artifacts under
/// outDir/<combo>/<pair_id>/. Per-pair failures are recorded in the manifest
/// without aborting. Returns the report; exit status handling is the CLI's.
RunReport run_pipeline(const PipelineConfig& cfg);

/// Re-score a stored transform against landmark files without registering.
/// Writes a per-landmark CSV; returns the metrics.
metrics::PairMetrics eval_only(const std::string& transformPath, const std::string& movingLandmarksPath,
                               const std::string& referenceLandmarksPath, const std::string& referenceImagePath,
                               const std::string& outCsvPath);

}  // namespace histreg::run
