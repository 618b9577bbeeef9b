#include "histreg/pipeline/run.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "histreg/core/resample.hpp"
#include "histreg/core/serialize.hpp"
#include "histreg/eval/landmarks.hpp"
#include "histreg/eval/visual.hpp"
#include "histreg/io/image_io.hpp"
#include "histreg/stain/lab.hpp"
#include "histreg/stain/stain_matrix.hpp"
#include "histreg/stain/tiles.hpp"

namespace fs = std::filesystem;

namespace histreg::run {

std::string to_string(ColorMethod m) {
  switch (m) {
    case ColorMethod::none: return "none";
    case ColorMethod::reinhard: return "reinhard";
    case ColorMethod::macenko: return "macenko";
    case ColorMethod::vahadane: return "vahadane";
    case ColorMethod::externalTiles: return "external_tiles";
  }
  return "none";
}

ColorMethod color_method_from_string(const std::string& s) {
  if (s == "none") return ColorMethod::none;
  if (s == "reinhard") return ColorMethod::reinhard;
  if (s == "macenko") return ColorMethod::macenko;
  if (s == "vahadane") return ColorMethod::vahadane;
  if (s == "external_tiles" || s == "externaltiles") return ColorMethod::externalTiles;
  throw Error("unknown color method: " + s);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) parts.push_back(cur);
  }
  return parts;
}

pre::MaskPolarity polarity_from_string(const std::string& s, int line) {
  if (s == "dark" || s == "dark_foreground") return pre::MaskPolarity::darkForeground;
  if (s == "bright" || s == "bright_foreground") return pre::MaskPolarity::brightForeground;
  throw ParseError("config: bad mask polarity '" + s + "'", line);
}

double to_double(const std::string& s, int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("config: bad number '" + s + "'", line);
  }
}

int to_int(const std::string& s, int line) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("config: bad integer '" + s + "'", line);
  }
}

bool to_bool(const std::string& s, int line) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ParseError("config: bad boolean '" + s + "'", line);
}

}  // namespace

PipelineConfig parse_config(std::istream& is, const std::string& sourceName) {
  PipelineConfig cfg;
  cfg.methods.clear();
  std::string line;
  int lineNo = 0;
  int pairIndex = 0;
  while (std::getline(is, line)) {
    ++lineNo;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(sourceName + ": expected 'key = value' at line " + std::to_string(lineNo), lineNo);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "pair") {
      const std::vector<std::string> parts = split_list(value);
      if (parts.size() != 2 && parts.size() != 4)
        throw ParseError(sourceName + ": pair needs 2 or 4 paths at line " + std::to_string(lineNo), lineNo);
      PairSpec p;
      p.id = "pair" + std::to_string(pairIndex++);
      p.movingPath = parts[0];
      p.referencePath = parts[1];
      if (parts.size() == 4) {
        p.movingLandmarksPath = parts[2];
        p.referenceLandmarksPath = parts[3];
      }
      cfg.pairs.push_back(std::move(p));
    } else if (key == "methods" || key == "method") {
      for (const std::string& m : split_list(value)) cfg.methods.push_back(color_method_from_string(m));
    } else if (key == "invert_moving") {
      if (value == "both")
        cfg.invertMoving = InvertSetting::both;
      else
        cfg.invertMoving = to_bool(value, lineNo) ? InvertSetting::on : InvertSetting::off;
    } else if (key == "out_dir") {
      cfg.outDir = value;
    } else if (key == "tile_dir") {
      cfg.tileDir = value;
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
    } else if (key == "jobs") {
      cfg.jobs = to_int(value, lineNo);
    } else if (key == "save_images") {
      cfg.saveImages = to_bool(value, lineNo);
    } else if (key == "stretch_low") {
      cfg.preprocess.stretchLowPercentile = to_double(value, lineNo);
    } else if (key == "stretch_high") {
      cfg.preprocess.stretchHighPercentile = to_double(value, lineNo);
    } else if (key == "denoise_sigma") {
      cfg.preprocess.denoiseSigma = to_double(value, lineNo);
    } else if (key == "moving_mask_polarity") {
      cfg.movingMaskPolarity = polarity_from_string(value, lineNo);
    } else if (key == "reference_mask_polarity") {
      cfg.referenceMaskPolarity = polarity_from_string(value, lineNo);
    } else if (key == "working_max_dim") {
      cfg.registration.workingMaxDim = to_int(value, lineNo);
    } else if (key == "max_keypoints") {
      cfg.registration.detect.maxCount = to_int(value, lineNo);
    } else if (key == "detect_threshold") {
      cfg.registration.detect.threshold = to_double(value, lineNo);
    } else if (key == "match_ratio") {
      cfg.registration.matchRatio = to_double(value, lineNo);
    } else if (key == "ransac_threshold") {
      cfg.registration.ransac.threshold = to_double(value, lineNo);
    } else if (key == "ransac_iterations") {
      cfg.registration.ransac.maxIterations = to_int(value, lineNo);
    } else if (key == "tukey_c") {
      cfg.registration.tukey.c = to_double(value, lineNo);
    } else if (key == "neighborhood_k") {
      cfg.registration.neighborhood.k = to_int(value, lineNo);
    } else if (key == "neighborhood_factor") {
      cfg.registration.neighborhood.deviationFactor = to_double(value, lineNo);
    } else if (key == "coarse_lambda") {
      cfg.registration.coarseLambda = to_double(value, lineNo);
    } else if (key == "fine_lambda") {
      cfg.registration.fineLambda = to_double(value, lineNo);
    } else if (key == "block_size") {
      cfg.registration.blockMatch.blockSize = to_int(value, lineNo);
    } else if (key == "block_search_radius") {
      cfg.registration.blockMatch.searchRadius = to_int(value, lineNo);
    } else if (key == "block_min_ncc") {
      cfg.registration.blockMatch.minNcc = to_double(value, lineNo);
    } else {
      throw ParseError(sourceName + ": unknown key '" + key + "' at line " + std::to_string(lineNo), lineNo);
    }
  }
  if (cfg.methods.empty()) cfg.methods.push_back(ColorMethod::none);
  return cfg;
}

PipelineConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  return parse_config(is, path);
}

namespace {

struct Combo {
  ColorMethod method;
  bool invert;
  std::string name;
};

std::vector<Combo> build_combos(const PipelineConfig& cfg) {
  std::vector<Combo> combos;
  for (ColorMethod m : cfg.methods) {
    if (cfg.invertMoving == InvertSetting::off || cfg.invertMoving == InvertSetting::both)
      combos.push_back({m, false, to_string(m)});
    if (cfg.invertMoving == InvertSetting::on || cfg.invertMoving == InvertSetting::both)
      combos.push_back({m, true, to_string(m) + "_inv"});
  }
  return combos;
}

pre::MaskPolarity flipped(pre::MaskPolarity p) {
  return p == pre::MaskPolarity::darkForeground ? pre::MaskPolarity::brightForeground
                                                : pre::MaskPolarity::darkForeground;
}

struct PairArtifacts {
  PairOutcome outcome;
  nlohmann::json manifestEntry;
};

PairArtifacts process_pair(const PipelineConfig& cfg, const Combo& combo, const PairSpec& pair) {
  PairArtifacts art;
  PairOutcome& out = art.outcome;
  out.method = combo.name;
  out.pairId = pair.id;

  nlohmann::json& entry = art.manifestEntry;
  entry["pair_id"] = pair.id;
  entry["method"] = combo.name;
  entry["moving"] = pair.movingPath;
  entry["reference"] = pair.referencePath;

  const fs::path pairDir = fs::path(cfg.outDir) / combo.name / pair.id;

  try {
    ImageBuffer moving = io::load_image(pair.movingPath);
    ImageBuffer reference = io::load_image(pair.referencePath);

    // intensity-domain preprocessing
    moving = pre::contrast_stretch(moving, cfg.preprocess);
    reference = pre::contrast_stretch(reference, cfg.preprocess);
    pre::MaskPolarity movingPolarity = cfg.movingMaskPolarity;
    if (combo.invert) {
      moving = pre::invert(moving);
      movingPolarity = flipped(movingPolarity);
    }
    moving = pre::denoise(moving, cfg.preprocess.denoiseSigma);
    reference = pre::denoise(reference, cfg.preprocess.denoiseSigma);

    const TissueMask movingMask = pre::otsu_mask(moving, movingPolarity);
    const TissueMask referenceMask = pre::otsu_mask(reference, cfg.referenceMaskPolarity);

    // color transform toward the reference appearance
    switch (combo.method) {
      case ColorMethod::none:
        break;
      case ColorMethod::reinhard: {
        const stain::LabStats target = stain::compute_lab_stats(stain::rgb_to_lab(reference), referenceMask);
        moving = stain::reinhard_transfer(moving, movingMask, target);
        break;
      }
      case ColorMethod::macenko: {
        const stain::StainModel src = stain::macenko_estimate(moving, movingMask);
        const stain::StainModel dst = stain::macenko_estimate(reference, referenceMask);
        moving = stain::stain_normalize(moving, src, dst);
        break;
      }
      case ColorMethod::vahadane: {
        const stain::StainModel src = stain::vahadane_estimate(moving, movingMask).model;
        const stain::StainModel dst = stain::vahadane_estimate(reference, referenceMask).model;
        moving = stain::stain_normalize(moving, src, dst);
        break;
      }
      case ColorMethod::externalTiles: {
        const fs::path dir = fs::path(cfg.tileDir) / pair.id;
        const stain::TileGrid grid = stain::read_grid_manifest((dir / "grid.json").string());
        moving = stain::apply_external_tiles(moving, grid, dir.string());
        break;
      }
    }

    reg::RegistrationConfig rcfg = cfg.registration;
    rcfg.seed = cfg.seed;
    rcfg.maskPolarity = cfg.referenceMaskPolarity;
    rcfg.preprocessingApplied =
        "contrast_stretch" + std::string(combo.invert ? "+invert" : "") + "+denoise+" + combo.name;
    const reg::RegistrationResult result = reg::register_pair(moving, reference, rcfg);

    out.ok = true;
    out.stageUsed = result.stageUsed;
    out.keypointCount = result.keypointCount;

    fs::create_directories(pairDir);
    reg::write_registration((pairDir / "transform.txt").string(), result);

    if (cfg.saveImages) {
      const ImageBuffer registered =
          resample_pull_grid(moving, result.pull_map(), reference.width(), reference.height(), 4);
      io::save_png(registered, (pairDir / "registered.png").string());
      io::save_png(metrics::checkerboard(reference, registered), (pairDir / "checkerboard.png").string());
      io::save_png(metrics::overlay(reference, registered), (pairDir / "overlay.png").string());
    }

    if (pair.movingLandmarksPath && pair.referenceLandmarksPath) {
      const auto movingLm = metrics::read_landmarks(*pair.movingLandmarksPath);
      const auto referenceLm = metrics::read_landmarks(*pair.referenceLandmarksPath);
      const auto pairs = metrics::pair_landmarks(movingLm, referenceLm);
      metrics::PairMetrics pm = metrics::point_eval(pairs, result.forward_map(), reference);
      pm.keypointCount = result.keypointCount;
      out.hasLandmarks = true;
      out.medianRtre = pm.medianRtre;
      out.medianPointDistance = pm.medianPointDistance;
      out.medianPointDistanceNorm = pm.medianPointDistance / image_diagonal(reference);
      out.pointCount = pm.pointCount;
      entry["point_count"] = pm.pointCount;
      if (pm.expectedCountWarning) entry["point_count_warning"] = "expected 10 evaluation points";
    }

    entry["status"] = "ok";
    entry["stage_used"] = result.stageUsed == reg::Stage::fine     ? "fine"
                          : result.stageUsed == reg::Stage::coarse ? "coarse"
                                                                   : "rigid";
    entry["keypoint_count"] = result.keypointCount;
    entry["diagnostics"] = {
        {"keypoints_moving", result.diagnostics.keypointsMoving},
        {"keypoints_reference", result.diagnostics.keypointsReference},
        {"raw_matches", result.diagnostics.rawMatches},
        {"ransac_inliers", result.diagnostics.ransacInliers},
        {"tukey_inliers", result.diagnostics.tukeyInliers},
        {"filtered_inliers", result.diagnostics.filteredInliers},
        {"block_matches", result.diagnostics.blockMatches},
    };
  } catch (const reg::RegistrationFailed& e) {
    out.ok = false;
    out.failureReason = e.what();
    entry["status"] = "failed";
    entry["reason"] = e.what();
    entry["diagnostics"] = {
        {"keypoints_moving", e.diagnostics.keypointsMoving},
        {"keypoints_reference", e.diagnostics.keypointsReference},
        {"raw_matches", e.diagnostics.rawMatches},
    };
  } catch (const std::exception& e) {
    out.ok = false;
    out.failureReason = e.what();
    entry["status"] = "failed";
    entry["reason"] = e.what();
  }
  return art;
}

std::string csv_double(double v) { return format_double(v); }

}  // namespace

RunReport run_pipeline(const PipelineConfig& cfg) {
  if (cfg.pairs.empty()) throw Error("run_pipeline: no pairs configured");
  fs::create_directories(cfg.outDir);

  const std::vector<Combo> combos = build_combos(cfg);
  RunReport report;

  nlohmann::json manifest;
  manifest["seed"] = cfg.seed;
  manifest["jobs"] = cfg.jobs;
  manifest["methods"] = nlohmann::json::array();
  for (const Combo& c : combos) manifest["methods"].push_back(c.name);
  manifest["pairs"] = nlohmann::json::array();

  std::ofstream csv(fs::path(cfg.outDir) / "metrics.csv");
  if (!csv) throw IoError("cannot open metrics.csv for writing");
  csv << "method,pair_id,median_rtre,mm_rtre,am_rtre,median_point_distance,keypoint_count\n";

  std::ofstream text(fs::path(cfg.outDir) / "report.txt");
  if (!text) throw IoError("cannot open report.txt for writing");
  text << "registration run report\n";
  text << "seed " << cfg.seed << "\n";
  text << "color statistics and stain models are computed over tissue-masked pixels\n";
  text << "point distances are reported in raw pixels and normalized by the reference diagonal\n\n";

  for (const Combo& combo : combos) {
    std::vector<PairArtifacts> artifacts(cfg.pairs.size());

    const int jobs = std::max(1, cfg.jobs);
    if (jobs == 1 || cfg.pairs.size() == 1) {
      for (std::size_t i = 0; i < cfg.pairs.size(); ++i) artifacts[i] = process_pair(cfg, combo, cfg.pairs[i]);
    } else {
      std::atomic<std::size_t> next{0};
      auto worker = [&]() {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= cfg.pairs.size()) break;
          artifacts[i] = process_pair(cfg, combo, cfg.pairs[i]);
        }
      };
      std::vector<std::thread> threads;
      const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(jobs), cfg.pairs.size());
      threads.reserve(count);
      for (std::size_t t = 0; t < count; ++t) threads.emplace_back(worker);
      for (std::thread& t : threads) t.join();
    }

    std::vector<double> pairMedians, pointMedians, pointMediansNorm;
    std::vector<int> keypointCounts;
    text << "== method " << combo.name << " ==\n";
    for (PairArtifacts& art : artifacts) {
      const PairOutcome& o = art.outcome;
      report.outcomes.push_back(o);
      manifest["pairs"].push_back(std::move(art.manifestEntry));
      if (o.ok) {
        ++report.succeeded;
        keypointCounts.push_back(o.keypointCount);
      } else {
        ++report.failed;
      }

      csv << o.method << ',' << o.pairId << ',';
      if (o.ok && o.hasLandmarks) csv << csv_double(o.medianRtre);
      csv << ",,,";  // mm/am belong to summary rows
      if (o.ok && o.hasLandmarks) csv << csv_double(o.medianPointDistance);
      csv << ',';
      if (o.ok) csv << o.keypointCount;
      csv << '\n';

      text << o.pairId << ": ";
      if (!o.ok) {
        text << "FAILED (" << o.failureReason << ")\n";
        continue;
      }
      text << "ok stage=" << (o.stageUsed == reg::Stage::fine ? "fine" : o.stageUsed == reg::Stage::coarse ? "coarse" : "rigid");
      text << " keypoints=" << o.keypointCount;
      if (o.hasLandmarks) {
        text << " median_rtre=" << csv_double(o.medianRtre);
        text << " median_point_distance_px=" << csv_double(o.medianPointDistance);
        text << " median_point_distance_norm=" << csv_double(o.medianPointDistanceNorm);
        pairMedians.push_back(o.medianRtre);
        pointMedians.push_back(o.medianPointDistance);
        pointMediansNorm.push_back(o.medianPointDistanceNorm);
      }
      text << '\n';
    }

    csv << combo.name << ",ALL,,";
    if (!pairMedians.empty())
      csv << csv_double(metrics::mmrtre(pairMedians)) << ',' << csv_double(metrics::amrtre(pairMedians));
    else
      csv << ',';
    csv << ',';
    if (!pointMedians.empty()) csv << csv_double(metrics::median(pointMedians));
    csv << ',';
    if (!keypointCounts.empty()) csv << csv_double(metrics::keypoint_stats(keypointCounts).median);
    csv << '\n';

    text << "summary:";
    if (!pairMedians.empty()) {
      text << " mm_rtre=" << csv_double(metrics::mmrtre(pairMedians));
      text << " am_rtre=" << csv_double(metrics::amrtre(pairMedians));
      text << " median_point_distance_px=" << csv_double(metrics::median(pointMedians));
      text << " median_point_distance_norm=" << csv_double(metrics::median(pointMediansNorm));
    }
    if (!keypointCounts.empty()) {
      const metrics::KeypointStats ks = metrics::keypoint_stats(keypointCounts);
      text << " keypoints[min=" << ks.min << " max=" << ks.max << " median=" << csv_double(ks.median)
           << " mean=" << csv_double(ks.mean) << "]";
    }
    text << "\n\n";
  }

  std::ofstream manifestFile(fs::path(cfg.outDir) / "manifest.json");
  if (!manifestFile) throw IoError("cannot open manifest.json for writing");
  manifestFile << manifest.dump(2) << '\n';

  return report;
}

metrics::PairMetrics eval_only(const std::string& transformPath, const std::string& movingLandmarksPath,
                               const std::string& referenceLandmarksPath, const std::string& referenceImagePath,
                               const std::string& outCsvPath) {
  const PointMap map = reg::read_registration_map(transformPath);
  const auto movingLm = metrics::read_landmarks(movingLandmarksPath);
  const auto referenceLm = metrics::read_landmarks(referenceLandmarksPath);
  const auto pairs = metrics::pair_landmarks(movingLm, referenceLm);
  const ImageBuffer reference = io::load_image(referenceImagePath);
  const metrics::PairMetrics pm = metrics::point_eval(pairs, map, reference);

  std::ofstream csv(outCsvPath);
  if (!csv) throw IoError("cannot open for writing: " + outCsvPath);
  csv << "label,distance_px,rtre\n";
  for (std::size_t i = 0; i < pairs.size(); ++i)
    csv << pairs[i].label << ',' << format_double(pm.pointDistances[i]) << ',' << format_double(pm.rtreValues[i])
        << '\n';
  csv << "MEDIAN," << format_double(pm.medianPointDistance) << ',' << format_double(pm.medianRtre) << '\n';
  return pm;
}

}  // namespace histreg::run
