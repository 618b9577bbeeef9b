#include "histreg/stain/tiles.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "histreg/io/image_io.hpp"
#include "histreg/preprocess/preprocess.hpp"

namespace histreg::stain {

namespace {

std::vector<int> axis_origins(int extent, int tileSize, int overlap) {
  std::vector<int> origins;
  if (extent <= tileSize) {
    origins.push_back(0);
    return origins;
  }
  const int stride = tileSize - overlap;
  int o = 0;
  while (true) {
    if (o + tileSize >= extent) {
      origins.push_back(extent - tileSize);
      break;
    }
    origins.push_back(o);
    o += stride;
  }
  return origins;
}

}  // namespace

TileGrid TileGrid::cover(int imageWidth, int imageHeight, int tileSize, int overlap) {
  if (overlap < 0 || overlap >= tileSize) throw Error("TileGrid: need 0 <= overlap < tileSize");
  if (imageWidth < 1 || imageHeight < 1) throw Error("TileGrid: bad image dimensions");
  TileGrid g;
  g.tileSize = tileSize;
  g.overlap = overlap;
  g.imageWidth = imageWidth;
  g.imageHeight = imageHeight;
  g.originsX_ = axis_origins(imageWidth, tileSize, overlap);
  g.originsY_ = axis_origins(imageHeight, tileSize, overlap);
  return g;
}

int TileGrid::tileWidth(int col) const { return std::min(tileSize, imageWidth - originsX_[col]); }
int TileGrid::tileHeight(int row) const { return std::min(tileSize, imageHeight - originsY_[row]); }

ImageBuffer blend_tiles(const std::vector<Tile>& tiles, const TileGrid& grid, int outWidth, int outHeight) {
  if (tiles.empty()) throw CoverageGap("blend_tiles: no tiles");
  const int channels = tiles.front().image.channels();
  const double sigma = grid.tileSize / 4.0;
  const double invTwoSigmaSq = 1.0 / (2.0 * sigma * sigma);

  std::vector<double> num(static_cast<std::size_t>(outWidth) * outHeight * channels, 0.0);
  std::vector<double> den(static_cast<std::size_t>(outWidth) * outHeight, 0.0);
  std::vector<int> cover(static_cast<std::size_t>(outWidth) * outHeight, 0);
  std::vector<const Tile*> solo(static_cast<std::size_t>(outWidth) * outHeight, nullptr);

  for (const Tile& t : tiles) {
    if (t.image.channels() != channels) throw DimensionMismatch("blend_tiles: mixed channel counts");
    const int tw = t.image.width();
    const int th = t.image.height();
    const double cx = (tw - 1) / 2.0;
    const double cy = (th - 1) / 2.0;
    for (int ly = 0; ly < th; ++ly) {
      const int y = t.originY + ly;
      if (y < 0 || y >= outHeight) continue;
      for (int lx = 0; lx < tw; ++lx) {
        const int x = t.originX + lx;
        if (x < 0 || x >= outWidth) continue;
        const double dx = lx - cx;
        const double dy = ly - cy;
        const double w = std::exp(-(dx * dx + dy * dy) * invTwoSigmaSq);
        const std::size_t pi = static_cast<std::size_t>(y) * outWidth + x;
        den[pi] += w;
        cover[pi] += 1;
        solo[pi] = &t;
        for (int c = 0; c < channels; ++c)
          num[static_cast<std::size_t>(c) * outWidth * outHeight + pi] += w * t.image.at(c, ly, lx);
      }
    }
  }

  ImageBuffer out(outWidth, outHeight, channels);
  for (int y = 0; y < outHeight; ++y) {
    for (int x = 0; x < outWidth; ++x) {
      const std::size_t pi = static_cast<std::size_t>(y) * outWidth + x;
      if (cover[pi] == 0)
        throw CoverageGap("blend_tiles: pixel (" + std::to_string(x) + "," + std::to_string(y) + ") uncovered");
      if (cover[pi] == 1) {
        const Tile& t = *solo[pi];
        for (int c = 0; c < channels; ++c) out.at(c, y, x) = t.image.at(c, y - t.originY, x - t.originX);
      } else {
        for (int c = 0; c < channels; ++c)
          out.at(c, y, x) = num[static_cast<std::size_t>(c) * outWidth * outHeight + pi] / den[pi];
      }
    }
  }
  return out;
}

ImageBuffer bilateral_filter(const ImageBuffer& img, double spatialSigma, double rangeSigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * spatialSigma));
  const double invTwoSs = 1.0 / (2.0 * spatialSigma * spatialSigma);
  const double invTwoRs = 1.0 / (2.0 * rangeSigma * rangeSigma);
  const int w = img.width(), h = img.height();

  std::vector<double> spatial((2 * radius + 1) * (2 * radius + 1));
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      spatial[(dy + radius) * (2 * radius + 1) + (dx + radius)] = std::exp(-(dx * dx + dy * dy) * invTwoSs);

  ImageBuffer out(w, h, img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double center = img.at(c, y, x);
        double acc = 0.0, wsum = 0.0;
        const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
        const int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
        for (int yy = y0; yy <= y1; ++yy) {
          for (int xx = x0; xx <= x1; ++xx) {
            const double v = img.at(c, yy, xx);
            const double d = v - center;
            const double wt = spatial[(yy - y + radius) * (2 * radius + 1) + (xx - x + radius)] *
                              std::exp(-d * d * invTwoRs);
            acc += wt * v;
            wsum += wt;
          }
        }
        out.at(c, y, x) = acc / wsum;
      }
    }
  }
  return out;
}

std::vector<Tile> slice_tiles(const ImageBuffer& img, const TileGrid& grid) {
  if (img.width() != grid.imageWidth || img.height() != grid.imageHeight)
    throw DimensionMismatch("slice_tiles: grid does not match image");
  std::vector<Tile> tiles;
  tiles.reserve(static_cast<std::size_t>(grid.rows()) * grid.cols());
  for (int r = 0; r < grid.rows(); ++r) {
    for (int c = 0; c < grid.cols(); ++c) {
      const int ox = grid.originsX()[c];
      const int oy = grid.originsY()[r];
      const int tw = grid.tileWidth(c);
      const int th = grid.tileHeight(r);
      Tile t;
      t.originX = ox;
      t.originY = oy;
      t.image = ImageBuffer(tw, th, img.channels());
      for (int ch = 0; ch < img.channels(); ++ch)
        for (int y = 0; y < th; ++y)
          for (int x = 0; x < tw; ++x) t.image.at(ch, y, x) = img.at(ch, oy + y, ox + x);
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

ImageBuffer apply_external_tiles(const ImageBuffer& img, const TileGrid& grid, const std::string& tileDir,
                                 bool postFilter) {
  if (img.width() != grid.imageWidth || img.height() != grid.imageHeight)
    throw DimensionMismatch("apply_external_tiles: grid does not match image");
  std::vector<Tile> tiles;
  for (int r = 0; r < grid.rows(); ++r) {
    for (int c = 0; c < grid.cols(); ++c) {
      const std::string name = "tile_" + std::to_string(r) + "_" + std::to_string(c);
      const std::filesystem::path path = std::filesystem::path(tileDir) / (name + ".png");
      if (!std::filesystem::exists(path)) throw MissingTile("apply_external_tiles: missing " + name);
      Tile t;
      t.originX = grid.originsX()[c];
      t.originY = grid.originsY()[r];
      t.image = io::load_image(path.string());
      if (t.image.width() != grid.tileWidth(c) || t.image.height() != grid.tileHeight(r))
        throw DimensionMismatch("apply_external_tiles: " + name + " has wrong dimensions");
      tiles.push_back(std::move(t));
    }
  }
  ImageBuffer blended = blend_tiles(tiles, grid, img.width(), img.height());
  if (!postFilter) return blended;
  return pre::denoise(bilateral_filter(blended, 2.0, 0.1), 0.5);
}

void write_tile_dir(const ImageBuffer& img, const TileGrid& grid, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::vector<Tile> tiles = slice_tiles(img, grid);
  int i = 0;
  for (int r = 0; r < grid.rows(); ++r)
    for (int c = 0; c < grid.cols(); ++c, ++i) {
      const std::string name = "tile_" + std::to_string(r) + "_" + std::to_string(c) + ".png";
      io::save_png(tiles[static_cast<std::size_t>(i)].image, (std::filesystem::path(dir) / name).string());
    }
  write_grid_manifest(grid, (std::filesystem::path(dir) / "grid.json").string());
}

void write_grid_manifest(const TileGrid& grid, const std::string& path) {
  nlohmann::json j;
  j["tileSize"] = grid.tileSize;
  j["overlap"] = grid.overlap;
  j["width"] = grid.imageWidth;
  j["height"] = grid.imageHeight;
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << j.dump(2) << '\n';
}

TileGrid read_grid_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  nlohmann::json j;
  is >> j;
  return TileGrid::cover(j.at("width").get<int>(), j.at("height").get<int>(), j.at("tileSize").get<int>(),
                         j.at("overlap").get<int>());
}

}  // namespace histreg::stain
