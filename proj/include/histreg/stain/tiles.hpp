#pragma once

#include <string>
#include <vector>

#include "histreg/core/image.hpp"

namespace histreg::stain {

/// Sliding-window tiling with overlap. Origins step by tileSize - overlap;
/// the last row/column is clamped so tiles never cross the image bounds.
struct TileGrid {
  int tileSize = 512;
  int overlap = 256;
  int imageWidth = 0;
  int imageHeight = 0;

  static TileGrid cover(int imageWidth, int imageHeight, int tileSize = 512, int overlap = 256);

  const std::vector<int>& originsX() const { return originsX_; }
  const std::vector<int>& originsY() const { return originsY_; }
  int rows() const { return static_cast<int>(originsY_.size()); }
  int cols() const { return static_cast<int>(originsX_.size()); }
  int tileWidth(int col) const;
  int tileHeight(int row) const;

 private:
  std::vector<int> originsX_;
  std::vector<int> originsY_;
};

struct Tile {
  ImageBuffer image;
  int originX = 0;
  int originY = 0;
};

/// Weighted reassembly: out(p) = sum_t w_t(p) tile_t(p) / sum_t w_t(p) with a
/// 2-D Gaussian weight (sigma = tileSize/4) centered on each tile in
/// tile-local coordinates. A pixel covered by a single tile copies that
/// tile's value verbatim. Throws CoverageGap when a pixel is covered by no tile.
ImageBuffer blend_tiles(const std::vector<Tile>& tiles, const TileGrid& grid, int outWidth, int outHeight);

/// Per-channel bilateral filter (Gaussian spatial and range kernels).
ImageBuffer bilateral_filter(const ImageBuffer& img, double spatialSigma, double rangeSigma);

/// Load externally transformed tiles named tile_{row}_{col}.png from tileDir,
/// blend them over the grid, and (unless disabled) post-filter with a
/// bilateral pass followed by a mild Gaussian blur.
/// Throws MissingTile (naming the tile) or DimensionMismatch.
ImageBuffer apply_external_tiles(const ImageBuffer& img, const TileGrid& grid, const std::string& tileDir,
                                 bool postFilter = true);

/// Slice an image into grid tiles (the inverse of reassembly; also used to
/// produce the external-tile protocol's inputs).
std::vector<Tile> slice_tiles(const ImageBuffer& img, const TileGrid& grid);

/// Write grid.json + tile_{row}_{col}.png files for an image.
void write_tile_dir(const ImageBuffer& img, const TileGrid& grid, const std::string& dir);

/// Read a grid.json manifest (tileSize, overlap, width, height).
TileGrid read_grid_manifest(const std::string& path);
void write_grid_manifest(const TileGrid& grid, const std::string& path);

}  // namespace histreg::stain
