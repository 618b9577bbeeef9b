#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "histreg/core/error.hpp"

namespace histreg {

/// A 2-D point in continuous pixel coordinates. Origin is the top-left pixel
/// center, x grows rightward, y grows downward. Values may lie outside image
/// bounds (transform outputs are unclamped).
struct PixelCoord {
  double x = 0.0;
  double y = 0.0;
};

inline PixelCoord operator+(PixelCoord a, PixelCoord b) { return {a.x + b.x, a.y + b.y}; }
inline PixelCoord operator-(PixelCoord a, PixelCoord b) { return {a.x - b.x, a.y - b.y}; }
inline PixelCoord operator*(double s, PixelCoord p) { return {s * p.x, s * p.y}; }

double distance(PixelCoord a, PixelCoord b);

/// Planar floating-point raster. Samples are stored row-major, channel-planar:
/// data[(c * height + y) * width + x]. Loaded images and every preprocessing
/// output keep samples in [0,1]; intermediate working spaces (optical density,
/// lalphabeta) may hold values outside that range.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels, double fill = 0.0);
  ImageBuffer(int width, int height, int channels, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t sampleCount() const { return data_.size(); }

  double at(int c, int y, int x) const { return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x]; }
  double& at(int c, int y, int x) { return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x]; }

  std::span<const double> plane(int c) const {
    return std::span<const double>(data_).subspan(static_cast<std::size_t>(c) * height_ * width_,
                                                  static_cast<std::size_t>(height_) * width_);
  }
  std::span<double> plane(int c) {
    return std::span<double>(data_).subspan(static_cast<std::size_t>(c) * height_ * width_,
                                            static_cast<std::size_t>(height_) * width_);
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool sameShape(const ImageBuffer& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// One boolean per pixel; dimensions always match the source image.
class TissueMask {
 public:
  TissueMask() = default;
  TissueMask(int width, int height, bool fill = false);

  int width() const { return width_; }
  int height() const { return height_; }
  bool at(int y, int x) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int y, int x, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  std::size_t count() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Length of the image diagonal, sqrt(width^2 + height^2).
double image_diagonal(const ImageBuffer& img);

/// Rec.709 luma; 1-channel input is returned as a copy.
ImageBuffer to_gray(const ImageBuffer& img);

/// Clamp every sample into [0,1].
ImageBuffer clamp01(ImageBuffer img);

}  // namespace histreg
