#include "histreg/core/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace histreg {

double distance(PixelCoord a, PixelCoord b) { return std::hypot(a.x - b.x, a.y - b.y); }

ImageBuffer::ImageBuffer(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 1 || height < 1) throw std::invalid_argument("ImageBuffer: width and height must be >= 1");
  if (channels != 1 && channels != 3) throw std::invalid_argument("ImageBuffer: channels must be 1 or 3");
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

ImageBuffer::ImageBuffer(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width < 1 || height < 1) throw std::invalid_argument("ImageBuffer: width and height must be >= 1");
  if (channels != 1 && channels != 3) throw std::invalid_argument("ImageBuffer: channels must be 1 or 3");
  if (data_.size() != static_cast<std::size_t>(width) * height * channels)
    throw std::invalid_argument("ImageBuffer: data length must be width*height*channels");
}

TissueMask::TissueMask(int width, int height, bool fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw std::invalid_argument("TissueMask: width and height must be >= 1");
  bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t TissueMask::count() const {
  return static_cast<std::size_t>(std::accumulate(bits_.begin(), bits_.end(), std::size_t{0}));
}

double image_diagonal(const ImageBuffer& img) {
  return std::hypot(static_cast<double>(img.width()), static_cast<double>(img.height()));
}

ImageBuffer to_gray(const ImageBuffer& img) {
  if (img.channels() == 1) return img;
  ImageBuffer out(img.width(), img.height(), 1);
  auto r = img.plane(0);
  auto g = img.plane(1);
  auto b = img.plane(2);
  auto y = out.plane(0);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.2126 * r[i] + 0.7152 * g[i] + 0.0722 * b[i];
  return out;
}

ImageBuffer clamp01(ImageBuffer img) {
  for (double& s : img.data()) s = std::clamp(s, 0.0, 1.0);
  return img;
}

}  // namespace histreg
