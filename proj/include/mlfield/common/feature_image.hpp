#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "mlfield/common/error.hpp"

namespace mlfield {

// H x W x 3 real raster, channel-interleaved row-major.
class FeatureImage {
 public:
  static constexpr int kChannels = 3;

  FeatureImage() = default;
  FeatureImage(int width, int height, double fill = 0.0) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw InvalidInput("feature image dimensions must be non-negative");
    data_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  double& at(int x, int y, int c) { return data_[offset(x, y) + c]; }
  double at(int x, int y, int c) const { return data_[offset(x, y) + c]; }

  std::array<double, 3> pixel(int x, int y) const {
    const auto o = offset(x, y);
    return {data_[o], data_[o + 1], data_[o + 2]};
  }
  void set_pixel(int x, int y, const std::array<double, 3>& v) {
    const auto o = offset(x, y);
    data_[o] = v[0];
    data_[o + 1] = v[1];
    data_[o + 2] = v[2];
  }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool same_shape(const FeatureImage& o) const { return width_ == o.width_ && height_ == o.height_; }

  friend bool operator==(const FeatureImage&, const FeatureImage&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + static_cast<std::size_t>(x)) * kChannels;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

}  // namespace mlfield
