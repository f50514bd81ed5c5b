#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hwloc {

struct PixelCoord {
  int u = 0;  // column
  int v = 0;  // row

  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  double sum() const { return r + g + b; }
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Dense row-major 2-D grid. Used for images, feature maps and label maps.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw std::invalid_argument("grid dimensions must be positive, got " +
                                  std::to_string(width) + "x" +
                                  std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int u, int v) const {
    return u >= 0 && v >= 0 && u < width_ && v < height_;
  }
  bool contains(PixelCoord p) const { return contains(p.u, p.v); }

  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width_ + u;
  }

  T& operator()(int u, int v) { return data_[index(u, v)]; }
  const T& operator()(int u, int v) const { return data_[index(u, v)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Two-component range feature carried per pixel into segmentation.
struct RangeFeature {
  double f1 = 0.0;
  double f2 = 0.0;

  friend bool operator==(const RangeFeature&, const RangeFeature&) = default;
};

using FeatureGrid = Grid<RangeFeature>;
using Mask = Grid<std::uint8_t>;

// Linear RGB image, every channel in [0,1].
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, Rgb fill = {}) : pixels_(width, height) {
    check_channel(fill);
    for (auto& p : pixels_.data()) p = fill;
  }
  RgbImage(int width, int height, std::vector<Rgb> data)
      : pixels_(width, height) {
    if (data.size() != pixels_.size()) {
      throw std::invalid_argument("pixel count " + std::to_string(data.size()) +
                                  " does not match " + std::to_string(width) +
                                  "x" + std::to_string(height));
    }
    for (const auto& p : data) check_channel(p);
    pixels_.data() = std::move(data);
  }

  int width() const { return pixels_.width(); }
  int height() const { return pixels_.height(); }
  std::size_t size() const { return pixels_.size(); }
  bool contains(PixelCoord p) const { return pixels_.contains(p); }

  const Rgb& operator()(int u, int v) const { return pixels_(u, v); }
  const Rgb& operator[](std::size_t i) const { return pixels_[i]; }

  void set(int u, int v, Rgb value) {
    check_channel(value);
    pixels_(u, v) = value;
  }

  const std::vector<Rgb>& data() const { return pixels_.data(); }
  const Grid<Rgb>& grid() const { return pixels_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  static void check_channel(const Rgb& p) {
    auto ok = [](double c) { return c >= 0.0 && c <= 1.0; };
    if (!ok(p.r) || !ok(p.g) || !ok(p.b)) {
      throw std::invalid_argument("channel value outside [0,1]");
    }
  }

  Grid<Rgb> pixels_;
};

}  // namespace hwloc
