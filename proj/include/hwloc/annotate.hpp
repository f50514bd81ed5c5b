#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

#include "hwloc/image.hpp"

namespace hwloc {

struct MarkerStyle {
  enum class Shape { kDisc, kCross };
  Shape shape = Shape::kCross;
  int radius = 3;
  Rgb color{1.0, 0.0, 0.0};
};

class AnnotateError : public std::out_of_range {
 public:
  AnnotateError(std::size_t index, PixelCoord p)
      : std::out_of_range("marker " + std::to_string(index) + " at (" +
                          std::to_string(p.u) + "," + std::to_string(p.v) +
                          ") is outside the image"),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Every changed pixel lies within max(|du|,|dv|) <= radius of some marker.
inline RgbImage annotate(const RgbImage& img, std::span<const PixelCoord> markers,
                         const MarkerStyle& style = {}) {
  for (std::size_t i = 0; i < markers.size(); ++i) {
    if (!img.contains(markers[i])) throw AnnotateError(i, markers[i]);
  }
  RgbImage out = img;
  const int r = std::max(0, style.radius);
  for (const auto& m : markers) {
    for (int dv = -r; dv <= r; ++dv) {
      for (int du = -r; du <= r; ++du) {
        const bool on = style.shape == MarkerStyle::Shape::kDisc
                            ? du * du + dv * dv <= r * r
                            : (du == 0 || dv == 0);
        const int u = m.u + du;
        const int v = m.v + dv;
        if (on && u >= 0 && v >= 0 && u < out.width() && v < out.height()) {
          out.set(u, v, style.color);
        }
      }
    }
  }
  return out;
}

}  // namespace hwloc
