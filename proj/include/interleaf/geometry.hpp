#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

namespace interleaf {

/// Axis-aligned pixel box, half-open: covers x in [x0, x1), y in [y0, y1).
struct BBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  std::int64_t area() const {
    return valid() ? static_cast<std::int64_t>(width()) * height() : 0;
  }
  bool valid() const { return x0 < x1 && y0 < y1; }
  bool within(int frame_w, int frame_h) const {
    return x0 >= 0 && y0 >= 0 && x1 <= frame_w && y1 <= frame_h;
  }
  bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool contains(const BBox& o) const {
    return o.x0 >= x0 && o.y0 >= y0 && o.x1 <= x1 && o.y1 <= y1;
  }
  double center_x() const { return 0.5 * (x0 + x1); }
  double center_y() const { return 0.5 * (y0 + y1); }

  bool operator==(const BBox&) const = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

inline BBox intersect(const BBox& a, const BBox& b) {
  return {std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
}

inline double iou(const BBox& a, const BBox& b) {
  const BBox in = intersect(a, b);
  const auto inter = static_cast<double>(in.area());
  const auto uni = static_cast<double>(a.area() + b.area()) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline BBox clamp_to_frame(const BBox& b, int frame_w, int frame_h) {
  return {std::clamp(b.x0, 0, frame_w), std::clamp(b.y0, 0, frame_h), std::clamp(b.x1, 0, frame_w),
          std::clamp(b.y1, 0, frame_h)};
}

inline std::string to_string(const BBox& b) {
  return "(" + std::to_string(b.x0) + "," + std::to_string(b.y0) + "," + std::to_string(b.x1) +
         "," + std::to_string(b.y1) + ")";
}

}  // namespace interleaf
