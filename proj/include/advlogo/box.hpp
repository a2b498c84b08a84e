#pragma once

#include <algorithm>

namespace advlogo {

// Axis-aligned box in normalised image coordinates (centre and size).
struct Box {
  double cx = 0, cy = 0, w = 0, h = 0;

  double x0() const { return cx - w / 2; }
  double x1() const { return cx + w / 2; }
  double y0() const { return cy - h / 2; }
  double y1() const { return cy + h / 2; }
  double area() const { return std::max(0.0, w) * std::max(0.0, h); }
};

inline double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0()));
  const double iy = std::max(0.0, std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0()));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace advlogo
