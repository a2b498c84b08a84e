#include <cmath>
#include <functional>
#include <map>
#include <numbers>

#include "advlogo/errors.hpp"
#include "advlogo/logo_transform.hpp"

namespace advlogo {

namespace {

// Glyphs are defined on centred coordinates (sx, sy) in (-1, 1), sy pointing
// down. Pixel centres map to sx = (2x + 1 - w) / w, which mirrors exactly.
using Glyph = std::function<bool(double, double)>;

bool ellipse(double sx, double sy, double cx, double cy, double rx, double ry, double angle = 0) {
  const double c = std::cos(angle), s = std::sin(angle);
  const double dx = sx - cx, dy = sy - cy;
  const double u = c * dx + s * dy, v = -s * dx + c * dy;
  return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
}

bool ring(double sx, double sy, double inner, double outer) {
  const double r2 = sx * sx + sy * sy;
  return r2 >= inner * inner && r2 <= outer * outer;
}

// Angle measured from +x, counterclockwise on screen (sy points down).
double screen_angle(double sx, double sy) { return std::atan2(-sy, sx); }

const std::map<std::string, Glyph>& glyphs() {
  static const std::map<std::string, Glyph> table = {
      {"rect", [](double, double) { return true; }},
      {"H",
       [](double sx, double sy) {
         const double ax = std::abs(sx), ay = std::abs(sy);
         const bool bars = ax >= 0.4 && ax <= 0.8 && ay <= 0.85;
         const bool cross = ax <= 0.8 && ay <= 0.16;
         return bars || cross;
       }},
      {"O", [](double sx, double sy) { return ring(sx, sy, 0.45, 0.88); }},
      {"C",
       [](double sx, double sy) {
         return ring(sx, sy, 0.45, 0.88) &&
                std::abs(screen_angle(sx, sy)) > std::numbers::pi / 4;
       }},
      {"G",
       [](double sx, double sy) {
         const double a = screen_angle(sx, sy);
         const bool arc = ring(sx, sy, 0.45, 0.88) && !(a > 0 && a < std::numbers::pi / 4);
         const bool bar = sx >= 0.05 && sx <= 0.88 && sy >= -0.05 && sy <= 0.18;
         return arc || bar;
       }},
      {"X",
       [](double sx, double sy) {
         if (std::abs(sx) > 0.88 || std::abs(sy) > 0.88) return false;
         const double band = 0.2 * std::numbers::sqrt2;
         return std::abs(sx - sy) <= band || std::abs(sx + sy) <= band;
       }},
      {"T",
       [](double sx, double sy) {
         const bool top = std::abs(sx) <= 0.85 && sy >= -0.88 && sy <= -0.55;
         const bool stem = std::abs(sx) <= 0.18 && sy >= -0.88 && sy <= 0.88;
         return top || stem;
       }},
      {"raindrop",
       [](double sx, double sy) {
         // Round bottom, tapering to a point at the top.
         const double cy = 0.3, r = 0.55, apex = -0.88;
         if (ellipse(sx, sy, 0.0, cy, r, r)) return true;
         if (sy < apex || sy > cy) return false;
         return std::abs(sx) <= r * (sy - apex) / (cy - apex);
       }},
      {"twitter",
       [](double sx, double sy) {
         const bool body = ellipse(sx, sy, 0.0, 0.15, 0.62, 0.45);
         const bool head = ellipse(sx, sy, 0.42, -0.32, 0.3, 0.3);
         const bool beak = sx >= 0.62 && sx <= 0.92 && sy >= -0.42 - 0.3 * (0.92 - sx) &&
                           sy <= -0.36 + 0.2 * (0.92 - sx) && sy <= -0.2;
         const bool wing = ellipse(sx, sy, -0.35, -0.2, 0.5, 0.2, -0.6);
         const bool tail = ellipse(sx, sy, -0.62, 0.35, 0.32, 0.12, 0.5);
         return body || head || beak || wing || tail;
       }},
  };
  return table;
}

}  // namespace

std::vector<std::string> builtin_glyphs() {
  return {"G", "O", "C", "X", "T", "H", "raindrop", "twitter", "rect"};
}

Mask rasterize_shape_mask(const ShapeSource& shape, int width, int height) {
  if (width < 8 || height < 8) throw DomainError("shape mask must be at least 8x8");
  Mask mask(Eigen::Index{width} * height);
  if (const auto* name = std::get_if<std::string>(&shape)) {
    const auto it = glyphs().find(*name);
    if (it == glyphs().end()) throw DomainError("unknown glyph '" + *name + "'");
    for (int y = 0; y < height; ++y) {
      const double sy = static_cast<double>(2 * y + 1 - height) / height;
      for (int x = 0; x < width; ++x) {
        const double sx = static_cast<double>(2 * x + 1 - width) / width;
        mask[Eigen::Index{y} * width + x] = it->second(sx, sy);
      }
    }
  } else {
    const Bitmap& bitmap = std::get<Bitmap>(shape);
    if (bitmap.size() == 0) throw DomainError("empty bitmap");
    // Nearest-neighbour resample when sizes differ.
    for (int y = 0; y < height; ++y) {
      const auto by = static_cast<Eigen::Index>((y + 0.5) * bitmap.rows() / height);
      for (int x = 0; x < width; ++x) {
        const auto bx = static_cast<Eigen::Index>((x + 0.5) * bitmap.cols() / width);
        mask[Eigen::Index{y} * width + x] = bitmap(by, bx) >= 0.5;
      }
    }
  }
  if (!mask.any()) throw DomainError("shape mask is empty");
  return mask;
}

}  // namespace advlogo
