#pragma once

#include <cmath>
#include <vector>

namespace san {

struct Pt {
  double x = 0.0;
  double y = 0.0;
};

inline double dist(const Pt& a, const Pt& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y));
}

struct Box {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
};

// Axis-aligned affine map p' = (sx*x + tx, sy*y + ty).
struct AffineMap {
  double sx = 1.0, sy = 1.0, tx = 0.0, ty = 0.0;

  Pt apply(const Pt& p) const { return {sx * p.x + tx, sy * p.y + ty}; }

  AffineMap inverse() const { return {1.0 / sx, 1.0 / sy, -tx / sx, -ty / sy}; }

  std::vector<Pt> apply(const std::vector<Pt>& pts) const {
    std::vector<Pt> out;
    out.reserve(pts.size());
    for (const Pt& p : pts) out.push_back(apply(p));
    return out;
  }
};

}  // namespace san
