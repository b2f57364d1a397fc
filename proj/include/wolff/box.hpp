#pragma once

#include <vector>

#include "wolff/linalg.hpp"

namespace wolff {

// box {center + U y : |y_i| <= half_i}; columns of `axes` are the U_i
struct OrientedBox {
  Vec center;
  Mat axes;
  Vec half;
  Vec recip;  // exact half-lengths of the box this one was dualized from, if any

  OrientedBox() = default;
  OrientedBox(Vec c, Mat u, Vec h);

  int D() const { return static_cast<int>(center.size()); }
  Vec local(const Vec& x) const { return axes.transpose() * (x - center); }
  // max_i |y_i| / half_i, so the box is the unit ball of this gauge
  double gauge(const Vec& x) const;
  bool contains(const Vec& x, double slack = 0.0) const;
  // vertex containment of `o` in this box
  bool contains_box(const OrientedBox& o, double slack = 0.0) const;
  // interiors intersect (separating axis test)
  bool overlaps(const OrientedBox& o, double margin = 1e-12) const;
  std::vector<Vec> vertices() const;
  OrientedBox dilate(double f) const;
  double volume() const;          // Lebesgue volume, 2^D prod half
  double reduced_volume() const;  // prod half; exactly reciprocal under dual_box
  double circumradius() const { return half.norm(); }
  double orthonormality_defect() const;
};

}  // namespace wolff
