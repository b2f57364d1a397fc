#include "wolff/box.hpp"

#include <cmath>

#include "wolff/error.hpp"

namespace wolff {

OrientedBox::OrientedBox(Vec c, Mat u, Vec h) : center(std::move(c)), axes(std::move(u)), half(std::move(h)) {
  const int D = static_cast<int>(center.size());
  if (axes.rows() != D || axes.cols() != D || half.size() != D) throw InputError("box dimensions disagree");
  if (half.minCoeff() <= 0) throw InputError("box half-lengths must be positive");
}

double OrientedBox::gauge(const Vec& x) const {
  Vec y = local(x);
  return (y.cwiseAbs().array() / half.array()).maxCoeff();
}

bool OrientedBox::contains(const Vec& x, double slack) const {
  Vec d = x - center;
  for (int i = 0; i < D(); ++i)
    if (std::abs(axes.col(i).dot(d)) > half[i] + slack) return false;
  return true;
}

bool OrientedBox::contains_box(const OrientedBox& o, double slack) const {
  Vec d = o.center - center;
  Mat R = axes.transpose() * o.axes;
  for (int i = 0; i < D(); ++i) {
    double reach = std::abs(axes.col(i).dot(d));
    for (int j = 0; j < D(); ++j) reach += o.half[j] * std::abs(R(i, j));
    if (reach > half[i] + slack) return false;
  }
  return true;
}

bool OrientedBox::overlaps(const OrientedBox& o, double margin) const {
  Vec d = o.center - center;
  Mat R = axes.transpose() * o.axes;
  const int D = this->D();
  auto separated = [&](const Vec& axis) {
    double n = axis.norm();
    if (n < 1e-12) return false;
    Vec a = axis / n;
    double ra = 0, rb = 0;
    for (int i = 0; i < D; ++i) {
      ra += half[i] * std::abs(axes.col(i).dot(a));
      rb += o.half[i] * std::abs(o.axes.col(i).dot(a));
    }
    return std::abs(d.dot(a)) >= ra + rb - margin;
  };
  for (int i = 0; i < D; ++i) {
    if (separated(axes.col(i))) return false;
    if (separated(o.axes.col(i))) return false;
  }
  (void)R;
  if (D == 3) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        Eigen::Vector3d a = axes.col(i), b = o.axes.col(j);
        if (separated(Vec(a.cross(b)))) return false;
      }
  }
  return true;
}

std::vector<Vec> OrientedBox::vertices() const {
  const int D = this->D();
  std::vector<Vec> out;
  for (int mask = 0; mask < (1 << D); ++mask) {
    Vec v = center;
    for (int i = 0; i < D; ++i) v += ((mask >> i) & 1 ? 1.0 : -1.0) * half[i] * axes.col(i);
    out.push_back(v);
  }
  return out;
}

OrientedBox OrientedBox::dilate(double f) const { return OrientedBox(center, axes, half * f); }

double OrientedBox::volume() const { return std::ldexp(reduced_volume(), D()); }

double OrientedBox::reduced_volume() const {
  double v = 1.0;
  for (int i = 0; i < D(); ++i) v *= half[i];
  return v;
}

double OrientedBox::orthonormality_defect() const {
  return (axes.transpose() * axes - Mat::Identity(D(), D())).cwiseAbs().maxCoeff();
}

}  // namespace wolff
