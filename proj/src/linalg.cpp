#include "wolff/linalg.hpp"

#include <algorithm>
#include <numeric>

namespace wolff {

Mat gram_schmidt(const Mat& cols, const Mat& against, double tol) {
  const int D = static_cast<int>(cols.rows());
  std::vector<Vec> out;
  for (int c = 0; c < cols.cols(); ++c) {
    Vec v = cols.col(c);
    // two passes for stability
    for (int pass = 0; pass < 2; ++pass) {
      for (int a = 0; a < against.cols(); ++a) v -= against.col(a).dot(v) * against.col(a);
      for (const Vec& u : out) v -= u.dot(v) * u;
    }
    double nv = v.norm();
    if (nv > tol * std::max(1.0, cols.col(c).norm())) out.push_back(v / nv);
  }
  Mat M(D, static_cast<int>(out.size()));
  for (size_t i = 0; i < out.size(); ++i) M.col(static_cast<int>(i)) = out[i];
  return M;
}

Mat orthonormal_complement(const Mat& basis) {
  const int D = static_cast<int>(basis.rows());
  const int m = static_cast<int>(basis.cols());
  // try identity columns, largest residual first
  std::vector<int> order(D);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> resid(D);
  for (int i = 0; i < D; ++i) {
    Vec e = Vec::Zero(D);
    e[i] = 1.0;
    for (int a = 0; a < m; ++a) e -= basis.col(a).dot(e) * basis.col(a);
    resid[i] = e.norm();
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return resid[a] > resid[b]; });
  Mat cand(D, D);
  for (int i = 0; i < D; ++i) {
    cand.col(i).setZero();
    cand(order[i], i) = 1.0;
  }
  Mat g = gram_schmidt(cand, basis, 1e-8);
  return g.leftCols(D - m);
}

Mat sphere_tangent_basis(const Vec& n) {
  Mat b(n.size(), 1);
  b.col(0) = n.normalized();
  return orthonormal_complement(b);
}

Mat hstack(const std::vector<Mat>& blocks, int rows) {
  int cols = 0;
  for (const auto& b : blocks) cols += static_cast<int>(b.cols());
  Mat M(rows, cols);
  int c = 0;
  for (const auto& b : blocks) {
    if (b.cols() == 0) continue;
    M.middleCols(c, b.cols()) = b;
    c += static_cast<int>(b.cols());
  }
  return M;
}

}  // namespace wolff
