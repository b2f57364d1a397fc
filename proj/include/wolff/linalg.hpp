#pragma once

#include <Eigen/Dense>
#include <vector>

namespace wolff {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// orthonormalize the columns of `cols` against `against` (assumed orthonormal) and
// against each other; columns that collapse below tol are dropped
Mat gram_schmidt(const Mat& cols, const Mat& against, double tol = 1e-12);

// orthonormal basis of the complement of span(basis) (basis orthonormal, D x m)
Mat orthonormal_complement(const Mat& basis);

// orthonormal basis of n^perp in R^m, chosen deterministically
Mat sphere_tangent_basis(const Vec& n);

Mat hstack(const std::vector<Mat>& blocks, int rows);

}  // namespace wolff
