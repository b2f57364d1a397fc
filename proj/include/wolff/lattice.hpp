#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "wolff/linalg.hpp"

namespace wolff {

using cplx = std::complex<double>;
using IMat = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;
using IVec = Eigen::Matrix<long long, Eigen::Dynamic, 1>;

// LLL reduction of the columns of B (integer) under the inner product x^T A y
IMat lll_reduce(const IMat& B, const Mat& A, double delta = 0.75);

struct SmithForm {
  IMat U, V;  // unimodular, U * M * V = diag(s)
  IVec s;     // s_i | s_{i+1}, positive
};
SmithForm smith_normal_form(const IMat& M);

IMat unimodular_inverse(const IMat& U);

// sparse trigonometric polynomial on Z^D
struct TrigPoly {
  int D = 0;
  std::vector<int> freqs;  // flat, D per term
  std::vector<cplx> coef;
  int size() const { return static_cast<int>(coef.size()); }
};

// torus window family for the lattice L* = G Z^D (G integer):
// eta_b(x) = c sum_xi eta-hat(G^-1 xi) e(xi.(x - b)), b in G^-T Z^D / Z^D, with
// sum_b eta_b^2 = 1 exactly because the eta-hat support radius r is < 1/2
struct WindowLattice {
  int D = 0;
  IMat G;
  IMat adj;               // adjugate, G^-1 = adj / det_signed
  long long det_signed = 0;
  long long det = 0;  // |det G| = number of windows per torus
  double r = 0.2;
  TrigPoly eta;  // eta_0
  TrigPoly psi;  // psi_0 = eta_0^2
  SmithForm plate_snf;  // of G^T; plate m <-> k = U^-1 m
  IMat plate_Uinv;

  double cell_volume() const { return 1.0 / double(det); }
  // plate index m (0 <= m_i < s_i) from a flat plate number
  IVec plate_index(long long p) const;
  IVec plate_k(long long p) const;  // representative k with b = G^-T k
  Vec plate_center(long long p) const;  // in [0,1)^D
  // phase e(-zeta.b) for an integer frequency zeta
  cplx phase(const int* zeta, long long p) const;
};

// scales: desired frequency half-extents of the window cell along `axes` (lattice units)
WindowLattice window_lattice(const Mat& axes, const Vec& scales, double r = 0.2);
// cubes of side 1/n
WindowLattice cube_lattice(int D, long long n, double r = 0.2);

// sample points x = H^-T j, H = M G, through the Smith form of H; the group DFT
// evaluates trigonometric polynomials on all |det H| points at once
class SampleLattice {
 public:
  SampleLattice(const WindowLattice& w, int M);
  long long size() const { return count_; }
  int M() const { return M_; }
  // values at every sample point, flat index over beta in prod [0, s_i)
  std::vector<cplx> evaluate(const TrigPoly& f) const;
  std::vector<cplx> evaluate(const std::vector<int>& freqs, const std::vector<cplx>& coef) const;
  Vec point(long long idx) const;  // in [0,1)^D
  // sample index of x_idx - b_p
  long long shift(long long idx, long long plate) const;
  // beta offset of a plate center: x_idx - b_p has beta = beta(idx) - plate_offset(p)
  IVec plate_offset(long long plate) const;
  const IVec& sizes() const { return snf_.s; }
  const std::vector<long long>& strides() const { return stride_; }

 private:
  const WindowLattice* w_;
  int M_;
  int D_;
  SmithForm snf_;
  IMat Ut_;  // U^T for the point map
  long long count_;
  std::vector<long long> stride_;
};

}  // namespace wolff
