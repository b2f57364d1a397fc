#include "wolff/lattice.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>

#include "wolff/boxes.hpp"
#include "wolff/error.hpp"

namespace wolff {

namespace {

const double kPi = 3.14159265358979323846;

long long floor_mod(long long a, long long m) {
  long long r = a % m;
  return r < 0 ? r + m : r;
}

// exact determinant by fraction-free elimination
long long int_det(IMat A) {
  const int n = static_cast<int>(A.rows());
  long long sign = 1, prev = 1;
  for (int k = 0; k < n; ++k) {
    if (A(k, k) == 0) {
      int p = k + 1;
      while (p < n && A(p, k) == 0) ++p;
      if (p == n) return 0;
      A.row(k).swap(A.row(p));
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i)
      for (int j = k + 1; j < n; ++j) A(i, j) = (A(i, j) * A(k, k) - A(i, k) * A(k, j)) / prev;
    prev = A(k, k);
  }
  return sign * A(n - 1, n - 1);
}

IMat adjugate(const IMat& A) {
  const int n = static_cast<int>(A.rows());
  IMat adj(n, n);
  if (n == 1) {
    adj(0, 0) = 1;
    return adj;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      IMat m(n - 1, n - 1);
      for (int r = 0, rr = 0; r < n; ++r) {
        if (r == j) continue;
        for (int c = 0, cc = 0; c < n; ++c) {
          if (c == i) continue;
          m(rr, cc++) = A(r, c);
        }
        ++rr;
      }
      adj(i, j) = ((i + j) % 2 ? -1 : 1) * int_det(m);
    }
  return adj;
}

struct FftwPlan {
  fftw_plan p = nullptr;
  ~FftwPlan() {
    if (p) fftw_destroy_plan(p);
  }
};

}  // namespace

IMat lll_reduce(const IMat& B0, const Mat& A, double dl) {
  IMat B = B0;
  const int n = static_cast<int>(B.cols());
  Mat mu(n, n);
  Vec bn(n);
  auto gso = [&]() {
    std::vector<Vec> bs(n);
    for (int i = 0; i < n; ++i) {
      Vec b = B.col(i).cast<double>();
      bs[i] = b;
      for (int j = 0; j < i; ++j) {
        mu(i, j) = b.dot(A * bs[j]) / bn[j];
        bs[i] -= mu(i, j) * bs[j];
      }
      bn[i] = bs[i].dot(A * bs[i]);
    }
  };
  gso();
  int k = 1, guard = 0;
  while (k < n) {
    if (++guard > 100000) throw NumericError("lattice reduction did not terminate");
    for (int j = k - 1; j >= 0; --j) {
      long long q = std::llround(mu(k, j));
      if (q != 0) {
        B.col(k) -= q * B.col(j);
        gso();
      }
    }
    if (bn[k] >= (dl - mu(k, k - 1) * mu(k, k - 1)) * bn[k - 1]) {
      ++k;
    } else {
      B.col(k).swap(B.col(k - 1));
      gso();
      k = std::max(k - 1, 1);
    }
  }
  return B;
}

SmithForm smith_normal_form(const IMat& M) {
  const int n = static_cast<int>(M.rows());
  if (M.cols() != n) throw InputError("smith form needs a square matrix");
  IMat A = M;
  IMat U = IMat::Identity(n, n), V = IMat::Identity(n, n);
  for (int t = 0; t < n; ++t) {
    while (true) {
      // smallest nonzero entry of the trailing block to the pivot
      int pi = -1, pj = -1;
      long long best = 0;
      for (int i = t; i < n; ++i)
        for (int j = t; j < n; ++j)
          if (A(i, j) != 0 && (pi < 0 || std::llabs(A(i, j)) < best)) {
            best = std::llabs(A(i, j));
            pi = i;
            pj = j;
          }
      if (pi < 0) throw NumericError("smith form of a singular matrix");
      if (pi != t) {
        A.row(pi).swap(A.row(t));
        U.row(pi).swap(U.row(t));
      }
      if (pj != t) {
        A.col(pj).swap(A.col(t));
        V.col(pj).swap(V.col(t));
      }
      bool clean = true;
      for (int i = t + 1; i < n; ++i) {
        long long q = A(i, t) / A(t, t);
        if (q) {
          A.row(i) -= q * A.row(t);
          U.row(i) -= q * U.row(t);
        }
        if (A(i, t) != 0) clean = false;
      }
      for (int j = t + 1; j < n; ++j) {
        long long q = A(t, j) / A(t, t);
        if (q) {
          A.col(j) -= q * A.col(t);
          V.col(j) -= q * V.col(t);
        }
        if (A(t, j) != 0) clean = false;
      }
      if (!clean) continue;
      int bad = -1;
      for (int i = t + 1; i < n && bad < 0; ++i)
        for (int j = t + 1; j < n; ++j)
          if (A(i, j) % A(t, t) != 0) {
            bad = i;
            break;
          }
      if (bad < 0) break;
      A.row(t) += A.row(bad);
      U.row(t) += U.row(bad);
    }
    if (A(t, t) < 0) {
      A.row(t) *= -1;
      U.row(t) *= -1;
    }
  }
  SmithForm f;
  f.U = U;
  f.V = V;
  f.s = A.diagonal();
  return f;
}

IMat unimodular_inverse(const IMat& U) {
  long long d = int_det(U);
  if (d != 1 && d != -1) throw NumericError("matrix is not unimodular");
  IMat inv = adjugate(U) * d;
  return inv;
}

// ---------------------------------------------------------------- window lattices

namespace {

WindowLattice finish(IMat G, double r) {
  const int D = static_cast<int>(G.rows());
  if (!(r > 0 && r < 0.5)) throw ConfigError("window spectral radius must lie in (0, 1/2)");
  WindowLattice w;
  w.D = D;
  w.G = G;
  w.r = r;
  w.det_signed = int_det(G);
  if (w.det_signed == 0) throw NumericError("singular window lattice");
  w.det = std::llabs(w.det_signed);
  w.adj = adjugate(G);
  Mat Ginv = w.adj.cast<double>() / double(w.det_signed);

  // integer xi with |G^-1 xi| < r
  std::vector<long long> ext(D);
  double box = 1;
  for (int i = 0; i < D; ++i) {
    ext[i] = static_cast<long long>(std::floor(r * G.row(i).cast<double>().norm())) + 1;
    box *= double(2 * ext[i] + 1);
  }
  if (box > 5e7) throw BudgetError("window frequency enumeration too large");
  std::vector<long long> c(D);
  for (int i = 0; i < D; ++i) c[i] = -ext[i];
  w.eta.D = D;
  std::vector<double> vals;
  while (true) {
    Vec xi(D);
    for (int i = 0; i < D; ++i) xi[i] = double(c[i]);
    double rho = (Ginv * xi).norm();
    if (rho < r) {
      for (int i = 0; i < D; ++i) w.eta.freqs.push_back(static_cast<int>(c[i]));
      vals.push_back(bump(rho / r));
    }
    int i = D - 1;
    for (; i >= 0; --i) {
      if (++c[i] <= ext[i]) break;
      c[i] = -ext[i];
    }
    if (i < 0) break;
  }
  double s2 = 0;
  for (double v : vals) s2 += v * v;
  const double cn = 1.0 / std::sqrt(double(w.det) * s2);
  for (double v : vals) w.eta.coef.push_back(cn * v);

  // psi = eta^2 by direct convolution
  std::map<std::vector<int>, double> acc;
  const int ne = w.eta.size();
  for (int a = 0; a < ne; ++a)
    for (int b = 0; b < ne; ++b) {
      std::vector<int> z(D);
      for (int i = 0; i < D; ++i) z[i] = w.eta.freqs[a * D + i] + w.eta.freqs[b * D + i];
      acc[z] += w.eta.coef[a].real() * w.eta.coef[b].real();
    }
  w.psi.D = D;
  for (const auto& [z, v] : acc) {
    w.psi.freqs.insert(w.psi.freqs.end(), z.begin(), z.end());
    w.psi.coef.emplace_back(v, 0.0);
  }

  IMat Gt = G.transpose();
  w.plate_snf = smith_normal_form(Gt);
  w.plate_Uinv = unimodular_inverse(w.plate_snf.U);
  return w;
}

}  // namespace

IVec WindowLattice::plate_index(long long p) const {
  IVec m(D);
  for (int i = D - 1; i >= 0; --i) {
    m[i] = p % plate_snf.s[i];
    p /= plate_snf.s[i];
  }
  return m;
}

IVec WindowLattice::plate_k(long long p) const { return plate_Uinv * plate_index(p); }

Vec WindowLattice::plate_center(long long p) const {
  // b = G^-T k = adj^T k / det
  IVec num = adj.transpose() * plate_k(p);
  Vec b(D);
  for (int i = 0; i < D; ++i) b[i] = double(floor_mod(num[i] * (det_signed < 0 ? -1 : 1), det)) / double(det);
  return b;
}

cplx WindowLattice::phase(const int* zeta, long long p) const {
  // zeta . b = (adj zeta) . k / det, reduced exactly
  IVec z(D);
  for (int i = 0; i < D; ++i) z[i] = zeta[i];
  IVec az = adj * z;
  IVec k = plate_k(p);
  long long num = 0;
  for (int i = 0; i < D; ++i) num = floor_mod(num + floor_mod(az[i], det) * floor_mod(k[i], det), det);
  if (det_signed < 0) num = floor_mod(-num, det);
  double a = -2 * kPi * double(num) / double(det);
  return {std::cos(a), std::sin(a)};
}

WindowLattice window_lattice(const Mat& axes, const Vec& scales, double r) {
  const int D = static_cast<int>(axes.rows());
  if (scales.size() != D || axes.cols() != D) throw InputError("window lattice needs D axes and D scales");
  Mat A = axes * scales.cwiseInverse().cwiseAbs2().asDiagonal() * axes.transpose();
  IMat V = lll_reduce(IMat::Identity(D, D), A);
  IMat G(D, D);
  for (int i = 0; i < D; ++i) {
    Vec v = V.col(i).cast<double>();
    double len = std::sqrt(v.dot(A * v));
    long long m = std::max<long long>(1, std::llround(1.0 / len));
    G.col(i) = m * V.col(i);
  }
  return finish(G, r);
}

WindowLattice cube_lattice(int D, long long n, double r) {
  if (n < 1) throw InputError("cube lattice needs n >= 1");
  return finish(IMat::Identity(D, D) * n, r);
}

// ---------------------------------------------------------------- sample lattices

SampleLattice::SampleLattice(const WindowLattice& w, int M) : w_(&w), M_(M), D_(w.D) {
  if (M < 1) throw InputError("sample refinement must be positive");
  IMat H = w.G * M;
  snf_ = smith_normal_form(H);
  Ut_ = snf_.U.transpose();
  count_ = 1;
  for (int i = 0; i < D_; ++i) count_ *= snf_.s[i];
  if (count_ > (1LL << 28)) throw BudgetError("sample lattice too large");
  stride_.assign(D_, 1);
  for (int i = D_ - 2; i >= 0; --i) stride_[i] = stride_[i + 1] * snf_.s[i + 1];
}

std::vector<cplx> SampleLattice::evaluate(const TrigPoly& f) const { return evaluate(f.freqs, f.coef); }

std::vector<cplx> SampleLattice::evaluate(const std::vector<int>& freqs, const std::vector<cplx>& coef) const {
  std::vector<cplx> a(count_, cplx(0, 0));
  const int n = static_cast<int>(coef.size());
  IVec xi(D_);
  for (int t = 0; t < n; ++t) {
    for (int i = 0; i < D_; ++i) xi[i] = freqs[t * D_ + i];
    IVec alpha = snf_.U * xi;
    long long idx = 0;
    for (int i = 0; i < D_; ++i) idx += floor_mod(alpha[i], snf_.s[i]) * stride_[i];
    a[idx] += coef[t];
  }
  std::vector<int> dims(D_);
  for (int i = 0; i < D_; ++i) dims[i] = static_cast<int>(snf_.s[i]);
  FftwPlan plan;
  auto* buf = reinterpret_cast<fftw_complex*>(a.data());
  plan.p = fftw_plan_dft(D_, dims.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_execute(plan.p);
  return a;
}

Vec SampleLattice::point(long long idx) const {
  Vec y(D_);
  for (int i = 0; i < D_; ++i) y[i] = double((idx / stride_[i]) % snf_.s[i]) / double(snf_.s[i]);
  Vec x = Ut_.cast<double>() * y;
  for (int i = 0; i < D_; ++i) x[i] -= std::floor(x[i]);
  return x;
}

IVec SampleLattice::plate_offset(long long plate) const {
  IVec k = w_->plate_k(plate);
  IVec off = snf_.V.transpose() * (k * M_);
  for (int i = 0; i < D_; ++i) off[i] = floor_mod(off[i], snf_.s[i]);
  return off;
}

long long SampleLattice::shift(long long idx, long long plate) const {
  IVec off = plate_offset(plate);
  long long out = 0;
  for (int i = 0; i < D_; ++i) {
    long long b = (idx / stride_[i]) % snf_.s[i];
    out += floor_mod(b - off[i], snf_.s[i]) * stride_[i];
  }
  return out;
}

}  // namespace wolff
