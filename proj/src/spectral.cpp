#include "wolff/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>

#include "wolff/boxes.hpp"
#include "wolff/error.hpp"

namespace wolff {

namespace {

const double kPi = 3.14159265358979323846;

struct Plan {
  fftw_plan p = nullptr;
  ~Plan() {
    if (p) fftw_destroy_plan(p);
  }
};

void fft_backward(std::vector<cplx>& a, const std::vector<int>& dims) {
  Plan plan;
  auto* buf = reinterpret_cast<fftw_complex*>(a.data());
  plan.p = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_execute(plan.p);
}

// next size with only factors 2, 3, 5
int smooth_size(long long n) {
  for (long long m = std::max<long long>(n, 1);; ++m) {
    long long r = m;
    for (int f : {2, 3, 5})
      while (r % f == 0) r /= f;
    if (r == 1) return static_cast<int>(m);
  }
}

std::vector<Vec> grid_ball(int m, double R, double step) {
  std::vector<Vec> pts;
  if (m == 0) {
    pts.push_back(Vec(0));
    return pts;
  }
  long n = static_cast<long>(std::ceil(R / step));
  if (std::pow(2.0 * n + 1, m) > 5e7) throw BudgetError("surface parameter grid too large");
  std::vector<long> c(m, -n);
  while (true) {
    Vec v(m);
    for (int e = 0; e < m; ++e) v[e] = double(c[e]) * step;
    if (v.norm() <= R + 1e-12) pts.push_back(v);
    int e = 0;
    for (; e < m; ++e) {
      if (++c[e] <= n) break;
      c[e] = -n;
    }
    if (e == m) break;
  }
  return pts;
}

std::vector<Vec> direction_cloud(int m, double step) {
  if (m == 2) return sphere_samples(2, static_cast<int>(std::ceil(2 * kPi / step)) + 1);
  if (m == 3) return sphere_samples(3, static_cast<int>(std::ceil(4 * kPi / (step * step) * 1.3)) + 1);
  double area = 2 * std::pow(kPi, m / 2.0) / std::tgamma(m / 2.0);
  double cnt = 3.0 * area / std::pow(step, m - 1);
  if (cnt > 2e7) throw BudgetError("direction cloud too large");
  return sphere_samples(m, static_cast<int>(cnt) + 1, 23);
}

// parameters whose images are spaced about h over the whole surface
std::vector<Vec> param_cloud(const SurfaceModel& S, double h) {
  std::vector<Vec> out;
  const int d = S.d(), k = S.k();
  switch (S.kind()) {
    case SurfaceKind::Graph: {
      const auto& g = S.graph_data();
      double lip = 1.0;
      if (g.kind == GraphKind::Quadratic) {
        Eigen::SelfAdjointEigenSolver<Mat> es(g.hessian);
        lip = std::sqrt(1.0 + std::pow(es.eigenvalues().cwiseAbs().maxCoeff() * g.domain_radius, 2));
      } else {
        double r = g.sphere_radius;
        lip = r / std::sqrt(r * r - g.domain_radius * g.domain_radius);
      }
      return grid_ball(d, g.domain_radius, h / lip);
    }
    case SurfaceKind::Conical: {
      const auto& c = S.conical_data();
      std::vector<Vec> bases;
      if (c.body_base) {
        double rho = 1e-3;
        for (const auto& n : sphere_samples(d, 400, 9)) rho = std::max(rho, c.body->curvature_radii(n).norm());
        bases = direction_cloud(d, h / (c.c2 * rho));
      } else {
        Eigen::SelfAdjointEigenSolver<Mat> es(c.base_hessian);
        double lip = std::sqrt(1.0 + std::pow(es.eigenvalues().cwiseAbs().maxCoeff() * c.base_radius, 2));
        bases = grid_ball(d - 1, c.base_radius, h / (c.c2 * lip));
      }
      double smax = 0;
      for (const auto& b : bases) smax = std::max(smax, S.point(S.conical_param(b, 1.0)).norm());
      long nt = static_cast<long>(std::ceil((c.c2 - c.c1) * smax / h));
      for (const auto& b : bases)
        for (long i = 0; i <= nt; ++i) out.push_back(S.conical_param(b, c.c1 + (c.c2 - c.c1) * double(i) / nt));
      return out;
    }
    case SurfaceKind::KCone: {
      const auto& kc = S.kcone_data();
      const int m = static_cast<int>(kc.l0_basis.cols());
      double rho = 1e-3, diam = 0;
      for (const auto& g : kc.generators)
        for (const auto& n : sphere_samples(m, 200, 9)) rho = std::max(rho, g.curvature_radii(n).norm());
      for (const auto& a : kc.offsets)
        for (const auto& b : kc.offsets) diam = std::max(diam, (a - b).norm());
      diam += 2 * rho;
      auto dirs = direction_cloud(m, h / rho);
      long q = std::max<long>(1, static_cast<long>(std::ceil(diam / h)));
      // compositions of q into k+1 parts
      std::vector<Vec> alphas;
      std::vector<long> c(k + 1, 0);
      std::function<void(int, long)> rec = [&](int i, long left) {
        if (i == k) {
          c[k] = left;
          Vec a(k + 1);
          for (int e = 0; e <= k; ++e) a[e] = double(c[e]) / q;
          alphas.push_back(a);
          return;
        }
        for (long v = 0; v <= left; ++v) {
          c[i] = v;
          rec(i + 1, left - v);
        }
      };
      rec(0, q);
      if (double(dirs.size()) * alphas.size() > 3e7) throw BudgetError("k-cone parameter cloud too large");
      for (const auto& n : dirs)
        for (const auto& a : alphas) out.push_back(S.kcone_param(n, a));
      return out;
    }
  }
  return out;
}

// gauss-newton foot point from a nearby parameter; ok = false asks for the robust solver
struct Proj {
  double dist = 0;
  Vec u;
  bool ok = false;
};

Proj project(const SurfaceModel& S, const Vec& x, const Vec& u0) {
  Proj out;
  Vec u = S.canonical(u0);
  Vec p = S.point(u);
  const int P = static_cast<int>(u.size()), D = static_cast<int>(x.size());
  double f = (p - x).squaredNorm();
  for (int it = 0; it < 10; ++it) {
    Mat J(D, P);
    for (int j = 0; j < P; ++j) {
      const double h = 1e-7;
      Vec up = u;
      up[j] += h;
      Vec col = (S.point(up) - p) / h;
      if (col.norm() < 1e-9) {
        up[j] = u[j] - h;
        col = (p - S.point(up)) / h;
      }
      J.col(j) = col;
    }
    // minimum-norm step: normalized sphere coordinates leave a null direction
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(J);
    cod.setThreshold(1e-5);
    Vec step = cod.solve(Vec(x - p));
    Vec un = S.canonical(u + step);
    Vec pn = S.point(un);
    double fn = (pn - x).squaredNorm();
    double moved = (un - u).norm();
    if (fn > f * (1 + 1e-10) + 1e-30) {
      // finite-difference noise near the minimum
      if (moved < 1e-8) {
        out.ok = true;
        break;
      }
      return out;
    }
    u = un;
    p = pn;
    f = fn;
    // distances are stationary in u, so a small move is enough
    if (moved < 1e-9 || (it == 9 && moved < 1e-7)) {
      out.ok = true;
      break;
    }
  }
  if (!out.ok) return out;
  out.dist = std::sqrt(f);
  out.u = u;
  return out;
}

class PointGrid {
 public:
  PointGrid(const std::vector<Vec>& pts, double cell) : pts_(pts), h_(cell) {
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) cells_[key(pts[i], 0)].push_back(i);
  }
  int nearest(const Vec& x, double reach) const {
    const int D = static_cast<int>(x.size());
    long r = static_cast<long>(std::ceil(reach / h_));
    std::vector<long> c(D, -r);
    int best = -1;
    double bd = 1e300;
    while (true) {
      auto it = cells_.find(key(x, &c));
      if (it != cells_.end())
        for (int j : it->second) {
          double d2 = (pts_[j] - x).squaredNorm();
          if (d2 < bd) {
            bd = d2;
            best = j;
          }
        }
      int e = 0;
      for (; e < D; ++e) {
        if (++c[e] <= r) break;
        c[e] = -r;
      }
      if (e == D) break;
    }
    return best;
  }

 private:
  const std::vector<Vec>& pts_;
  double h_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
  std::uint64_t key(const Vec& x, const std::vector<long>* off) const {
    std::uint64_t k = 1469598103934665603ULL;
    for (int e = 0; e < x.size(); ++e) {
      long c = static_cast<long>(std::floor(x[e] / h_)) + (off ? (*off)[e] : 0);
      k = (k ^ static_cast<std::uint64_t>(c + (1L << 30))) * 1099511628211ULL;
    }
    return k;
  }
};

double box_bump(const OrientedBox& b, const Vec& x, double q) {
  Vec y = b.local(x);
  double w = 1.0;
  for (int i = 0; i < y.size() && w > 0; ++i) w *= bump(y[i] / b.half[i], q);
  return w;
}

}  // namespace

// ---------------------------------------------------------------- lattice

std::uint64_t SpectralLattice::key(const int* xi) const {
  const long long off = 1LL << (bits_ - 1);
  std::uint64_t k = 0;
  for (int i = 0; i < D; ++i) {
    long long v = xi[i] + off;
    if (v < 0 || v >= 2 * off) throw ConfigError("frequency outside the packable range");
    k = (k << bits_) | static_cast<std::uint64_t>(v);
  }
  return k;
}

void SpectralLattice::unpack(std::uint64_t k, int* xi) const {
  const long long off = 1LL << (bits_ - 1);
  const std::uint64_t mask = (1ULL << bits_) - 1;
  for (int i = D - 1; i >= 0; --i) {
    xi[i] = static_cast<int>(static_cast<long long>(k & mask) - off);
    k >>= bits_;
  }
}

int SpectralLattice::find(std::uint64_t k) const {
  auto it = index_.find(k);
  return it == index_.end() ? -1 : it->second;
}

OrientedBox SpectralLattice::sector_box(int a, double scale) const {
  const Sector& s = cov->sectors.at(a);
  return OrientedBox(s.center * double(R), s.frame.axes(), s.half_lengths() * (double(R) * scale));
}

double SpectralLattice::weight(int a, const int* xi) const {
  Vec x(D);
  for (int i = 0; i < D; ++i) x[i] = xi[i];
  int idx = find(key(xi));
  if (idx >= 0) {
    for (int t = row[idx]; t < row[idx + 1]; ++t)
      if (col_sector[t] == a) return col_weight[t];
    return 0.0;
  }
  double mine = box_bump(sector_box(a, shrink), x, q);
  if (mine == 0) return 0.0;
  double sum = 0;
  for (int b = 0; b < M(); ++b) sum += box_bump(sector_box(b, shrink), x, q);
  return mine / sum;
}

double SpectralLattice::distance(const int* xi, const Vec* seed) const {
  const SurfaceModel& S = *cov->surface;
  Vec x(D);
  for (int i = 0; i < D; ++i) x[i] = double(xi[i]) / double(R);
  if (seed) {
    Proj p = project(S, x, *seed);
    if (p.ok) return p.dist * double(R);
  }
  // nearest sector center as the seed, then the robust solver
  int best = 0;
  double bd = 1e300;
  for (const auto& s : cov->sectors) {
    double d2 = (s.center - x).squaredNorm();
    if (d2 < bd) {
      bd = d2;
      best = s.id;
    }
  }
  if (!cov->sectors.empty()) {
    Proj p = project(S, x, cov->sectors[best].param);
    if (p.ok) return p.dist * double(R);
    auto r = S.refine_distance(x, cov->sectors[best].param);
    if (r.converged) return r.distance * double(R);
  }
  return S.distance(x).distance * double(R);
}

std::size_t SpectralLattice::grid_bytes() const {
  double n = std::pow(double(N), D) * sizeof(cplx);
  return n > 1.8e19 ? std::size_t(-1) : static_cast<std::size_t>(n);
}

std::shared_ptr<SpectralLattice> build_lattice(std::shared_ptr<const Covering> cov, int nu, double q) {
  if (!cov || !cov->surface) throw InputError("lattice needs a covering");
  if (nu < 2 || (nu & (nu - 1))) throw ConfigError("oversampling nu must be a power of two >= 2");
  if (cov->delta.j > 20) throw ConfigError("delta too small for the frequency lattice");
  auto lat = std::make_shared<SpectralLattice>();
  SpectralLattice& L = *lat;
  const SurfaceModel& S = *cov->surface;
  L.cov = cov;
  L.D = S.D();
  if (L.D > 4) throw ConfigError("spectral lattices support D <= 4");
  L.bits_ = std::min(21, 64 / L.D);
  L.delta = cov->delta;
  L.R = 1LL << cov->delta.j;
  L.nu = nu;
  L.N = nu * L.R;
  L.q = q;
  const double R = double(L.R);
  const int D = L.D;

  // surface cloud at about one lattice unit
  auto params = param_cloud(S, 1.0 / R);
  if (params.size() > 3e7) throw BudgetError("surface cloud too large for this delta");
  std::vector<Vec> cloud;
  cloud.reserve(params.size());
  for (const auto& u : params) cloud.push_back(S.point(u) * R);

  PointGrid pg(cloud, 2.0);
  double gap = 0;
  {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 400; ++t) {
      Vec y = S.point(S.random_param(rng)) * R;
      int j = pg.nearest(y, 6.0);
      gap = std::max(gap, j < 0 ? 6.0 : (cloud[j] - y).norm());
    }
  }
  const double reach = 1.0 + std::max(1.25 * gap, 0.5);

  std::unordered_map<std::uint64_t, std::pair<double, int>> cand;
  std::vector<int> xi(D), lo(D), hi(D);
  for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
    const Vec& p = cloud[i];
    for (int e = 0; e < D; ++e) {
      lo[e] = static_cast<int>(std::ceil(p[e] - reach));
      hi[e] = static_cast<int>(std::floor(p[e] + reach));
    }
    xi = lo;
    while (true) {
      double d2 = 0;
      for (int e = 0; e < D; ++e) d2 += (xi[e] - p[e]) * (xi[e] - p[e]);
      if (d2 <= reach * reach) {
        auto k = L.key(xi.data());
        auto it = cand.find(k);
        if (it == cand.end())
          cand.emplace(k, std::make_pair(d2, i));
        else if (d2 < it->second.first)
          it->second = {d2, i};
      }
      int e = D - 1;
      for (; e >= 0; --e) {
        if (++xi[e] <= hi[e]) break;
        xi[e] = lo[e];
      }
      if (e < 0) break;
    }
  }
  std::vector<std::uint64_t> ckeys;
  ckeys.reserve(cand.size());
  for (const auto& kv : cand) ckeys.push_back(kv.first);
  std::sort(ckeys.begin(), ckeys.end());

  std::vector<std::uint64_t> band;
  std::vector<double> bdist;
  std::vector<Vec> bfoot;
  Vec x(D);
  for (auto k : ckeys) {
    L.unpack(k, xi.data());
    for (int e = 0; e < D; ++e) x[e] = xi[e] / R;
    const Vec& u0 = params[cand[k].second];
    Proj p = project(S, x, u0);
    double dl;
    Vec foot;
    if (p.ok) {
      dl = p.dist * R;
      foot = p.u;
    } else {
      ++L.projection_fallbacks;
      auto r = S.refine_distance(x, u0);
      dl = r.distance * R;
      foot = r.param;
    }
    if (dl <= 1.0 + 1e-12) {
      band.push_back(k);
      bdist.push_back(dl);
      bfoot.push_back(foot);
      for (int e = 0; e < D; ++e)
        if (2LL * std::abs(xi[e]) >= L.N)
          throw ConfigError("surface band reaches the Nyquist limit; increase nu or shrink the surface");
    }
  }
  L.band_points = static_cast<int>(band.size());

  // shepard cutoffs
  const int M = cov->M();
  std::vector<OrientedBox> boxes;
  std::vector<Vec> blo, bhi;
  for (int a = 0; a < M; ++a) {
    boxes.push_back(L.sector_box(a, L.shrink));
    Vec l = Vec::Constant(D, 1e300), h = Vec::Constant(D, -1e300);
    for (const auto& v : boxes.back().vertices()) {
      l = l.cwiseMin(v);
      h = h.cwiseMax(v);
    }
    blo.push_back(l);
    bhi.push_back(h);
  }
  L.members.assign(M, {});
  L.row.push_back(0);
  std::vector<std::pair<int, double>> hits;
  for (size_t t = 0; t < band.size(); ++t) {
    L.unpack(band[t], xi.data());
    for (int e = 0; e < D; ++e) x[e] = xi[e];
    hits.clear();
    double sum = 0;
    for (int a = 0; a < M; ++a) {
      bool in = true;
      for (int e = 0; e < D && in; ++e) in = x[e] > blo[a][e] && x[e] < bhi[a][e];
      if (!in) continue;
      double w = box_bump(boxes[a], x, q);
      if (w > 0) {
        hits.emplace_back(a, w);
        sum += w;
      }
    }
    if (hits.empty()) {
      ++L.dropped;
      continue;
    }
    const int idx = L.size();
    L.keys.push_back(band[t]);
    L.freqs.insert(L.freqs.end(), xi.begin(), xi.end());
    L.dist.push_back(bdist[t]);
    L.foot.push_back(bfoot[t]);
    for (auto& [a, w] : hits) {
      L.col_sector.push_back(a);
      L.col_weight.push_back(w / sum);
      L.members[a].emplace_back(idx, w / sum);
    }
    L.row.push_back(static_cast<int>(L.col_sector.size()));
    L.index_.emplace(band[t], idx);
  }
  return lat;
}

// ---------------------------------------------------------------- grid functions

double GridFunction::l2sq() const {
  double s = 0;
  for (const auto& c : coef) s += std::norm(c);
  return s;
}

std::vector<int> GridFunction::freqs() const {
  std::vector<int> out(keys.size() * lat->D);
  for (size_t t = 0; t < keys.size(); ++t) lat->unpack(keys[t], &out[t * lat->D]);
  return out;
}

std::vector<cplx> GridFunction::samples(double budget_bytes) const {
  const int D = lat->D;
  const long long N = lat->N;
  if (double(lat->grid_bytes()) > budget_bytes)
    throw BudgetError("grid of " + std::to_string(N) + "^" + std::to_string(D) + " exceeds the memory budget");
  long long total = 1;
  for (int i = 0; i < D; ++i) total *= N;
  std::vector<cplx> a(total, cplx(0, 0));
  std::vector<int> xi(D);
  for (size_t t = 0; t < keys.size(); ++t) {
    lat->unpack(keys[t], xi.data());
    long long idx = 0;
    for (int i = 0; i < D; ++i) {
      long long v = ((xi[i] % N) + N) % N;
      idx = idx * N + v;
    }
    a[idx] += coef[t];
  }
  fft_backward(a, std::vector<int>(D, static_cast<int>(N)));
  return a;
}

cplx GridFunction::eval(const Vec& x) const {
  const int D = lat->D;
  std::vector<int> xi(D);
  cplx s = 0;
  for (size_t t = 0; t < keys.size(); ++t) {
    lat->unpack(keys[t], xi.data());
    double a = 0;
    for (int i = 0; i < D; ++i) a += xi[i] * x[i];
    s += coef[t] * std::polar(1.0, 2 * kPi * a);
  }
  return s;
}

GridFunction GridFunction::from_pairs(std::shared_ptr<const SpectralLattice> lat,
                                      std::vector<std::pair<std::uint64_t, cplx>> pairs, std::string prov) {
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  GridFunction f;
  f.lat = std::move(lat);
  f.provenance = std::move(prov);
  for (const auto& [k, c] : pairs) {
    if (!f.keys.empty() && f.keys.back() == k)
      f.coef.back() += c;
    else {
      f.keys.push_back(k);
      f.coef.push_back(c);
    }
  }
  return f;
}

GridFunction operator+(const GridFunction& a, const GridFunction& b) {
  if (a.lat != b.lat) throw InputError("grid functions live on different lattices");
  std::vector<std::pair<std::uint64_t, cplx>> p;
  p.reserve(a.size() + b.size());
  for (int i = 0; i < a.size(); ++i) p.emplace_back(a.keys[i], a.coef[i]);
  for (int i = 0; i < b.size(); ++i) p.emplace_back(b.keys[i], b.coef[i]);
  return GridFunction::from_pairs(a.lat, std::move(p), a.provenance);
}

GridFunction scaled(const GridFunction& f, cplx s) {
  GridFunction g = f;
  for (auto& c : g.coef) c *= s;
  return g;
}

GridFunction multiply(const GridFunction& f, const TrigPoly& w) {
  const int D = f.lat->D;
  if (w.D != D) throw InputError("window dimension differs from the lattice");
  std::unordered_map<std::uint64_t, cplx> acc;
  acc.reserve(static_cast<size_t>(f.size()) * 2 + w.size());
  std::vector<int> xi(D), z(D);
  for (int t = 0; t < f.size(); ++t) {
    f.lat->unpack(f.keys[t], xi.data());
    for (int s = 0; s < w.size(); ++s) {
      for (int i = 0; i < D; ++i) z[i] = xi[i] + w.freqs[s * D + i];
      acc[f.lat->key(z.data())] += f.coef[t] * w.coef[s];
    }
  }
  std::vector<std::pair<std::uint64_t, cplx>> p(acc.begin(), acc.end());
  return GridFunction::from_pairs(f.lat, std::move(p), f.provenance);
}

GridFunction sector_project(const GridFunction& f, int a) {
  const auto& L = *f.lat;
  if (a < 0 || a >= L.M()) throw InputError("sector index out of range");
  GridFunction g;
  g.lat = f.lat;
  g.provenance = f.provenance + "|sector " + std::to_string(a);
  std::vector<int> xi(L.D);
  for (int t = 0; t < f.size(); ++t) {
    int idx = L.find(f.keys[t]);
    double w = 0;
    if (idx >= 0) {
      for (int s = L.row[idx]; s < L.row[idx + 1]; ++s)
        if (L.col_sector[s] == a) w = L.col_weight[s];
    } else {
      L.unpack(f.keys[t], xi.data());
      w = L.weight(a, xi.data());
    }
    if (w != 0) {
      g.keys.push_back(f.keys[t]);
      g.coef.push_back(f.coef[t] * w);
    }
  }
  return g;
}

// ---------------------------------------------------------------- synthesis

std::vector<int> mask_in_box(const SpectralLattice& lat, const OrientedBox& box) {
  std::vector<int> out;
  Vec x(lat.D);
  for (int i = 0; i < lat.size(); ++i) {
    for (int e = 0; e < lat.D; ++e) x[e] = lat.freqs[i * lat.D + e] / double(lat.R);
    if (box.contains(x)) out.push_back(i);
  }
  return out;
}

GridFunction random_on(std::shared_ptr<const SpectralLattice> lat, const std::vector<int>& points, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<int> pts = points;
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  GridFunction f;
  f.lat = lat;
  f.provenance = "random seed " + std::to_string(seed);
  for (int i : pts) {
    double re = g(rng), im = g(rng);
    f.keys.push_back(lat->keys.at(i));
    f.coef.emplace_back(re / std::sqrt(2.0), im / std::sqrt(2.0));
  }
  return f;
}

KnappResult knapp(std::shared_ptr<const SpectralLattice> lat, bool random_phase, std::uint64_t seed) {
  const auto& L = *lat;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<std::pair<std::uint64_t, int>> chosen;
  std::set<std::uint64_t> used;
  KnappResult out;
  for (int a = 0; a < L.M(); ++a) {
    Vec c = L.cov->sectors[a].center * double(L.R);
    int best = -1;
    double bd = 1e300;
    for (const auto& [i, w] : L.members[a]) {
      double d2 = 0;
      for (int e = 0; e < L.D; ++e) d2 += std::pow(L.freqs[i * L.D + e] - c[e], 2);
      if (d2 < bd) {
        bd = d2;
        best = i;
      }
    }
    if (best < 0 || used.count(L.keys[best])) {
      ++out.skipped;
      continue;
    }
    used.insert(L.keys[best]);
    chosen.emplace_back(L.keys[best], a);
  }
  // phases drawn in sector order so that seeds are stable
  std::vector<std::pair<std::uint64_t, cplx>> pairs;
  std::map<std::uint64_t, int> sec;
  for (auto& [k, a] : chosen) {
    cplx c = random_phase ? std::polar(1.0, 2 * kPi * U(rng)) : cplx(1, 0);
    pairs.emplace_back(k, c);
    sec[k] = a;
  }
  out.f = GridFunction::from_pairs(lat, std::move(pairs),
                                   std::string("knapp ") + (random_phase ? "random" : "ones") + " seed " + std::to_string(seed));
  for (auto k : out.f.keys) out.sector.push_back(sec[k]);
  return out;
}

GridFunction synth(std::shared_ptr<const SpectralLattice> lat, const SynthSpec& spec) {
  const auto& L = *lat;
  if (spec.kind == "knapp") return knapp(lat, spec.random_phase, spec.seed).f;
  if (spec.kind == "character") {
    if (static_cast<int>(spec.xi.size()) != L.D) throw InputError("character frequency needs D entries");
    GridFunction f;
    f.lat = lat;
    f.keys.push_back(L.key(spec.xi.data()));
    f.coef.emplace_back(1.0, 0.0);
    f.provenance = "character";
    return f;
  }
  if (spec.kind == "random" || spec.kind == "sector") {
    std::vector<int> pts;
    if (spec.sigma_j >= 0) {
      if (spec.sigma_j > L.delta.j) throw ConfigError("sigma must be at least delta");
      Covering sc = build_covering(L.cov->surface, Dyadic(spec.sigma_j), L.cov->constants);
      if (spec.sigma_sector < 0 || spec.sigma_sector >= sc.M()) throw InputError("sigma sector out of range");
      pts = mask_in_box(L, sc.sectors[spec.sigma_sector].box());
    } else if (!spec.sectors.empty()) {
      for (int a : spec.sectors) {
        if (a < 0 || a >= L.M()) throw InputError("sector index out of range");
        for (const auto& [i, w] : L.members[a]) pts.push_back(i);
      }
    } else {
      pts.resize(L.size());
      for (int i = 0; i < L.size(); ++i) pts[i] = i;
    }
    return random_on(lat, pts, spec.seed);
  }
  throw InputError("unknown synth kind '" + spec.kind + "'");
}

// ---------------------------------------------------------------- norms

NormReport norms(const GridFunction& f, const std::vector<double>& p, double budget_bytes) {
  const auto& L = *f.lat;
  NormReport r;
  r.p = p;
  r.l2_coef = std::sqrt(f.l2sq());
  auto v = f.samples(budget_bytes);
  const double n = double(v.size());
  std::vector<double> acc(p.size(), 0.0), accd(p.size(), 0.0);
  double l2 = 0;
  for (const auto& z : v) {
    double a = std::abs(z);
    l2 += a * a;
    r.linf = std::max(r.linf, a);
    for (size_t i = 0; i < p.size(); ++i)
      if (std::isfinite(p[i])) acc[i] += std::pow(a, p[i]);
  }
  r.l2_grid = std::sqrt(l2 / n);
  for (size_t i = 0; i < p.size(); ++i) r.lp.push_back(std::isfinite(p[i]) ? std::pow(acc[i] / n, 1.0 / p[i]) : r.linf);
  for (int a = 0; a < L.M(); ++a) {
    GridFunction fa = sector_project(f, a);
    if (fa.size() == 0) continue;
    ++r.sectors_used;
    auto w = fa.samples(budget_bytes);
    double s2 = 0, mx = 0;
    std::vector<double> s(p.size(), 0.0);
    for (const auto& z : w) {
      double b = std::abs(z);
      s2 += b * b;
      mx = std::max(mx, b);
      for (size_t i = 0; i < p.size(); ++i)
        if (std::isfinite(p[i])) s[i] += std::pow(b, p[i]);
    }
    r.sum_sector_l2sq += s2 / n;
    r.linf_delta = std::max(r.linf_delta, mx);
    for (size_t i = 0; i < p.size(); ++i) accd[i] += s[i] / n;
  }
  for (size_t i = 0; i < p.size(); ++i)
    r.lp_delta.push_back(std::isfinite(p[i]) ? std::pow(accd[i], 1.0 / p[i]) : r.linf_delta);
  return r;
}

double exact_moment(const GridFunction& f, int p) {
  if (p < 2 || p % 2) throw InputError("exact moments need an even exponent");
  if (p == 2) return f.l2sq();
  const int D = f.lat->D;
  const int n = f.size();
  if (n == 0) return 0.0;
  auto fr = f.freqs();
  std::vector<int> mn(D, 1 << 30), mx(D, -(1 << 30));
  for (int t = 0; t < n; ++t)
    for (int i = 0; i < D; ++i) {
      mn[i] = std::min(mn[i], fr[t * D + i]);
      mx[i] = std::max(mx[i], fr[t * D + i]);
    }
  std::vector<int> dims(D);
  double grid = 1;
  for (int i = 0; i < D; ++i) {
    dims[i] = smooth_size(static_cast<long long>(p / 2) * (mx[i] - mn[i]) + 1);
    grid *= dims[i];
  }
  const double sparse = std::pow(double(n), p / 2);
  if (sparse <= 20 * grid || grid > double(1 << 27)) {
    if (sparse > 5e9) throw BudgetError("exact moment too expensive");
    // f^{p/2} by repeated convolution, frequencies shifted to be nonnegative
    const int half = p / 2;
    const int bits = std::min(21, 64 / D);
    const std::uint64_t lowmask = (1ULL << bits) - 1;
    std::vector<std::pair<std::vector<int>, cplx>> cur;
    for (int t = 0; t < n; ++t) cur.emplace_back(std::vector<int>(fr.begin() + t * D, fr.begin() + (t + 1) * D), f.coef[t]);
    for (int step = 1; step < half; ++step) {
      std::unordered_map<std::uint64_t, cplx> acc;
      std::vector<int> z(D);
      for (const auto& [a, ca] : cur)
        for (int t = 0; t < n; ++t) {
          std::uint64_t k = 0;
          for (int i = 0; i < D; ++i) {
            z[i] = a[i] + fr[t * D + i];
            k = (k << bits) | static_cast<std::uint64_t>(z[i] - (step + 1) * mn[i]);
          }
          acc[k] += ca * f.coef[t];
        }
      std::vector<std::pair<std::vector<int>, cplx>> next;
      next.reserve(acc.size());
      for (const auto& [k, c] : acc) {
        std::vector<int> z2(D);
        std::uint64_t kk = k;
        for (int i = D - 1; i >= 0; --i) {
          z2[i] = static_cast<int>(kk & lowmask) + (step + 1) * mn[i];
          kk >>= bits;
        }
        next.emplace_back(std::move(z2), c);
      }
      cur.swap(next);
    }
    double s = 0;
    for (const auto& [z, c] : cur) s += std::norm(c);
    return s;
  }
  std::vector<cplx> a(static_cast<size_t>(grid), cplx(0, 0));
  for (int t = 0; t < n; ++t) {
    long long idx = 0;
    for (int i = 0; i < D; ++i) idx = idx * dims[i] + (fr[t * D + i] - mn[i]);
    a[idx] += f.coef[t];
  }
  fft_backward(a, dims);
  double s = 0;
  for (const auto& z : a) s += std::pow(std::norm(z), p / 2);
  return s / grid;
}

double cutoff_kernel_l1(const SpectralLattice& lat, int a, double budget_bytes) {
  if (a < 0 || a >= lat.M()) throw InputError("sector index out of range");
  GridFunction k;
  k.lat = std::shared_ptr<const SpectralLattice>(&lat, [](const SpectralLattice*) {});
  std::vector<std::pair<std::uint64_t, cplx>> p;
  for (const auto& [i, w] : lat.members[a]) p.emplace_back(lat.keys[i], cplx(w, 0));
  k = GridFunction::from_pairs(k.lat, std::move(p));
  auto v = k.samples(budget_bytes);
  double s = 0;
  for (const auto& z : v) s += std::abs(z);
  return s / double(v.size());
}

// ---------------------------------------------------------------- multipliers

double multiplier_symbol(const MultiplierSpec& m, double dist) {
  if (!(m.outer > m.inner)) throw ConfigError("multiplier cutoff needs outer > inner");
  double phi;
  if (dist <= m.inner)
    phi = 1.0;
  else if (dist >= m.outer)
    phi = 0.0;
  else {
    double t = (dist - m.inner) / (m.outer - m.inner);
    double g0 = std::exp(-1.0 / (1.0 - t)), g1 = std::exp(-1.0 / t);
    phi = g0 / (g0 + g1);
  }
  if (phi == 0.0) return 0.0;
  if (dist == 0.0 && m.alpha < 0) throw NumericError("negative multiplier exponent on the surface");
  return std::pow(dist, m.alpha) * phi;
}

namespace {

double dist_of(const SpectralLattice& L, std::uint64_t k, const std::vector<int>& xi) {
  int idx = L.find(k);
  if (idx >= 0) return L.dist[idx];
  // warm start from a mask point nearby
  std::vector<int> z(xi);
  for (int r = 1; r <= 3; ++r)
    for (int e = 0; e < L.D; ++e)
      for (int s : {-1, 1}) {
        z = xi;
        z[e] += s * r;
        int j = L.find(L.key(z.data()));
        if (j >= 0) return L.distance(xi.data(), &L.foot[j]);
      }
  return L.distance(xi.data());
}

}  // namespace

GridFunction apply_multiplier(const GridFunction& f, const MultiplierSpec& m) {
  GridFunction g;
  g.lat = f.lat;
  g.provenance = f.provenance + "|multiplier alpha " + std::to_string(m.alpha);
  std::vector<int> xi(f.lat->D);
  for (int t = 0; t < f.size(); ++t) {
    f.lat->unpack(f.keys[t], xi.data());
    double s = multiplier_symbol(m, dist_of(*f.lat, f.keys[t], xi));
    if (s != 0) {
      g.keys.push_back(f.keys[t]);
      g.coef.push_back(f.coef[t] * s);
    }
  }
  return g;
}

double multiplier_sup(const GridFunction& f, const MultiplierSpec& m) {
  double s = 0;
  std::vector<int> xi(f.lat->D);
  for (int t = 0; t < f.size(); ++t) {
    f.lat->unpack(f.keys[t], xi.data());
    s = std::max(s, std::abs(multiplier_symbol(m, dist_of(*f.lat, f.keys[t], xi))));
  }
  return s;
}

// ---------------------------------------------------------------- localization

namespace {

TrigPoly translated_psi(const WindowLattice& w, long long cell) {
  if (cell < 0 || cell >= w.det) throw InputError("window cell index out of range");
  TrigPoly t = w.psi;
  for (int s = 0; s < t.size(); ++s) t.coef[s] *= w.phase(&t.freqs[s * w.D], cell);
  return t;
}

template <class Allowed>
void check_growth(Localized& out, const GridFunction& g, Allowed&& allowed) {
  const auto& L = *g.lat;
  std::vector<int> xi(L.D);
  for (int t = 0; t < g.size(); ++t) {
    L.unpack(g.keys[t], xi.data());
    double d = dist_of(L, g.keys[t], xi);
    out.max_dist = std::max(out.max_dist, d);
    ++out.outputs_checked;
    if (!allowed(xi, d)) ++out.growth_violations;
  }
}

}  // namespace

Localized localize_cube(const GridFunction& f, Dyadic rho, long long cell, bool check) {
  const auto& L = *f.lat;
  if (rho.j < 0 || rho.j > L.delta.j) throw InputError("cube localization needs delta <= rho <= 1");
  const long long n = 1LL << (L.delta.j - rho.j);
  Localized out;
  out.window = std::make_shared<WindowLattice>(cube_lattice(L.D, n));
  out.cell = cell;
  out.f = multiply(f, translated_psi(*out.window, cell));
  out.f.provenance = f.provenance + "|cube rho " + rho.str();
  if (check) {
    check_growth(out, out.f, [&](const std::vector<int>&, double d) { return d <= double(n) + 1e-9; });
    out.growth_constant = out.max_dist / double(n);
  }
  return out;
}

Localized localize_rbox(const GridFunction& f, const Sector& sigma_sector, double rho, long long cell, double Cpp,
                        bool check) {
  const auto& L = *f.lat;
  const double sigma = sigma_sector.delta.value();
  const double delta = L.delta.value();
  if (rho < delta * (1 - 1e-12) || rho > sigma * (1 + 1e-12)) throw InputError("r-box localization needs delta <= rho <= sigma");
  if (sigma_sector.d + 1 != L.D) throw InputError("sector dimension differs from the lattice");
  RBox rb = r_box(sigma_sector, rho, double(L.R));
  Localized out;
  // halve the window scales until the psi spectrum lies inside the R box
  double factor = 1.0;
  for (int tries = 0;; ++tries) {
    out.window = std::make_shared<WindowLattice>(window_lattice(rb.R.axes, rb.R.half * factor));
    const auto& ps = out.window->psi;
    double g = 0;
    for (int t = 0; t < ps.size(); ++t) {
      Vec z(L.D);
      for (int e = 0; e < L.D; ++e) z[e] = ps.freqs[t * L.D + e];
      g = std::max(g, rb.R.gauge(z));
    }
    out.support_gauge = g;
    if (g <= 1.0 || tries == 6) break;
    factor *= 0.5;
  }
  out.scale_factor = factor;
  out.cell = cell;
  out.f = multiply(f, translated_psi(*out.window, cell));
  out.f.provenance = f.provenance + "|rbox";
  if (check) {
    OrientedBox big(sigma_sector.center * double(L.R), sigma_sector.frame.axes(),
                    sigma_sector.half_lengths() * (Cpp * double(L.R)));
    // band delta + C rho: sector-frame shifts tilt against the local normal
    const double band = 1.0 + kRBoxBand * rho * double(L.R);
    check_growth(out, out.f, [&](const std::vector<int>& xi, double d) {
      Vec x(L.D);
      for (int e = 0; e < L.D; ++e) x[e] = xi[e];
      return d <= band + 1e-9 && big.contains(x);
    });
    out.growth_constant = (out.max_dist - 1.0) / (rho * double(L.R));
  }
  return out;
}

}  // namespace wolff
