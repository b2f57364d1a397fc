#include "wolff/covering.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>

#include "wolff/error.hpp"

namespace wolff {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// bucket grid over flat point arrays
class CellGrid {
 public:
  CellGrid(const std::vector<double>& X, int E, double h) : X_(X), E_(E), h_(h) {
    const int n = static_cast<int>(X.size() / E);
    lo_.assign(E, std::numeric_limits<double>::infinity());
    for (int i = 0; i < n; ++i)
      for (int e = 0; e < E; ++e) lo_[e] = std::min(lo_[e], X[i * E + e]);
    for (int i = 0; i < n; ++i) cells_[key_of(&X[i * E])].push_back(i);
    for (auto& kv : cells_) occupied_.push_back(kv.first);
    std::sort(occupied_.begin(), occupied_.end());
  }

  // calls f(j) for every point in a cell meeting the ball of radius r around p
  template <class F>
  void visit(const double* p, double r, F&& f) const {
    std::vector<long> a(E_), b(E_);
    double count = 1;
    for (int e = 0; e < E_; ++e)
      count *= std::floor((p[e] + r - lo_[e]) / h_) - std::floor((p[e] - r - lo_[e]) / h_) + 1;
    if (!(count < double(occupied_.size()))) {
      for (auto k : occupied_)
        for (int j : cells_.at(k)) f(j);
      return;
    }
    for (int e = 0; e < E_; ++e) {
      a[e] = coord(p[e] - r, e);
      b[e] = coord(p[e] + r, e);
    }
    std::vector<long> c = a;
    while (true) {
      auto it = cells_.find(pack(c));
      if (it != cells_.end())
        for (int j : it->second) f(j);
      int e = 0;
      for (; e < E_; ++e) {
        if (++c[e] <= b[e]) break;
        c[e] = a[e];
      }
      if (e == E_) break;
    }
  }

 private:
  const std::vector<double>& X_;
  int E_;
  double h_;
  std::vector<double> lo_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
  std::vector<std::uint64_t> occupied_;

  long coord(double v, int e) const { return static_cast<long>(std::floor((v - lo_[e]) / h_)); }
  std::uint64_t pack(const std::vector<long>& c) const {
    std::uint64_t k = 0x12345;
    for (long v : c) k = splitmix(k ^ static_cast<std::uint64_t>(v + (1L << 40)));
    return k;
  }
  std::uint64_t key_of(const double* p) const {
    std::vector<long> c(E_);
    for (int e = 0; e < E_; ++e) c[e] = coord(p[e], e);
    return pack(c);
  }
};

double dist(const double* a, const double* b, int E) {
  double s = 0;
  for (int e = 0; e < E; ++e) s += (a[e] - b[e]) * (a[e] - b[e]);
  return std::sqrt(s);
}

std::vector<int> fps_flat(const std::vector<double>& X, int E, double thr, int first) {
  const int n = static_cast<int>(X.size() / E);
  if (n == 0) return {};
  if (first < 0 || first >= n) throw InputError("net start index out of range");
  CellGrid grid(X, E, thr);
  std::vector<double> d(n, std::numeric_limits<double>::infinity());
  struct Entry {
    double d;
    int i;
  };
  // max-heap on d, ties to the smaller index
  auto less = [](const Entry& a, const Entry& b) { return a.d < b.d || (a.d == b.d && a.i > b.i); };
  std::vector<Entry> heap;
  std::vector<int> chosen;
  const double stop = thr * (1.0 - 1e-12);

  auto select = [&](int i, double radius) {
    chosen.push_back(i);
    d[i] = 0.0;
    const double* p = &X[i * E];
    grid.visit(p, radius, [&](int j) {
      double dj = dist(p, &X[j * E], E);
      if (dj < d[j]) {
        d[j] = dj;
        heap.push_back({dj, j});
        std::push_heap(heap.begin(), heap.end(), less);
      }
    });
  };
  select(first, std::numeric_limits<double>::infinity());
  while (!heap.empty()) {
    std::pop_heap(heap.begin(), heap.end(), less);
    Entry e = heap.back();
    heap.pop_back();
    if (e.d != d[e.i]) continue;  // stale
    if (e.d < stop) break;
    select(e.i, e.d);
    if (heap.size() > 8 * static_cast<size_t>(n)) {
      heap.clear();
      for (int j = 0; j < n; ++j)
        if (d[j] > 0) heap.push_back({d[j], j});
      std::make_heap(heap.begin(), heap.end(), less);
    }
  }
  return chosen;
}

std::vector<double> flatten(const std::vector<Vec>& v) {
  if (v.empty()) return {};
  const int E = static_cast<int>(v[0].size());
  std::vector<double> X(v.size() * E);
  for (size_t i = 0; i < v.size(); ++i)
    for (int e = 0; e < E; ++e) X[i * E + e] = v[i][e];
  return X;
}

const double kPi = 3.14159265358979323846;

// candidate directions on S^{m-1} with spacing about h
std::vector<Vec> sphere_candidates(int m, double h, std::uint64_t seed) {
  std::vector<Vec> out;
  if (m == 1) {
    Vec a(1), b(1);
    a << 1.0;
    b << -1.0;
    return {a, b};
  }
  if (m == 2) {
    long n = static_cast<long>(std::ceil(2 * kPi / h - 1e-9));
    n = std::max(n, 4L);
    out.reserve(n);
    for (long i = 0; i < n; ++i) {
      double t = 2 * kPi * double(i) / double(n);
      Vec v(2);
      v << std::cos(t), std::sin(t);
      out.push_back(v);
    }
    return out;
  }
  if (m == 3) {
    long n = static_cast<long>(std::ceil(4 * kPi / (h * h)));
    n = std::max(n, 12L);
    out.reserve(n);
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (long i = 0; i < n; ++i) {
      double z = 1.0 - (2.0 * i + 1.0) / double(n);
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      double t = golden * double(i);
      Vec v(3);
      v << r * std::cos(t), r * std::sin(t), z;
      out.push_back(v);
    }
    return out;
  }
  // higher spheres: seeded gaussian directions at the density of a grid of spacing h
  double area = 2 * std::pow(kPi, m / 2.0) / std::tgamma(m / 2.0);
  double cnt = area / std::pow(h, m - 1);
  if (cnt > 2e7) throw BudgetError("sphere net candidate set too large");
  return sphere_samples(m, static_cast<int>(std::ceil(cnt)), seed + 1);
}

int start_index(std::uint64_t seed, size_t n) {
  if (seed == 0 || n == 0) return 0;
  return static_cast<int>(splitmix(seed) % n);
}

}  // namespace

std::vector<int> farthest_point_sample(const std::vector<Vec>& cand, double threshold, int first) {
  if (cand.empty()) return {};
  return fps_flat(flatten(cand), static_cast<int>(cand[0].size()), threshold, first);
}

Net build_sphere_net(int m, double s, std::uint64_t seed, double density) {
  if (m < 1) throw InputError("sphere dimension must be positive");
  if (!(s > 0) || s >= kPi) throw InputError("net spacing must lie in (0, pi)");
  Net net;
  net.sphere_dim = m;
  net.spacing = s;
  net.seed = seed;
  net.threshold = 2.0 * std::sin(s / 2.0);
  double h = density > 0 ? density : (m == 2 ? s / 8.0 : s / 4.0);
  net.candidate_spacing = h;
  auto cand = sphere_candidates(m, h, seed);
  net.candidates = static_cast<int>(cand.size());
  auto idx = farthest_point_sample(cand, net.threshold, start_index(seed, cand.size()));
  for (int i : idx) net.points.push_back(cand[i]);
  return net;
}

namespace {

// candidate parameters covering the region where surface centers are placed
std::vector<Vec> surface_candidates(const SurfaceModel& model, double h) {
  std::vector<Vec> out;
  auto grid_ball = [&](int m, double R, double step) {
    std::vector<Vec> pts;
    long n = static_cast<long>(std::ceil(R / step));
    if (std::pow(2.0 * n + 1, m) > 5e7) throw BudgetError("surface net candidate grid too large");
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
  };
  switch (model.kind()) {
    case SurfaceKind::Graph: {
      const auto& g = model.graph_data();
      double lip = 1.0;
      if (g.kind == GraphKind::Quadratic) {
        Eigen::SelfAdjointEigenSolver<Mat> es(g.hessian);
        lip = std::sqrt(1.0 + std::pow(es.eigenvalues().cwiseAbs().maxCoeff() * g.domain_radius, 2));
      } else {
        double r = g.sphere_radius;
        lip = r / std::sqrt(r * r - g.domain_radius * g.domain_radius);
      }
      return grid_ball(model.d(), g.domain_radius, h / lip);
    }
    case SurfaceKind::Conical: {
      const auto& c = model.conical_data();
      double C0 = 0.5 * (c.c1 + c.c2);
      if (c.body_base) {
        double rho = 1e-3;
        for (const auto& n : sphere_samples(model.d(), 400, 9))
          rho = std::max(rho, c.body->curvature_radii(n).norm());
        for (auto& w : sphere_candidates(model.d(), h / (C0 * rho), 0)) out.push_back(model.conical_param(w, C0));
      } else {
        Eigen::SelfAdjointEigenSolver<Mat> es(c.base_hessian);
        double lip = std::sqrt(1.0 + std::pow(es.eigenvalues().cwiseAbs().maxCoeff() * c.base_radius, 2));
        for (auto& v : grid_ball(model.d() - 1, c.base_radius, h / (C0 * lip * (1.0 + c.x_offset.norm()))))
          out.push_back(model.conical_param(v, C0));
      }
      return out;
    }
    case SurfaceKind::KCone: throw InputError("k-cone nets are built from direction nets");
  }
  return out;
}

}  // namespace

Net build_surface_net(const SurfaceModel& model, double s, std::uint64_t seed) {
  if (!(s > 0)) throw InputError("net spacing must be positive");
  Net net;
  net.spacing = s;
  net.threshold = s;
  net.seed = seed;
  // center sets that are curves get the finer spacing used for circle nets
  const bool curve = model.kind() == SurfaceKind::Graph ? model.d() == 1 : model.d() == 2;
  net.candidate_spacing = curve ? s / 8.0 : s / 4.0;
  auto params = surface_candidates(model, net.candidate_spacing);
  net.candidates = static_cast<int>(params.size());
  std::vector<Vec> pts;
  pts.reserve(params.size());
  for (const auto& u : params) pts.push_back(model.point(u));
  auto idx = farthest_point_sample(pts, s, start_index(seed, pts.size()));
  for (int i : idx) {
    net.points.push_back(pts[i]);
    net.params.push_back(params[i]);
  }
  return net;
}

NetCheck check_net(const Net& net, const std::vector<Vec>& probes) {
  NetCheck out;
  const bool sphere = net.sphere_dim > 0;
  auto metric = [&](const Vec& a, const Vec& b) {
    if (sphere) return std::acos(std::clamp(a.dot(b), -1.0, 1.0));
    return (a - b).norm();
  };
  out.min_pair = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < net.points.size(); ++i)
    for (size_t j = i + 1; j < net.points.size(); ++j)
      out.min_pair = std::min(out.min_pair, metric(net.points[i], net.points[j]));
  for (const auto& p : probes) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : net.points) best = std::min(best, metric(p, q));
    out.max_probe = std::max(out.max_probe, best);
  }
  return out;
}

// ---------------------------------------------------------------- sectors

Vec Sector::half_lengths() const {
  Vec h(d + 1);
  h[0] = 0.5 * C * delta.value();
  for (int i = 0; i < d - k; ++i) h[1 + i] = 0.5 * C * delta.sqrt();
  for (int i = 0; i < k; ++i) h[1 + d - k + i] = 0.5 * C;
  return h;
}

OrientedBox Sector::box() const { return OrientedBox(center, frame.axes(), half_lengths()); }

OrientedBox Sector::box_at(const Dyadic& scale) const {
  Sector s = *this;
  s.delta = scale;
  return s.box();
}

Covering build_covering(std::shared_ptr<const SurfaceModel> model, Dyadic delta, const CoveringConstants& constants,
                        std::uint64_t seed) {
  if (!model) throw InputError("covering needs a surface");
  if (delta.j < 2) throw ConfigError("delta must be 2^-j with j >= 2 (scale too coarse for the surface)");
  if (!(constants.C > 0) || !(constants.c > 0) || !(constants.Cpp >= 1))
    throw ConfigError("covering constants must be positive with C'' >= 1");
  Covering cov;
  cov.surface = model;
  cov.surface_ref = model->name;
  cov.delta = delta;
  cov.constants = constants;
  const double s = delta.sqrt();
  const int d = model->d(), k = model->k();

  auto add = [&](const Vec& u, const Frame& f) {
    Sector sec;
    sec.id = cov.M();
    sec.center = f.point;
    sec.frame = f;
    sec.param = u;
    sec.delta = delta;
    sec.C = constants.C;
    sec.d = d;
    sec.k = k;
    cov.sectors.push_back(std::move(sec));
  };

  if (model->kind() == SurfaceKind::KCone) {
    const int m = d - k + 1;
    // support points move by (curvature radius) x angle, so the direction spacing
    // shrinks by the largest radius to keep neighbouring sectors overlapping
    double rho = 1.0;
    for (const auto& n : sphere_samples(m, 256, 17))
      for (const auto& g : model->kcone_data().generators) {
        Mat T = sphere_tangent_basis(n);
        Eigen::SelfAdjointEigenSolver<Mat> es(T.transpose() * g.curvature_radii(n) * T);
        rho = std::max(rho, es.eigenvalues().maxCoeff());
      }
    cov.net = build_sphere_net(m, s / rho, seed);
    // simplex extent in ambient units decides how many flat steps are needed
    double diam = 0.0;
    for (const auto& n : sphere_samples(m, 64, 13)) {
      auto gt = model->good_tuple(n);
      for (int i = 0; i <= k; ++i)
        for (int j = i + 1; j <= k; ++j) diam = std::max(diam, (gt.points[i] - gt.points[j]).norm());
    }
    int q = std::max(1, static_cast<int>(std::ceil(diam / (0.5 * constants.C) - 1e-12)));
    cov.simplex_divisions = q;
    // compositions of q-1 into k+1 parts, lexicographic
    std::vector<Vec> alphas;
    std::vector<int> comp(k + 1, 0);
    std::function<void(int, int)> rec = [&](int i, int left) {
      if (i == k) {
        comp[k] = left;
        Vec a(k + 1);
        for (int t = 0; t <= k; ++t) a[t] = (comp[t] + 1.0 / (k + 1)) / q;
        alphas.push_back(a);
        return;
      }
      for (int v = 0; v <= left; ++v) {
        comp[i] = v;
        rec(i + 1, left - v);
      }
    };
    rec(0, q - 1);
    for (const auto& n : cov.net.points)
      for (const auto& a : alphas) {
        Vec u = model->kcone_param(n, a);
        add(u, model->frame(u));
      }
  } else {
    cov.net = build_surface_net(*model, s, seed);
    for (const auto& u : cov.net.params) add(u, model->frame(u));
  }
  return cov;
}

// ---------------------------------------------------------------- verification

namespace {

struct SectorIndex {
  std::vector<OrientedBox> boxes;
  std::vector<double> radius2;
  std::vector<double> X;
  int E = 0;
  double h = 0;
  std::unique_ptr<CellGrid> grid;

  explicit SectorIndex(const Covering& cov) {
    E = cov.surface->D();
    double rmax = 0;
    for (const auto& s : cov.sectors) {
      boxes.push_back(s.box());
      double r = boxes.back().circumradius();
      radius2.push_back(r * r);
      rmax = std::max(rmax, r);
      for (int e = 0; e < E; ++e) X.push_back(s.center[e]);
    }
    h = std::max(rmax, 1e-9);
    if (!cov.sectors.empty()) grid = std::make_unique<CellGrid>(X, E, h);
  }

  template <class F>
  void candidates(const Vec& x, F&& f) const {
    if (!grid) return;
    grid->visit(x.data(), h, [&](int j) {
      double s = 0;
      for (int e = 0; e < E; ++e) s += (x[e] - X[j * E + e]) * (x[e] - X[j * E + e]);
      if (s <= radius2[j] * (1 + 1e-12)) f(j);
    });
  }
};

}  // namespace

CoveringReport verify_assumption_A(const Covering& cov, const Covering& coarse, const VerifyOptions& opt) {
  if (!cov.surface || cov.surface != coarse.surface) throw InputError("coverings are over different surfaces");
  if (coarse.delta.j > cov.delta.j) throw InputError("coarse covering must have sigma >= delta");
  const auto& S = *cov.surface;
  const double delta = cov.delta.value();
  const double s = cov.delta.sqrt();
  const auto& K = cov.constants;
  CoveringReport rep;
  rep.delta = cov.delta;
  rep.sigma = coarse.delta;
  rep.M_delta = cov.M();
  SectorIndex index(cov);

  // (1) overlap and coverage on samples of S_delta
  {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    long total = 0;
    for (int i = 0; i < opt.samples; ++i) {
      Vec u = S.random_param(rng);
      double tau = U(rng);
      Vec x = S.point(u) + tau * delta * S.normal(u);
      int count = 0;
      index.candidates(x, [&](int j) {
        if (index.boxes[j].contains(x, 1e-12)) ++count;
      });
      total += count;
      rep.max_overlap = std::max(rep.max_overlap, count);
      if (count == 0) {
        if (S.on_boundary(u, 2 * delta)) ++rep.coverage_boundary;
        else ++rep.coverage_failures;
      }
    }
    rep.mean_overlap = opt.samples > 0 ? double(total) / opt.samples : 0.0;
  }

  // (2) angular separation, both readings
  {
    const double r = K.c * s;
    std::vector<double> N;
    const int E = S.D();
    for (const auto& sec : cov.sectors)
      for (int e = 0; e < E; ++e) N.push_back(sec.frame.normal[e]);
    if (!N.empty()) {
      CellGrid g(N, E, std::max(r, 1e-9));
      for (int a = 0; a < cov.M(); ++a) {
        int close = 0, strictly = 0;
        g.visit(&N[a * E], r, [&](int b) {
          if (b == a) return;
          double dd = dist(&N[a * E], &N[b * E], E);
          if (dd <= r) ++close;
          if (dd < r) ++strictly;
        });
        rep.K_ang = std::max(rep.K_ang, close);
        if (close > K.K_ang_bound) ++rep.ang_violations;
        rep.K_ang_printed = std::max(rep.K_ang_printed, cov.M() - 1 - strictly);
      }
    }
  }

  // (3) consistency against the coarse covering
  {
    std::vector<OrientedBox> cboxes, dil;
    for (const auto& a : coarse.sectors) {
      cboxes.push_back(a.box());
      dil.push_back(cboxes.back().dilate(K.Cpp));
    }
    for (int b = 0; b < cov.M(); ++b) {
      OrientedBox bb = index.boxes[b];
      for (size_t a = 0; a < cboxes.size(); ++a) {
        if (!cboxes[a].contains(cov.sectors[b].center, 1e-12)) continue;
        ++rep.consistency_checked;
        if (!dil[a].contains_box(bb, 1e-12)) ++rep.consistency_violations;
      }
    }
  }

  // (4) containment of c Pi in S_delta ∩ {(x-a).n(a) <= C delta}
  if (cov.M() > 0 && opt.containment_samples > 0) {
    std::mt19937_64 rng(opt.seed + 1);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const int per = std::max(1, opt.containment_samples / cov.M());
    for (const auto& sec : cov.sectors) {
      OrientedBox small = index.boxes[sec.id].dilate(K.c);
      for (int i = 0; i < per; ++i) {
        Vec y(S.D());
        for (int e = 0; e < S.D(); ++e) y[e] = U(rng) * small.half[e];
        Vec x = small.center + small.axes * y;
        ++rep.containment_checked;
        if ((x - sec.center).dot(sec.frame.normal) > K.C * delta) {
          ++rep.containment_failures;
          continue;
        }
        auto r = S.refine_distance(x, sec.param);
        if (!r.converged) {
          r = S.distance(x);
          if (r.fallback) ++rep.distance_fallbacks;
        }
        if (r.on_boundary) {
          ++rep.containment_boundary;
          continue;
        }
        if (r.distance > delta * (1 + 1e-9)) ++rep.containment_failures;
      }
    }
  }

  double vol = 0;
  for (const auto& b : index.boxes) vol += b.volume();
  rep.mean_volume = cov.M() > 0 ? vol / cov.M() : 0.0;
  rep.volume_ratio = rep.mean_volume / std::pow(delta, 0.5 * (S.d() - S.k()) + 1.0);
  return rep;
}

CoveringStats covering_stats(std::shared_ptr<const SurfaceModel> model, const std::vector<Dyadic>& deltas,
                             Dyadic sigma, const CoveringConstants& constants) {
  if (deltas.size() < 3) throw InputError("covering_stats needs at least 3 scales");
  for (const auto& d : deltas)
    if (d.j < sigma.j) throw ConfigError("every delta must be <= sigma");
  CoveringStats st;
  st.sigma = sigma;
  Covering coarse = build_covering(model, sigma, constants);
  st.M_sigma = coarse.M();
  std::vector<OrientedBox> cboxes;
  for (const auto& a : coarse.sectors) cboxes.push_back(a.box());
  ScalingSeries series;
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (const auto& dl : deltas) {
    Covering cov = build_covering(model, dl, constants);
    StatsRow row;
    row.delta = dl;
    row.M = cov.M();
    double vol = 0;
    for (const auto& s : cov.sectors) vol += s.box().volume();
    row.mean_volume = row.M > 0 ? vol / row.M : 0.0;
    row.volume_ratio = row.mean_volume / std::pow(dl.value(), 0.5 * (model->d() - model->k()) + 1.0);
    // nearest assignment puts every delta-center in exactly one sigma-sector
    row.M_sigma_delta = st.M_sigma > 0 ? double(row.M) / st.M_sigma : 0.0;
    long inside = 0;
    for (const auto& b : cov.sectors)
      for (const auto& a : cboxes)
        if (a.contains(b.center, 1e-12)) ++inside;
    row.M_sigma_delta_containing = st.M_sigma > 0 ? double(inside) / st.M_sigma : 0.0;
    lo = std::min(lo, row.volume_ratio);
    hi = std::max(hi, row.volume_ratio);
    series.deltas.push_back(dl);
    series.values.push_back(row.M);
    st.rows.push_back(row);
  }
  st.volume_ratio_spread = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
  st.M_fit = scaling_fit(series, 0.5 * (model->d() - model->k()), 0.1);
  return st;
}

}  // namespace wolff
