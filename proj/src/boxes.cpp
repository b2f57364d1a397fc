#include "wolff/boxes.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "wolff/error.hpp"

namespace wolff {

namespace {
const double kPi = 3.14159265358979323846;
}

OrientedBox dual_box(const OrientedBox& b) {
  // keep the source half-lengths so that dualizing twice is exact
  bool exact = b.recip.size() == b.half.size() && b.recip.cwiseInverse() == b.half;
  OrientedBox d(b.center, b.axes, exact ? b.recip : Vec(b.half.cwiseInverse()));
  d.recip = b.half;
  return d;
}

OrientedBox plate_shape(const Sector& s, bool torus_units) {
  OrientedBox sb(Vec::Zero(s.d + 1), s.frame.axes(), s.half_lengths());
  if (torus_units) sb.half /= s.delta.value();
  return dual_box(sb);
}

std::vector<Plate> plate_tiling(const Sector& s, const OrientedBox& region, bool torus_units) {
  OrientedBox shape = plate_shape(s, torus_units);
  const int D = shape.D();
  if (region.D() != D) throw InputError("region dimension differs from the sector");
  Vec full = 2.0 * shape.half;
  std::vector<long> lo(D), hi(D);
  double count = 1;
  auto verts = region.vertices();
  for (int i = 0; i < D; ++i) {
    double a = std::numeric_limits<double>::infinity(), b = -a;
    for (const auto& v : verts) {
      double t = shape.axes.col(i).dot(v);
      a = std::min(a, t);
      b = std::max(b, t);
    }
    lo[i] = static_cast<long>(std::floor(a / full[i])) - 1;
    hi[i] = static_cast<long>(std::ceil(b / full[i]));
    count *= double(hi[i] - lo[i] + 1);
  }
  if (count > 5e7) throw BudgetError("plate tiling enumeration too large");
  std::vector<Plate> out;
  std::vector<long> c = lo;
  while (true) {
    Vec y(D);
    for (int i = 0; i < D; ++i) y[i] = (double(c[i]) + 0.5) * full[i];
    OrientedBox pb(shape.axes * y, shape.axes, shape.half);
    if (pb.overlaps(region, 1e-12 * full.minCoeff())) {
      Plate p;
      p.box = pb;
      p.owner = s.id;
      p.b.assign(c.begin(), c.end());
      out.push_back(std::move(p));
    }
    int i = 0;
    for (; i < D; ++i) {
      if (++c[i] <= hi[i]) break;
      c[i] = lo[i];
    }
    if (i == D) break;
  }
  return out;
}

OrientedBox extend_plate(const Plate& p, const Dyadic& sigma, const Dyadic& delta, int k) {
  if (sigma.j > delta.j) throw InputError("tubes need delta <= sigma");
  OrientedBox t = p.box;
  const double ext = std::sqrt(std::pow(2.0, double(delta.j - sigma.j)));
  for (int i = t.D() - k; i < t.D(); ++i) t.half[i] *= ext;
  return t;
}

TubeFamily build_tubes(const std::vector<Plate>& plates, const std::vector<Sector>& sectors, Dyadic sigma,
                       Dyadic delta, double C) {
  TubeFamily fam;
  fam.sigma = sigma;
  fam.delta = delta;
  fam.C = C;
  if (plates.empty()) return fam;
  auto sector_of = [&](int id) -> const Sector& {
    if (id < 0 || id >= static_cast<int>(sectors.size()) || sectors[id].id != id)
      throw InputError("plate owner is not a sector of the given covering");
    return sectors[id];
  };
  const int k = sector_of(plates[0].owner).k;
  std::vector<OrientedBox> cand;
  cand.reserve(plates.size());
  for (const auto& p : plates) cand.push_back(extend_plate(p, sigma, delta, k));

  // orientation prefilter: shapes at a common center must nest for any translate to nest
  auto shape_nests = [&](const OrientedBox& a, const OrientedBox& b, double f) {
    OrientedBox a0(Vec::Zero(a.D()), a.axes, a.half), b0(Vec::Zero(b.D()), b.axes, b.half * f);
    return b0.contains_box(a0, 1e-12);
  };
  std::map<std::pair<int, int>, bool> compat;
  auto compatible = [&](int i, int j) {
    int a = plates[i].owner, b = plates[j].owner;
    auto key = std::make_pair(a, b);
    auto it = compat.find(key);
    if (it != compat.end()) return it->second;
    bool ok = shape_nests(cand[i], cand[j], C) || shape_nests(cand[j], cand[i], C);
    compat[key] = ok;
    compat[{b, a}] = ok;
    return ok;
  };

  std::vector<int> kept;  // candidate indices
  std::vector<int> discarded_by(plates.size(), -1);
  for (size_t i = 0; i < plates.size(); ++i) {
    int hit = -1;
    for (int j : kept) {
      if (!compatible(static_cast<int>(i), j)) continue;
      if (cand[j].dilate(C).contains_box(cand[i], 1e-12) || cand[i].dilate(C).contains_box(cand[j], 1e-12)) {
        hit = j;
        break;
      }
    }
    if (hit < 0) {
      kept.push_back(static_cast<int>(i));
    } else {
      discarded_by[i] = hit;
      fam.discarded.push_back(static_cast<int>(i));
    }
  }
  std::vector<int> tube_of_cand(plates.size(), -1);
  for (int j : kept) {
    Tube t;
    t.box = cand[j];
    t.plate = j;
    t.owner = plates[j].owner;
    tube_of_cand[j] = static_cast<int>(fam.tubes.size());
    fam.tubes.push_back(std::move(t));
  }
  std::vector<OrientedBox> wide;
  for (const auto& t : fam.tubes) wide.push_back(t.box.dilate(2 * C));
  fam.assignment.assign(plates.size(), -1);
  std::vector<std::set<int>> owners(fam.tubes.size());
  for (size_t i = 0; i < plates.size(); ++i) {
    int a = tube_of_cand[i];
    if (a < 0) {
      for (size_t t = 0; t < fam.tubes.size(); ++t)
        if (compatible(static_cast<int>(i), fam.tubes[t].plate) && wide[t].contains_box(plates[i].box, 1e-12)) {
          a = static_cast<int>(t);
          break;
        }
      if (a < 0) {
        a = tube_of_cand[discarded_by[i]];
        ++fam.fallbacks;
      }
    }
    fam.assignment[i] = a;
    owners[a].insert(plates[i].owner);
  }
  for (const auto& o : owners) fam.K_dir = std::max(fam.K_dir, static_cast<int>(o.size()));
  return fam;
}

RBox r_box(const Sector& s, double rho, double dilation) {
  const double sigma = s.delta.value();
  if (!(rho > 0) || rho > sigma * (1 + 1e-12)) throw InputError("r_box needs 0 < rho <= sigma");
  const int D = s.d + 1;
  Vec h(D);
  h[0] = rho;
  for (int i = 0; i < s.d - s.k; ++i) h[1 + i] = rho / std::sqrt(sigma);
  for (int i = 0; i < s.k; ++i) h[1 + s.d - s.k + i] = rho / sigma;
  RBox r;
  r.R = OrientedBox(Vec::Zero(D), s.frame.axes(), h * dilation);
  r.R0 = dual_box(r.R);
  return r;
}

// ---------------------------------------------------------------- windows

double bump(double t, double q) {
  double a = std::abs(t);
  if (a >= 1.0) return 0.0;
  return std::exp(q * (1.0 - 1.0 / (1.0 - a * a)));
}

struct RadialTable {
  double h = 0.01;
  double xmax = 120.0;
  double scale = 1.0;  // eta-hat = scale * bump(rho / r)
  std::vector<double> v;
};

namespace {

double sphere_area(int D) { return 2 * std::pow(kPi, D / 2.0) / std::tgamma(D / 2.0); }

// composite gauss-legendre over [0, r]
template <class F>
double radial_quad(double r, F&& f) {
  using boost::math::quadrature::gauss;
  const int panels = 8;
  double s = 0;
  for (int p = 0; p < panels; ++p) {
    double a = r * p / panels, b = r * (p + 1) / panels;
    s += gauss<double, 20>::integrate(f, a, b);
  }
  return s;
}

std::shared_ptr<const RadialTable> make_table(int D, double r) {
  auto t = std::make_shared<RadialTable>();
  double l2 = sphere_area(D) * radial_quad(r, [&](double p) { return std::pow(p, D - 1) * std::pow(bump(p / r), 2); });
  t->scale = 1.0 / std::sqrt(l2);
  const int n = static_cast<int>(std::ceil(t->xmax / t->h)) + 3;
  t->v.resize(n);
  const double nu = D / 2.0 - 1.0;
  for (int i = 0; i < n; ++i) {
    double x = i * t->h;
    double val;
    if (x == 0.0) {
      val = sphere_area(D) * radial_quad(r, [&](double p) { return std::pow(p, D - 1) * bump(p / r); });
    } else if (D == 3) {
      val = 2.0 / x * radial_quad(r, [&](double p) { return bump(p / r) * p * std::sin(2 * kPi * x * p); });
    } else if (D == 1) {
      val = 2.0 * radial_quad(r, [&](double p) { return bump(p / r) * std::cos(2 * kPi * x * p); });
    } else {
      val = 2 * kPi * std::pow(x, -nu) *
            radial_quad(r, [&](double p) { return bump(p / r) * std::cyl_bessel_j(nu, 2 * kPi * x * p) * std::pow(p, D / 2.0); });
    }
    t->v[i] = val * t->scale;
  }
  return t;
}

}  // namespace

WindowSpec WindowSpec::phi(int D, double K) {
  if (D < 1) throw InputError("window dimension must be positive");
  WindowSpec w;
  w.kind = WindowKind::Phi;
  w.D = D;
  w.K = K > 0 ? K : 10.0 * (D + 1);
  return w;
}

WindowSpec WindowSpec::psi(int D, double r_eta) {
  if (D < 1) throw InputError("window dimension must be positive");
  if (!(r_eta > 0 && r_eta < 0.5)) throw ConfigError("r_eta must lie in (0, 1/2)");
  WindowSpec w;
  w.kind = WindowKind::Psi;
  w.D = D;
  w.r_eta = r_eta;
  w.table = make_table(D, r_eta);
  return w;
}

double WindowSpec::eta_hat(double rho) const {
  if (!table) throw InputError("eta-hat needs a psi window");
  return table->scale * bump(rho / r_eta);
}

double WindowSpec::eta(double x) const {
  if (!table) throw InputError("eta needs a psi window");
  const auto& t = *table;
  x = std::abs(x);
  if (x >= t.xmax) return 0.0;
  // cubic lagrange through 4 table points
  double u = x / t.h;
  int i = static_cast<int>(std::floor(u));
  double f = u - i;
  auto at = [&](int j) { return j < 0 ? t.v[-j] : t.v[j]; };  // even extension at 0
  double p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
  return -p0 * f * (f - 1) * (f - 2) / 6 + p1 * (f + 1) * (f - 1) * (f - 2) / 2 - p2 * (f + 1) * f * (f - 2) / 2 +
         p3 * (f + 1) * f * (f - 1) / 6;
}

double WindowSpec::phi_value(double x2) const { return std::pow(1.0 + x2, -0.5 * K); }

double window_eval(const WindowSpec& spec, const OrientedBox& box, const Vec& x) {
  if (box.D() != x.size()) throw InputError("window point has wrong dimension");
  Vec y = box.local(x).cwiseQuotient(2.0 * box.half);
  if (spec.kind == WindowKind::Phi) return spec.phi_value(y.squaredNorm());
  double e = spec.eta(y.norm());
  return e * e;
}

}  // namespace wolff
