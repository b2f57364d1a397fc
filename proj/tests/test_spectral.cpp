#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "wolff/spectral.hpp"

using namespace wolff;

namespace {

const double kPi = 3.14159265358979323846;

std::shared_ptr<const Covering> cone_cover(int j, double c2 = 1.5) {
  auto S = std::make_shared<const SurfaceModel>(SurfaceModel::circular_cone(1.0, c2));
  return std::make_shared<const Covering>(build_covering(S, Dyadic(j)));
}

// distance to the cone {t(cos, sin, 1) : c1 <= t <= c2} in the (r, z) half plane
double cone_dist(double x, double y, double z, double c1, double c2) {
  double r = std::hypot(x, y);
  double ax = c1, az = c1, bx = c2, bz = c2;
  double vx = bx - ax, vz = bz - az;
  double t = ((r - ax) * vx + (z - az) * vz) / (vx * vx + vz * vz);
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(r - ax - t * vx, z - az - t * vz);
}

struct Fixture {
  std::shared_ptr<const SpectralLattice> lat;
  Fixture() { lat = build_lattice(cone_cover(4)); }
};

Fixture& fx() {
  static Fixture f;
  return f;
}

double brute_moment4(const GridFunction& f) {
  auto fr = f.freqs();
  const int D = f.D(), n = f.size();
  std::map<std::vector<int>, cplx> sq;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      std::vector<int> z(D);
      for (int i = 0; i < D; ++i) z[i] = fr[a * D + i] + fr[b * D + i];
      sq[z] += f.coef[a] * f.coef[b];
    }
  double s = 0;
  for (auto& [z, c] : sq) s += std::norm(c);
  return s;
}

}  // namespace

TEST_CASE("frequency mask against the analytic cone distance") {
  const auto& L = *fx().lat;
  CHECK(L.R == 16);
  CHECK(L.N == 64);
  int oracle = 0;
  double worst = 0;
  std::vector<int> xi(3);
  for (int a = -32; a < 32; ++a)
    for (int b = -32; b < 32; ++b)
      for (int c = -32; c < 32; ++c) {
        double d = 16.0 * cone_dist(a / 16.0, b / 16.0, c / 16.0, 1.0, 1.5);
        if (d <= 1.0) ++oracle;
        xi = {a, b, c};
        int idx = L.find(L.key(xi.data()));
        if (idx >= 0) {
          CHECK(d <= 1.0 + 1e-9);
          worst = std::max(worst, std::abs(d - L.dist[idx]));
        }
      }
  MESSAGE("mask " << L.size() << " band " << L.band_points << " oracle " << oracle << " dropped " << L.dropped
                  << " fallbacks " << L.projection_fallbacks);
  CHECK(L.band_points == oracle);
  CHECK(L.size() + L.dropped == oracle);
  CHECK(worst < 1e-8);
}

TEST_CASE("cutoffs partition unity on the mask") {
  const auto& L = *fx().lat;
  double worst = 0;
  for (int i = 0; i < L.size(); ++i) {
    double s = 0;
    for (int t = L.row[i]; t < L.row[i + 1]; ++t) s += L.col_weight[t];
    worst = std::max(worst, std::abs(s - 1));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("plancherel and sampling") {
  auto lat = fx().lat;
  double worst = 0;
  for (int s = 0; s < 20; ++s) {
    SynthSpec sp;
    sp.seed = 100 + s;
    auto f = synth(lat, sp);
    auto v = f.samples();
    double g = 0;
    for (auto& z : v) g += std::norm(z);
    g /= double(v.size());
    worst = std::max(worst, std::abs(g / f.l2sq() - 1));
    if (s == 0) {
      // grid point (i, j, k) / N against the direct sum
      for (long long idx : {0LL, 12345LL, 200000LL}) {
        Vec x(3);
        x << double(idx / 4096) / 64, double((idx / 64) % 64) / 64, double(idx % 64) / 64;
        CHECK(std::abs(v[idx] - f.eval(x)) < 1e-9);
      }
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("sector projections sum to f") {
  auto lat = fx().lat;
  SynthSpec sp;
  sp.seed = 3;
  auto f = synth(lat, sp);
  GridFunction sum = scaled(f, 0.0);
  for (int a = 0; a < lat->M(); ++a) sum = sum + sector_project(f, a);
  auto diff = sum + scaled(f, -1.0);
  CHECK(std::sqrt(diff.l2sq() / f.l2sq()) < 1e-12);
}

TEST_CASE("interpolation inequality and the cutoff kernel bound") {
  auto lat = fx().lat;
  double cxi = 0;
  for (int a = 0; a < lat->M(); ++a) cxi = std::max(cxi, cutoff_kernel_l1(*lat, a));
  MESSAGE("C_Xi " << cxi);
  for (int s = 0; s < 4; ++s) {
    SynthSpec sp;
    sp.seed = 40 + s;
    auto f = synth(lat, sp);
    auto r = norms(f, {2, 4, 6, kInf});
    for (int i = 0; i < 3; ++i) {
      double p = r.p[i];
      double lhs = std::pow(r.lp_delta[i], p);
      double rhs = std::pow(r.linf_delta, p - 2) * r.sum_sector_l2sq;
      CHECK(lhs <= rhs * (1 + 1e-12));
    }
    CHECK(r.linf_delta <= cxi * r.linf * (1 + 1e-12));
    CHECK(r.l2_grid == doctest::Approx(r.l2_coef).epsilon(1e-12));
  }
}

TEST_CASE("exact moments") {
  auto lat = fx().lat;
  std::vector<int> pts;
  for (int i = 0; i < lat->size(); i += lat->size() / 9) pts.push_back(i);
  auto f = random_on(lat, pts, 5);
  double b = brute_moment4(f);
  CHECK(exact_moment(f, 4) == doctest::Approx(b).epsilon(1e-12));
  // the grid branch is taken for dense inputs
  auto g = synth(lat, SynthSpec{});
  auto r = norms(g, {4});
  double ex = exact_moment(g, 4);
  MESSAGE("grid L4^4 " << std::pow(r.lp[0], 4) << " exact " << ex);
  CHECK(ex > 0);
  auto h = random_on(lat, {pts[0], pts[1], pts[2]}, 9);
  double direct = 0;
  const int T = 64;
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < T; ++j)
      for (int k = 0; k < T; ++k) {
        Vec x(3);
        x << double(i) / T, double(j) / T, double(k) / T;
        direct += std::pow(std::norm(h.eval(x)), 3);
      }
  CHECK(exact_moment(h, 6) == doctest::Approx(direct / (T * T * T)).epsilon(1e-9));
}

TEST_CASE("knapp example") {
  auto lat = fx().lat;
  for (bool rp : {false, true}) {
    auto k = knapp(lat, rp, 11);
    const int M = lat->M() - k.skipped;
    CHECK(k.f.l2sq() == doctest::Approx(double(M)).epsilon(1e-12));
    double pd = 0;
    for (int a = 0; a < lat->M(); ++a) pd += exact_moment(sector_project(k.f, a), 4);
    MESSAGE("knapp M " << M << " skipped " << k.skipped << " ||f||_{4,delta}^4 " << pd);
    CHECK(pd >= 0.5 * M);
    CHECK(pd <= 2.0 * M);
    double l4 = std::pow(exact_moment(k.f, 4), 0.25);
    CHECK(l4 >= 0.5 * std::sqrt(double(M)));
  }
}

TEST_CASE("multipliers") {
  auto lat = fx().lat;
  auto f = synth(lat, SynthSpec{});
  MultiplierSpec id;
  auto g = apply_multiplier(f, id);
  CHECK(g.keys == f.keys);
  for (int i = 0; i < f.size(); ++i) CHECK(g.coef[i] == f.coef[i]);
  MultiplierSpec m;
  m.alpha = 0.5;
  CHECK(multiplier_symbol(m, 1.0) == 1.0);
  CHECK(multiplier_symbol(m, 0.25) == 0.5);
  CHECK(multiplier_symbol(m, 2.5) == 0.0);
  double s = multiplier_sup(f, m);
  auto h = apply_multiplier(f, m);
  CHECK(std::sqrt(h.l2sq() / f.l2sq()) <= s * (1 + 1e-12));
  // single frequency at the largest symbol
  int best = 0;
  for (int i = 0; i < lat->size(); ++i)
    if (lat->dist[i] > lat->dist[best]) best = i;
  auto e = random_on(lat, {best}, 1);
  CHECK(std::sqrt(apply_multiplier(e, m).l2sq() / e.l2sq()) == doctest::Approx(std::sqrt(lat->dist[best])));
}

TEST_CASE("cube localization") {
  auto lat = fx().lat;
  auto f = synth(lat, SynthSpec{});
  auto same = localize_cube(f, lat->delta, 0);
  CHECK(same.window->det == 1);
  auto d = same.f + scaled(f, -1.0);
  CHECK(std::sqrt(d.l2sq() / f.l2sq()) < 1e-13);

  Dyadic rho(2);
  GridFunction sum = scaled(f, 0.0);
  auto first = localize_cube(f, rho, 0);
  const long long cells = first.window->det;
  CHECK(cells == 64);
  int viol = 0;
  double ratio = 0;
  for (long long c = 0; c < cells; ++c) {
    auto q = localize_cube(f, rho, c);
    viol += q.growth_violations;
    ratio = std::max(ratio, std::sqrt(q.f.l2sq() / f.l2sq()) / std::sqrt(lat->delta.value() / rho.value()));
    sum = sum + q.f;
  }
  CHECK(viol == 0);
  auto diff = sum + scaled(f, -1.0);
  CHECK(std::sqrt(diff.l2sq() / f.l2sq()) < 1e-12);
  MESSAGE("cube localization constant " << ratio);
  CHECK(ratio <= 4.0);

  SynthSpec ch;
  ch.kind = "character";
  ch.xi = {lat->freqs[0], lat->freqs[1], lat->freqs[2]};
  auto e = synth(lat, ch);
  auto qe = localize_cube(e, rho, 5);
  double psi2 = 0;
  for (auto& c : qe.window->psi.coef) psi2 += std::norm(c);
  CHECK(qe.f.l2sq() == doctest::Approx(psi2).epsilon(1e-13));
}

TEST_CASE("r-box localization") {
  auto lat = fx().lat;
  Covering sc = build_covering(lat->cov->surface, Dyadic(2));
  const Sector& s = sc.sectors[0];
  SynthSpec sp;
  sp.sigma_j = 2;
  sp.sigma_sector = 0;
  auto f = synth(lat, sp);
  REQUIRE(f.size() > 0);
  double rho = std::sqrt(lat->delta.value() * s.delta.value());
  auto w0 = localize_rbox(f, s, rho, 0);
  GridFunction sum = scaled(f, 0.0);
  int viol = 0;
  for (long long c = 0; c < w0.window->det; ++c) {
    auto r = localize_rbox(f, s, rho, c);
    viol += r.growth_violations;
    sum = sum + r.f;
  }
  MESSAGE("r-box cells " << w0.window->det << " max dist " << w0.max_dist << " gauge " << w0.support_gauge
                          << " scale " << w0.scale_factor << " growth " << w0.growth_constant);
  CHECK(w0.support_gauge <= 1.0);
  CHECK(viol == 0);
  auto diff = sum + scaled(f, -1.0);
  CHECK(std::sqrt(diff.l2sq() / f.l2sq()) < 1e-12);
}

TEST_CASE("spectral errors") {
  CHECK_THROWS_AS(build_lattice(cone_cover(3, 2.0)), ConfigError);
  CHECK_THROWS_AS(build_lattice(fx().lat->cov, 3), ConfigError);
  auto f = synth(fx().lat, SynthSpec{});
  CHECK_THROWS_AS(f.samples(1e3), BudgetError);
  CHECK_THROWS_AS(localize_cube(f, Dyadic(5), 0), InputError);
  SynthSpec bad;
  bad.kind = "nope";
  CHECK_THROWS_AS(synth(fx().lat, bad), InputError);
}
