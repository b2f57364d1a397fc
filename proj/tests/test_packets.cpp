#include <cmath>
#include <random>

#include "doctest.h"
#include "wolff/error.hpp"
#include "wolff/packets.hpp"

using namespace wolff;

namespace {

struct Fixture {
  std::shared_ptr<const SpectralLattice> lat;
  GridFunction f;
  PacketDecomposition dec;
  Fixture() {
    auto S = std::make_shared<const SurfaceModel>(SurfaceModel::circular_cone(1.0, 1.5));
    lat = build_lattice(std::make_shared<const Covering>(build_covering(S, Dyadic(4))));
    SynthSpec sp;
    sp.seed = 3;
    sp.sigma_j = 2;
    sp.sigma_sector = 1;
    f = synth(lat, sp);
    PacketOptions po;
    po.sigma_j = 2;
    po.sigma_sector = 1;
    dec = decompose(f, po);
  }
};

Fixture& fx() {
  static Fixture f;
  return f;
}

double rel_diff(const GridFunction& a, const GridFunction& b) {
  GridFunction d = a + scaled(b, -1.0);
  return std::sqrt(d.l2sq() / std::max(1e-300, b.l2sq()));
}

OrientedBox random_plate(std::mt19937_64& rng, int D) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> U(0, 1);
  Mat A(D, D);
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) A(i, j) = g(rng);
  Eigen::HouseholderQR<Mat> qr(A);
  Mat Q = qr.householderQ();
  Vec c(D), h(D);
  for (int i = 0; i < D; ++i) {
    c[i] = U(rng);
    h[i] = 0.01 + 0.3 * U(rng);
  }
  return OrientedBox(c, Q, h);
}

}  // namespace

TEST_CASE("decomposition reconstructs and meets the packet invariants") {
  auto& d = fx().dec;
  REQUIRE(d.packets.size() > 0);
  CHECK(d.reconstruction_error <= 1e-6);
  CHECK(d.C_pkt <= 4.0);
  CHECK(d.C_pkt <= d.C_pkt_global + 1e-12);
  CHECK(d.nfnb_checked > 0);
  CHECK(d.nfnb_violations == 0);
  CHECK(d.C_wa <= 8.0);
  CHECK(d.katr1 <= 2.0);
  for (const auto& pk : d.packets) {
    CHECK(pk.lambda <= pk.sup);
    CHECK(pk.sup < 2 * pk.lambda);
    CHECK(pk.lambda == doctest::Approx(std::ldexp(1.0, pk.level)));
  }
  // levels are disjoint and exhaust the packets
  size_t count = 0;
  GridFunction sum;
  sum.lat = fx().lat;
  for (const auto& lv : d.levels) {
    count += lv.packets.size();
    sum = sum + scaled(lv.f, lv.lambda);
  }
  CHECK(count == d.packets.size());
  CHECK(rel_diff(sum, fx().f) < 1e-12);
}

TEST_CASE("wa1 constant is comparable across scales") {
  auto S = std::make_shared<const SurfaceModel>(SurfaceModel::circular_cone(1.0, 1.5));
  std::vector<double> cw;
  for (int j : {3, 4, 5}) {
    auto lat = build_lattice(std::make_shared<const Covering>(build_covering(S, Dyadic(j))));
    SynthSpec sp;
    sp.seed = 11;
    sp.sigma_j = std::max(2, j - 2);
    GridFunction f = synth(lat, sp);
    auto d = decompose(f);
    CHECK(d.reconstruction_error <= 1e-6);
    CHECK(d.C_pkt <= 4.0);
    CHECK(d.nfnb_violations == 0);
    cw.push_back(d.C_wa);
  }
  double lo = *std::min_element(cw.begin(), cw.end()), hi = *std::max_element(cw.begin(), cw.end());
  CHECK(hi <= 8.0);
  CHECK(hi <= 4 * lo);
}

TEST_CASE("a single windowed character gives one dominant packet") {
  auto lat = fx().lat;
  // window family of one sector, taken from a decomposition of its center character
  const int a = 5;
  Vec c = lat->cov->sectors[a].center * double(lat->R);
  SynthSpec sp;
  sp.kind = "character";
  for (int i = 0; i < 3; ++i) sp.xi.push_back(static_cast<int>(std::lround(c[i])));
  GridFunction chi = synth(lat, sp);
  auto d0 = decompose(chi);
  const SectorPieces* piece = nullptr;
  for (const auto& p : d0.pieces)
    if (p.sector == a) piece = &p;
  REQUIRE(piece);
  const WindowLattice& w = *piece->window;
  const long long b0 = w.det / 3;
  TrigPoly t = w.psi;
  for (int s = 0; s < t.size(); ++s) t.coef[s] *= w.phase(&t.freqs[s * 3], b0);
  const double lam0 = 8.0;
  GridFunction f = scaled(multiply(chi, t), lam0);
  auto d = decompose(f);
  CHECK(d.reconstruction_error <= 1e-6);
  const Packet* top = &d.packets[0];
  for (const auto& pk : d.packets)
    if (pk.sup > top->sup) top = &pk;
  CHECK(top->sector == a);
  CHECK(top->cell == b0);
  CHECK(top->level == d.levels.front().level);
  CHECK(top->lambda <= lam0);
}

TEST_CASE("subfunctions") {
  auto& d = fx().dec;
  std::vector<int> all(d.packets.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  CHECK(rel_diff(subfunction(d, all), fx().f) < 1e-12);
  CHECK(subfunction(d, {}).size() == 0);

  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<int> ids;
    int k = 1 + static_cast<int>(rng() % (d.packets.size() / 10));
    while (static_cast<int>(ids.size()) < k) ids.push_back(static_cast<int>(rng() % d.packets.size()));
    auto r = subfunction_report(d, ids);
    CHECK(r.orthogonality >= 0.25);
    CHECK(r.orthogonality <= 4.0);
    CHECK(r.C > 0);
    CHECK(r.C <= 8.0);
  }
  // one full level
  auto r = subfunction_report(d, d.levels.front().packets);
  CHECK(r.C <= 8.0);
}

TEST_CASE("relation: cube adjacency") {
  const int n = 16, D = 2;
  for (long long a = 0; a < n * n; a += 37) {
    int cnt = 0;
    for (long long b = 0; b < n * n; ++b) {
      CHECK(cube_related(a, b, n, D) == cube_related(b, a, n, D));
      cnt += cube_related(a, b, n, D);
    }
    CHECK(cnt == 121);
  }
  CHECK(cube_related(0, 5, 16, 1));
  CHECK(!cube_related(0, 6, 16, 1));
  CHECK(cube_related(0, 11, 16, 1));  // wraps
  CHECK(cubes_per_axis(0.125) == 8);
  CHECK_THROWS_AS(cubes_per_axis(0.3), InputError);
  CHECK_THROWS_AS(cubes_per_axis(1.0), InputError);
}

TEST_CASE("relation: fast and brute force agree on random instances") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> U(0, 1);
  for (int inst = 0; inst < 50; ++inst) {
    const int D = 2 + inst % 2;
    const int P = 1 + static_cast<int>(rng() % 100);
    const int nw = 1 + static_cast<int>(rng() % 3000);
    const int n = 2 + static_cast<int>(rng() % 20);
    std::vector<OrientedBox> plates;
    for (int i = 0; i < P; ++i) plates.push_back(random_plate(rng, D));
    std::vector<Vec> W;
    for (int i = 0; i < nw; ++i) {
      Vec x(D);
      for (int e = 0; e < D; ++e) x[e] = U(rng);
      W.push_back(x);
    }
    auto fast = localization_relation(plates, W, n);
    auto slow = localization_relation_bruteforce(plates, W, n);
    REQUIRE(fast.entries.size() == slow.entries.size());
    CHECK(fast.I_b == slow.I_b);
    for (size_t i = 0; i < fast.entries.size(); ++i) {
      CHECK(fast.entries[i].anchor == slow.entries[i].anchor);
      CHECK(fast.entries[i].excluded == slow.entries[i].excluded);
      CHECK(fast.entries[i].related == slow.entries[i].related);
    }
    CHECK(fast.max_related <= std::pow(12, D));
  }
}

TEST_CASE("periodic containment sees wrapped points") {
  OrientedBox b(Vec::Constant(2, 0.02), Mat::Identity(2, 2), Vec::Constant(2, 0.05));
  Vec x(2);
  x << 0.99, 0.99;
  CHECK(periodic_contains(b, x));
  x << 0.5, 0.99;
  CHECK(!periodic_contains(b, x));
}

TEST_CASE("localize check") {
  auto& d = fx().dec;
  auto vals = fx().f.samples();
  double mx = 0;
  for (auto v : vals) mx = std::max(mx, std::abs(v));
  auto empty = localize_check(d, 2 * mx, 1.0 / 8);
  CHECK(empty.empty);
  CHECK(empty.localizes);

  auto r = localize_check(d, 0.6 * mx, 1.0 / 16);
  CHECK(!r.empty);
  CHECK(r.rel.W_size > 0);
  CHECK(r.captured >= 0.0);
  CHECK(r.captured <= 1.0);
  CHECK(r.C_log <= std::pow(12, 3));
  CHECK(r.rel.max_related <= std::pow(12, 3));
  // cubes so large that every packet feeds every cube: f^Q = f on W
  auto coarse = localize_check(d, 0.6 * mx, 1.0 / 4);
  CHECK(coarse.captured == doctest::Approx(1.0));
  CHECK(coarse.rel.I_b == 0);

  LocalizeOptions o;
  o.tubes = true;
  auto rt = localize_check(d, 0.6 * mx, 1.0 / 16, o);
  CHECK(rt.tubes);
  CHECK(rt.captured >= 0.0);
}

TEST_CASE("packet errors") {
  auto& f = fx().f;
  PacketOptions po;
  po.refine = 1;
  CHECK_THROWS_AS(decompose(f, po), ConfigError);
  po = PacketOptions{};
  po.p = 3;
  CHECK_THROWS_AS(decompose(f, po), ConfigError);
  po = PacketOptions{};
  po.sigma_j = 2;
  po.sigma_sector = 0;  // f lives in sector 1 of the sigma cover
  CHECK_THROWS_AS(decompose(f, po), InputError);
  CHECK_THROWS_AS(fx().dec.packet(-1), InputError);
  CHECK_THROWS_AS(localize_check(fx().dec, 1.0, 0.3), InputError);
}
