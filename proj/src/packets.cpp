#include "wolff/packets.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "wolff/error.hpp"

namespace wolff {

namespace {

const double kPi = 3.14159265358979323846;

long long fmod_ll(long long a, long long m) {
  long long r = a % m;
  return r < 0 ? r + m : r;
}

// per-axis index tables so that the flat index of beta - off is a sum of lookups
struct ShiftTable {
  std::vector<std::vector<long long>> axis;
  ShiftTable(const SampleLattice& S, const IVec& off) {
    const int D = static_cast<int>(S.sizes().size());
    axis.resize(D);
    for (int i = 0; i < D; ++i) {
      long long s = S.sizes()[i];
      axis[i].resize(s);
      for (long long b = 0; b < s; ++b) axis[i][b] = fmod_ll(b - off[i], s) * S.strides()[i];
    }
  }
};

// visit (beta flat index, shifted flat index)
template <class F>
void for_each_shifted(const SampleLattice& S, const ShiftTable& T, F&& fn) {
  const int D = static_cast<int>(S.sizes().size());
  std::vector<long long> b(D, 0);
  const long long n = S.size();
  long long sh = 0;
  for (int i = 0; i < D; ++i) sh += T.axis[i][0];
  for (long long idx = 0; idx < n; ++idx) {
    fn(idx, sh);
    for (int i = D - 1; i >= 0; --i) {
      sh -= T.axis[i][b[i]];
      if (++b[i] < S.sizes()[i]) {
        sh += T.axis[i][b[i]];
        break;
      }
      b[i] = 0;
      sh += T.axis[i][0];
    }
  }
}

TrigPoly shifted_psi(const WindowLattice& w, long long cell) {
  TrigPoly t = w.psi;
  for (int s = 0; s < t.size(); ++s) t.coef[s] *= w.phase(&t.freqs[s * w.D], cell);
  return t;
}

double envelope(const OrientedBox& shape, const Vec& x, double K) {
  // min-image over nearby torus translates; shape is centered at the origin
  const int D = shape.D();
  double best = 0;
  std::vector<int> n(D, -2);
  while (true) {
    Vec y = x;
    for (int i = 0; i < D; ++i) y[i] += n[i];
    Vec loc = shape.local(y);
    double r2 = 0;
    for (int i = 0; i < D; ++i) r2 += std::pow(loc[i] / (2 * shape.half[i]), 2);
    best = std::max(best, std::pow(1.0 + r2, -K / 2));
    int i = 0;
    while (i < D && ++n[i] > 2) n[i++] = -2;
    if (i == D) break;
  }
  return best;
}

Vec wrap_centered(Vec x) {
  for (int i = 0; i < x.size(); ++i) x[i] -= std::floor(x[i] + 0.5);
  return x;
}

}  // namespace

const Packet& PacketDecomposition::packet(int id) const {
  if (id < 0 || id >= static_cast<int>(packets.size())) throw InputError("packet id out of range");
  return packets[id];
}

PacketDecomposition decompose(const GridFunction& f, const PacketOptions& opt) {
  const auto& L = *f.lat;
  const int D = L.D;
  if (opt.refine < 2) throw ConfigError("packet sample refinement must be at least 2");
  if (!(opt.K > 0)) throw ConfigError("envelope exponent must be positive");
  if (opt.p < 2 || opt.p % 2) throw ConfigError("packet exponent must be even");
  if (opt.sigma_j >= 0) {
    if (opt.sigma_j > L.delta.j) throw ConfigError("sigma must be at least delta");
    Covering sc = build_covering(L.cov->surface, Dyadic(opt.sigma_j), L.cov->constants);
    if (opt.sigma_sector < 0 || opt.sigma_sector >= sc.M()) throw InputError("sigma sector out of range");
    OrientedBox box = sc.sectors[opt.sigma_sector].box();
    std::vector<int> xi(D);
    Vec x(D);
    for (auto k : f.keys) {
      L.unpack(k, xi.data());
      for (int e = 0; e < D; ++e) x[e] = xi[e] / double(L.R);
      if (!box.contains(x, 1e-9)) throw InputError("function spectrum leaves the declared sigma-sector");
    }
  }

  PacketDecomposition dec;
  dec.f = f;
  dec.opt = opt;

  struct Work {
    std::shared_ptr<WindowLattice> w;
    std::unique_ptr<SampleLattice> S;
    std::vector<cplx> F, E;
    std::vector<double> m;
    OrientedBox shape;
  };
  std::vector<Work> work;

  double mmax = 0;
  for (int a = 0; a < L.M(); ++a) {
    GridFunction fa = sector_project(f, a);
    if (fa.size() == 0) continue;
    const Sector& sec = L.cov->sectors[a];
    SectorPieces piece;
    piece.sector = a;
    piece.fa = fa;
    // window cells match the plates: frequency extents are half the sector box
    Vec scales = sec.half_lengths() * (double(L.R) * opt.window_scale);
    piece.window = std::make_shared<WindowLattice>(window_lattice(sec.frame.axes(), scales, opt.r_eta));
    Work wk;
    wk.w = piece.window;
    wk.S = std::make_unique<SampleLattice>(*wk.w, opt.refine);
    wk.F = wk.S->evaluate(fa.freqs(), fa.coef);
    wk.E = wk.S->evaluate(wk.w->eta);
    for (const auto& v : wk.F) piece.sup_fa = std::max(piece.sup_fa, std::abs(v));
    wk.shape = plate_shape(sec, true);
    wk.m.assign(wk.w->det, 0.0);
    for (long long p = 0; p < wk.w->det; ++p) {
      ShiftTable T(*wk.S, wk.S->plate_offset(p));
      double best = 0;
      for_each_shifted(*wk.S, T, [&](long long idx, long long sh) {
        best = std::max(best, std::abs(wk.E[sh]) * std::abs(wk.F[idx]));
      });
      wk.m[p] = best;
      mmax = std::max(mmax, best);
    }
    dec.linf_delta = std::max(dec.linf_delta, piece.sup_fa);
    dec.pieces.push_back(std::move(piece));
    work.push_back(std::move(wk));
  }

  std::map<int, std::vector<std::pair<std::uint64_t, cplx>>> level_pairs;
  std::vector<std::pair<std::uint64_t, cplx>> recon;
  for (size_t i = 0; i < f.keys.size(); ++i) recon.emplace_back(f.keys[i], f.coef[i]);
  std::vector<int> xi(D);

  for (size_t s = 0; s < work.size(); ++s) {
    auto& wk = work[s];
    const auto& piece = dec.pieces[s];
    const Sector& sec = L.cov->sectors[piece.sector];
    const WindowLattice& w = *wk.w;
    dec.plates_total += static_cast<int>(w.det);

    // phi_0 on the sample lattice and the a priori envelope bound
    std::vector<double> phi0(wk.S->size());
    for (long long idx = 0; idx < wk.S->size(); ++idx) {
      phi0[idx] = envelope(wk.shape, wk.S->point(idx), opt.K);
      dec.C_pkt_global = std::max(dec.C_pkt_global, 2 * std::abs(wk.E[idx]) / phi0[idx]);
    }

    std::map<int, std::vector<long long>> by_level;
    for (long long p = 0; p < w.det; ++p) {
      if (wk.m[p] <= 0 || wk.m[p] < opt.cutoff * mmax) {
        ++dec.plates_dropped;
        continue;
      }
      int e = static_cast<int>(std::floor(std::log2(wk.m[p])));
      double lam = std::ldexp(1.0, e);
      if (lam > wk.m[p]) lam = std::ldexp(1.0, --e);
      if (2 * lam <= wk.m[p]) lam = std::ldexp(1.0, ++e);
      by_level[e].push_back(p);

      Packet pk;
      pk.id = static_cast<int>(dec.packets.size());
      pk.sector = piece.sector;
      pk.cell = p;
      pk.plate.owner = piece.sector;
      pk.plate.box = OrientedBox(w.plate_center(p), wk.shape.axes, wk.shape.half);
      IVec k = w.plate_index(p);
      pk.plate.b.assign(k.data(), k.data() + D);
      pk.level = e;
      pk.lambda = lam;
      pk.sup = wk.m[p];
      pk.volume = w.cell_volume();
      dec.packets.push_back(pk);
      dec.wa1_lhs += std::pow(lam, opt.p) * pk.volume;

      ShiftTable T(*wk.S, wk.S->plate_offset(p));
      double worst = 0;
      for_each_shifted(*wk.S, T, [&](long long idx, long long sh) {
        double v = std::norm(wk.E[sh]) * std::abs(wk.F[idx]) / lam;
        worst = std::max(worst, v / phi0[sh]);
      });
      dec.C_pkt = std::max(dec.C_pkt, worst);
    }

    OrientedBox big = L.sector_box(piece.sector, 2.0);
    Vec x(D);
    for (auto& [e, plist] : by_level) {
      TrigPoly W = w.psi;
      for (int t = 0; t < W.size(); ++t) {
        cplx acc = 0;
        for (long long p : plist) acc += w.phase(&W.freqs[t * D], p);
        W.coef[t] *= acc;
      }
      GridFunction g = multiply(piece.fa, W);
      auto& dst = level_pairs[e];
      for (int t = 0; t < g.size(); ++t) {
        dst.emplace_back(g.keys[t], g.coef[t]);
        recon.emplace_back(g.keys[t], -g.coef[t]);
        L.unpack(g.keys[t], xi.data());
        for (int i = 0; i < D; ++i) x[i] = xi[i];
        ++dec.nfnb_checked;
        if (!big.contains(x, 1e-9)) ++dec.nfnb_violations;
      }
    }
    (void)sec;
  }

  for (auto it = level_pairs.rbegin(); it != level_pairs.rend(); ++it) {
    PacketLevel lv;
    lv.level = it->first;
    lv.lambda = std::ldexp(1.0, it->first);
    lv.f = scaled(GridFunction::from_pairs(f.lat, std::move(it->second), f.provenance + "|level"), 1.0 / lv.lambda);
    dec.levels.push_back(std::move(lv));
  }
  std::map<int, size_t> lidx;
  for (size_t i = 0; i < dec.levels.size(); ++i) lidx[dec.levels[i].level] = i;
  for (const auto& pk : dec.packets) dec.levels[lidx[pk.level]].packets.push_back(pk.id);

  GridFunction diff = GridFunction::from_pairs(f.lat, std::move(recon));
  double n2 = f.l2sq();
  dec.reconstruction_error = n2 > 0 ? std::sqrt(diff.l2sq() / n2) : std::sqrt(diff.l2sq());

  for (const auto& piece : dec.pieces) dec.wa1_rhs += exact_moment(piece.fa, opt.p);
  dec.C_wa = dec.wa1_rhs > 0 ? dec.wa1_lhs / dec.wa1_rhs : 0.0;
  for (const auto& pk : dec.packets)
    dec.katr1 = std::max(dec.katr1, dec.linf_delta > 0 ? pk.lambda / dec.linf_delta : 0.0);
  return dec;
}

GridFunction packet_function(const PacketDecomposition& dec, int id) {
  const Packet& pk = dec.packet(id);
  for (const auto& piece : dec.pieces)
    if (piece.sector == pk.sector) {
      GridFunction g = multiply(piece.fa, shifted_psi(*piece.window, pk.cell));
      g.provenance = dec.f.provenance + "|packet " + std::to_string(id);
      return g;
    }
  throw InputError("packet sector missing from the decomposition");
}

GridFunction subfunction(const PacketDecomposition& dec, const std::vector<int>& ids) {
  std::vector<std::pair<std::uint64_t, cplx>> pairs;
  std::vector<int> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (int id : sorted) {
    GridFunction g = packet_function(dec, id);
    for (int t = 0; t < g.size(); ++t) pairs.emplace_back(g.keys[t], g.coef[t]);
  }
  return GridFunction::from_pairs(dec.f.lat, std::move(pairs), dec.f.provenance + "|sub");
}

SubfunctionReport subfunction_report(const PacketDecomposition& dec, const std::vector<int>& ids) {
  SubfunctionReport r;
  std::vector<int> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  double sum_sq = 0;
  for (int id : sorted) {
    const Packet& pk = dec.packet(id);
    r.mass += std::pow(pk.lambda, dec.opt.p) * pk.volume;
    sum_sq += packet_function(dec, id).l2sq();
  }
  GridFunction g = subfunction(dec, sorted);
  for (int a = 0; a < g.lat->M(); ++a) {
    GridFunction ga = sector_project(g, a);
    if (ga.size()) r.norm_p_delta += exact_moment(ga, dec.opt.p);
  }
  r.C = r.mass > 0 ? r.norm_p_delta / r.mass : 0.0;
  r.orthogonality = sum_sq > 0 ? g.l2sq() / sum_sq : 0.0;
  return r;
}

// ---------------------------------------------------------------- localization relation

int cubes_per_axis(double t) {
  if (!(t > 0)) throw InputError("cube side must be positive");
  long long n = std::llround(1.0 / t);
  if (n < 2 || std::abs(n * t - 1.0) > 1e-9) throw InputError("cube side must be 1/n with n >= 2");
  return static_cast<int>(n);
}

bool cube_related(long long a, long long b, int n, int D) {
  for (int i = D - 1; i >= 0; --i) {
    long long ca = a % n, cb = b % n;
    long long d = std::abs(ca - cb);
    d = std::min(d, n - d);
    if (d > 5) return false;
    a /= n;
    b /= n;
  }
  return true;
}

bool periodic_contains(const OrientedBox& box, const Vec& x) {
  const int D = box.D();
  Vec y = wrap_centered(x - box.center);
  std::vector<int> n(D, -1);
  while (true) {
    Vec z = y;
    for (int i = 0; i < D; ++i) z[i] += n[i];
    Vec loc = box.axes.transpose() * z;
    bool in = true;
    for (int i = 0; i < D && in; ++i) in = std::abs(loc[i]) <= box.half[i];
    if (in) return true;
    int i = 0;
    while (i < D && ++n[i] > 1) n[i++] = -1;
    if (i == D) return false;
  }
}

namespace {

long long cube_of(const Vec& x, int n) {
  long long idx = 0;
  for (int i = 0; i < x.size(); ++i) {
    double u = x[i] - std::floor(x[i]);
    long long c = std::min<long long>(n - 1, static_cast<long long>(std::floor(u * n)));
    idx = idx * n + c;
  }
  return idx;
}

// periodic containment with the image offsets U^T n precomputed
struct Images {
  const OrientedBox& box;
  std::vector<Vec> off;
  explicit Images(const OrientedBox& b) : box(b) {
    const int D = b.D();
    std::vector<int> n(D, -1);
    while (true) {
      Vec v(D);
      for (int i = 0; i < D; ++i) v[i] = n[i];
      Vec l = b.axes.transpose() * v;
      // an image can only hit if its offset is within the box reach of the wrapped point
      off.push_back(l);
      int i = 0;
      while (i < D && ++n[i] > 1) n[i++] = -1;
      if (i == D) break;
    }
  }
  bool contains(const Vec& x) const {
    const int D = box.D();
    Vec y = wrap_centered(x - box.center);
    Vec l0 = box.axes.transpose() * y;
    for (const auto& o : off) {
      bool in = true;
      for (int i = 0; i < D && in; ++i) in = std::abs(l0[i] + o[i]) <= box.half[i];
      if (in) return true;
    }
    return false;
  }
};

long long pow_ll(long long b, int e) {
  long long r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

// finish an entry from per-cube counts of W cap pi
void finish_entry(RelationEntry& e, const std::map<long long, long long>& counts, int n, int D) {
  long long best = -1;
  for (const auto& [q, c] : counts)
    if (c > best) {  // map order gives the lexicographically smallest cube on ties
      best = c;
      e.anchor = q;
    }
  if (e.anchor < 0) return;
  long long per_axis = std::min<long long>(n, 11);
  e.related = static_cast<int>(pow_ll(per_axis, D));
  for (const auto& [q, c] : counts)
    if (!cube_related(e.anchor, q, n, D)) e.excluded += c;
}

void finish_relation(LocalizationRelation& rel, size_t P) {
  for (const auto& e : rel.entries) {
    rel.I_b += e.excluded;
    rel.max_related = std::max(rel.max_related, e.related);
  }
  rel.scaling = (rel.W_size > 0 && P > 0) ? rel.I_b / (rel.W_size * std::sqrt(double(P))) : 0.0;
}

}  // namespace

LocalizationRelation localization_relation_bruteforce(const std::vector<OrientedBox>& plates,
                                                      const std::vector<Vec>& W, int n) {
  if (n < 2) throw InputError("need at least two cubes per axis");
  LocalizationRelation rel;
  rel.n = n;
  rel.D = plates.empty() ? (W.empty() ? 0 : static_cast<int>(W[0].size())) : plates[0].D();
  rel.W_size = static_cast<long long>(W.size());
  for (size_t p = 0; p < plates.size(); ++p) {
    RelationEntry e;
    e.plate = static_cast<int>(p);
    std::map<long long, long long> counts;
    for (const auto& x : W)
      if (periodic_contains(plates[p], x)) ++counts[cube_of(x, n)];
    finish_entry(e, counts, n, rel.D);
    rel.entries.push_back(e);
  }
  finish_relation(rel, plates.size());
  return rel;
}

LocalizationRelation localization_relation(const std::vector<OrientedBox>& plates, const std::vector<Vec>& W, int n) {
  if (n < 2) throw InputError("need at least two cubes per axis");
  LocalizationRelation rel;
  rel.n = n;
  rel.D = plates.empty() ? (W.empty() ? 0 : static_cast<int>(W[0].size())) : plates[0].D();
  const int D = rel.D;
  rel.W_size = static_cast<long long>(W.size());
  // bucket W by cube
  std::unordered_map<long long, std::vector<int>> bucket;
  for (size_t i = 0; i < W.size(); ++i) bucket[cube_of(W[i], n)].push_back(static_cast<int>(i));
  for (size_t p = 0; p < plates.size(); ++p) {
    const auto& box = plates[p];
    // axis-aligned extent of the box in cube units, then every wrapped cube in it
    std::vector<long long> lo(D), hi(D);
    for (int i = 0; i < D; ++i) {
      double ext = 0;
      for (int k = 0; k < D; ++k) ext += std::abs(box.axes(i, k)) * box.half[k];
      lo[i] = static_cast<long long>(std::floor((box.center[i] - ext) * n));
      hi[i] = static_cast<long long>(std::floor((box.center[i] + ext) * n));
      if (hi[i] - lo[i] + 1 > n) {
        lo[i] = 0;
        hi[i] = n - 1;
      }
    }
    std::map<long long, long long> counts;
    Images img(box);
    std::vector<long long> c(lo);
    while (true) {
      long long q = 0;
      for (int i = 0; i < D; ++i) q = q * n + fmod_ll(c[i], n);
      auto it = bucket.find(q);
      if (it != bucket.end()) {
        long long cnt = 0;
        for (int i : it->second)
          if (img.contains(W[i])) ++cnt;
        if (cnt) counts[q] += cnt;
      }
      int i = D - 1;
      while (i >= 0 && ++c[i] > hi[i]) c[i] = lo[i], --i;
      if (i < 0) break;
    }
    RelationEntry e;
    e.plate = static_cast<int>(p);
    finish_entry(e, counts, n, D);
    rel.entries.push_back(e);
  }
  finish_relation(rel, plates.size());
  return rel;
}

// ---------------------------------------------------------------- localize_check

LocalizeReport localize_check(const PacketDecomposition& dec, double lambda, double t, const LocalizeOptions& opt) {
  const auto& L = *dec.f.lat;
  const int D = L.D;
  const int n = cubes_per_axis(t);
  if (!(lambda > 0)) throw InputError("lambda must be positive");
  LocalizeReport rep;
  rep.lambda = lambda;
  rep.tubes = opt.tubes;
  rep.rel.n = n;
  rep.rel.D = D;

  const long long N = L.N;
  auto vals = dec.f.samples(opt.budget_bytes);
  std::vector<Vec> W;
  std::vector<long long> widx;
  for (long long i = 0; i < static_cast<long long>(vals.size()); ++i)
    if (std::abs(vals[i]) >= lambda) widx.push_back(i);
  if (widx.empty()) {
    rep.empty = true;
    rep.localizes = true;
    return rep;
  }
  auto point_of = [&](long long i) {
    Vec x(D);
    for (int e = D - 1; e >= 0; --e) {
      x[e] = double(i % N) / double(N);
      i /= N;
    }
    return x;
  };
  for (long long i : widx) W.push_back(point_of(i));

  // relating sets: plates, or tubes built from them
  std::vector<OrientedBox> boxes;
  std::vector<int> group(dec.packets.size(), -1);
  if (opt.tubes) {
    std::vector<Plate> plates;
    for (const auto& pk : dec.packets) plates.push_back(pk.plate);
    int sj = dec.opt.sigma_j >= 0 ? dec.opt.sigma_j : std::max(0, L.delta.j - 2);
    std::vector<Sector> sectors = L.cov->sectors;
    TubeFamily tf = build_tubes(plates, sectors, Dyadic(sj), L.delta, L.cov->constants.C);
    for (const auto& tb : tf.tubes) boxes.push_back(tb.box);
    for (size_t i = 0; i < dec.packets.size(); ++i) group[i] = tf.assignment[i];
  } else {
    for (size_t i = 0; i < dec.packets.size(); ++i) {
      boxes.push_back(dec.packets[i].plate.box);
      group[i] = static_cast<int>(i);
    }
  }
  rep.rel = localization_relation(boxes, W, n);

  // W by cube
  std::map<long long, std::vector<int>> wq;
  for (size_t i = 0; i < W.size(); ++i) wq[cube_of(W[i], n)].push_back(static_cast<int>(i));
  rep.cubes = static_cast<int>(wq.size());

  // f_a at the points of W
  std::map<int, std::vector<cplx>> fa_at;
  for (const auto& piece : dec.pieces) {
    auto s = piece.fa.samples(opt.budget_bytes);
    std::vector<cplx> v(widx.size());
    for (size_t i = 0; i < widx.size(); ++i) v[i] = s[widx[i]];
    fa_at[piece.sector] = std::move(v);
  }

  // per (sector, cube): T = sum over related packets of psi_b, one trig sum per W point
  std::vector<cplx> roots(N);
  for (long long i = 0; i < N; ++i) roots[i] = std::polar(1.0, 2 * kPi * double(i) / double(N));
  std::vector<std::vector<int>> wint(W.size(), std::vector<int>(D));
  for (size_t i = 0; i < W.size(); ++i) {
    long long r = widx[i];
    for (int e = D - 1; e >= 0; --e) {
      wint[i][e] = static_cast<int>(r % N);
      r /= N;
    }
  }
  std::vector<cplx> fq(W.size(), cplx(0, 0));
  for (const auto& piece : dec.pieces) {
    const WindowLattice& w = *piece.window;
    const TrigPoly& ps = w.psi;
    std::vector<int> ids;
    for (size_t id = 0; id < dec.packets.size(); ++id)
      if (dec.packets[id].sector == piece.sector && group[id] >= 0 && rep.rel.entries[group[id]].anchor >= 0)
        ids.push_back(static_cast<int>(id));
    if (ids.empty()) continue;
    // phases e(-zeta.b), packet-major
    std::vector<cplx> ph(ids.size() * ps.size());
    for (size_t u = 0; u < ids.size(); ++u)
      for (int s = 0; s < ps.size(); ++s) ph[u * ps.size() + s] = w.phase(&ps.freqs[s * D], dec.packets[ids[u]].cell);
    const auto& fv = fa_at.at(piece.sector);
    std::vector<cplx> T(ps.size());
    for (const auto& [q, pts] : wq) {
      std::fill(T.begin(), T.end(), cplx(0, 0));
      int used = 0;
      for (size_t u = 0; u < ids.size(); ++u) {
        if (!cube_related(rep.rel.entries[group[ids[u]]].anchor, q, n, D)) continue;
        ++used;
        for (int s = 0; s < ps.size(); ++s) T[s] += ph[u * ps.size() + s];
      }
      rep.sum_PQ += used;
      if (!used) continue;
      for (int s = 0; s < ps.size(); ++s) T[s] *= ps.coef[s];
      for (int i : pts) {
        cplx v = 0;
        for (int s = 0; s < ps.size(); ++s) {
          long long m = 0;
          for (int e = 0; e < D; ++e) m += static_cast<long long>(ps.freqs[s * D + e]) * wint[i][e];
          v += T[s] * roots[fmod_ll(m, N)];
        }
        fq[i] += v * fv[i];
      }
    }
  }
  long long hit = 0;
  for (size_t i = 0; i < W.size(); ++i)
    if (std::abs(fq[i]) >= lambda / 2) ++hit;
  rep.captured = double(hit) / double(W.size());
  rep.C_log = dec.packets.empty() ? 0.0 : double(rep.sum_PQ) / double(dec.packets.size());
  const double bound = opt.C_log_bound > 0 ? opt.C_log_bound : std::pow(12.0, D);
  rep.localizes = rep.C_log <= bound && rep.captured >= opt.capture_threshold;
  return rep;
}

}  // namespace wolff
