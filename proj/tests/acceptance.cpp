// acceptance suite: one verdict line per criterion
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "wolff/io.hpp"

using namespace wolff;
namespace fs = std::filesystem;

namespace {

std::string g(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

struct Verdict {
  bool pass = true;
  std::string summary;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      std::cout << "    violated: " << what << "\n";
    }
  }
};

std::shared_ptr<const SurfaceModel> share(SurfaceModel s) { return std::make_shared<const SurfaceModel>(std::move(s)); }

// k-cone in R^4 over balls in the first 4-k coordinates, offsets along the remaining axes
SurfaceModel ball_kcone(int k, const std::vector<double>& radii) {
  const int D = 4, m = D - k;
  KConeData c;
  c.l0_basis = Mat::Zero(D, m);
  for (int i = 0; i < m; ++i) c.l0_basis(i, i) = 1;
  c.offsets.push_back(Vec::Zero(D));
  for (int i = 0; i < k; ++i) {
    Vec e = Vec::Zero(D);
    e[m + i] = 1;
    c.offsets.push_back(e);
  }
  for (int i = 0; i <= k; ++i) c.generators.push_back(ConvexBody::ball(m, radii[i], i));
  auto s = SurfaceModel::kcone(c);
  s.name = "ball_kcone_" + std::to_string(k);
  return s;
}

std::vector<Dyadic> range(int a, int b) {
  std::vector<Dyadic> v;
  for (int j = a; j <= b; ++j) v.emplace_back(j);
  return v;
}

std::shared_ptr<const SpectralLattice> spectral_lattice(std::shared_ptr<const SurfaceModel> S, int j) {
  return build_lattice(std::make_shared<const Covering>(build_covering(S, Dyadic(j))));
}

// ---------------------------------------------------------------- 1, 2

struct CountingRun {
  std::string name;
  int d, k;
  CoveringStats st;
};

std::vector<CountingRun>& counting_runs() {
  static std::vector<CountingRun> runs = [] {
    std::vector<CountingRun> out;
    std::vector<std::shared_ptr<const SurfaceModel>> S = {share(SurfaceModel::paraboloid(2)),
                                                          share(SurfaceModel::circular_cone(1.0, 2.0)),
                                                          share(ball_kcone(1, {1.0, 1.25})),
                                                          share(ball_kcone(2, {1.0, 1.25, 1.5}))};
    for (auto& s : S) out.push_back({s->name, s->d(), s->k(), covering_stats(s, range(4, 12), Dyadic(2))});
    return out;
  }();
  return runs;
}

Verdict counting_laws() {
  Verdict v;
  std::ostringstream sum;
  for (const auto& r : counting_runs()) {
    const double theory = (r.d - r.k) / 2.0;
    const double slope = r.st.M_fit.slope;
    std::cout << "    (" << r.d << "," << r.k << ") " << r.name << ": M " << r.st.rows.front().M << ".."
              << r.st.rows.back().M << ", slope " << g(slope) << " +- " << g(r.st.M_fit.stderr_slope)
              << ", theory " << theory << "\n";
    v.require(std::abs(slope - theory) <= 0.1, "slope of (" + std::to_string(r.d) + "," + std::to_string(r.k) + ")");
    sum << " (" << r.d << "," << r.k << ")=" << g(slope, 3);
  }
  v.summary = "slopes" + sum.str() + ", tolerance 0.1, delta 2^-4..2^-12";
  return v;
}

Verdict volume_law() {
  Verdict v;
  double worst = 0;
  for (const auto& r : counting_runs()) {
    double lo = kInf, hi = 0;
    for (const auto& row : r.st.rows) {
      lo = std::min(lo, row.volume_ratio);
      hi = std::max(hi, row.volume_ratio);
    }
    std::cout << "    " << r.name << ": |Pi|/delta^((d-k)/2+1) in [" << g(lo) << ", " << g(hi) << "]\n";
    worst = std::max(worst, hi / lo);
    v.require(hi <= 2 * lo, "volume ratio spread for " + r.name);
  }
  v.summary = "max spread " + g(worst) + " (bound 2)";
  return v;
}

// ---------------------------------------------------------------- 3

Verdict assumption_a() {
  Verdict v;
  std::vector<std::shared_ptr<const SurfaceModel>> S = {share(SurfaceModel::circular_cone(1.0, 2.0)),
                                                        share(random_ellipse_kcone(3, 3))};
  std::ostringstream sum;
  for (auto& s : S) {
    int K0 = -1, A0 = -1, Kmax = 0, Amax = 0, cv = 0, cov_fail = 0;
    for (int j = 4; j <= 10; ++j) {
      Covering fine = build_covering(s, Dyadic(j));
      Covering coarse = build_covering(s, Dyadic(std::max(2, j / 2)));
      auto r = verify_assumption_A(fine, coarse);
      if (K0 < 0) {
        K0 = r.max_overlap;
        A0 = r.K_ang;
      }
      Kmax = std::max(Kmax, r.max_overlap);
      Amax = std::max(Amax, r.K_ang);
      cv += r.consistency_violations;
      cov_fail += r.coverage_failures;
      v.require(r.consistency_violations == 0, s->name + " consistency at 2^-" + std::to_string(j));
      v.require(r.max_overlap <= 2 * K0, s->name + " overlap K at 2^-" + std::to_string(j));
      v.require(r.K_ang <= 2 * A0, s->name + " K_ang at 2^-" + std::to_string(j));
      std::cout << "    " << s->name << " 2^-" << j << ": M " << r.M_delta << ", K " << r.max_overlap << ", K_ang "
                << r.K_ang << ", consistency " << r.consistency_violations << "/" << r.consistency_checked
                << ", uncovered " << r.coverage_failures << "\n";
    }
    sum << " " << s->name << ": K " << K0 << "..max " << Kmax << ", K_ang " << A0 << "..max " << Amax
        << ", violations " << cv << ";";
  }
  v.summary = sum.str();
  return v;
}

// ---------------------------------------------------------------- 4, 5

Verdict partition_plancherel() {
  Verdict v;
  auto S = share(SurfaceModel::circular_cone(1.0, 1.5));
  double part = 0, planch = 0;
  int functions = 0;
  long long maxN = 0;
  for (int j = 3; j <= 5; ++j) {
    auto lat = spectral_lattice(S, j);
    maxN = std::max(maxN, lat->N);
    for (int i = 0; i < lat->size(); ++i) {
      double s = 0;
      for (int t = lat->row[i]; t < lat->row[i + 1]; ++t) s += lat->col_weight[t];
      part = std::max(part, std::abs(s - 1));
    }
    const int count = j == 5 ? 20 : 40;
    for (int s = 0; s < count; ++s) {
      SynthSpec sp;
      sp.seed = 1000 * j + s;
      GridFunction f = synth(lat, sp);
      double sum = 0;
      auto x = f.samples();
      for (auto z : x) sum += std::norm(z);
      const double grid = std::sqrt(sum / double(x.size()));
      const double coef = std::sqrt(f.l2sq());
      planch = std::max(planch, std::abs(grid - coef) / coef);
      ++functions;
    }
  }
  v.require(part <= 1e-12, "partition of unity");
  v.require(planch <= 1e-10, "sample vs coefficient L2");
  v.summary = "|sum Xi_a - 1| " + g(part) + ", L2 defect " + g(planch) + " over " + std::to_string(functions) +
              " functions, D=3, N<=" + std::to_string(maxN);
  return v;
}

Verdict interpolation() {
  Verdict v;
  auto S = share(SurfaceModel::circular_cone(1.0, 1.5));
  double worst = 0, by_p[2] = {0, 0};  // p = 2 is an identity
  int functions = 0;
  for (int j = 3; j <= 4; ++j) {
    auto lat = spectral_lattice(S, j);
    for (int s = 0; s < 50; ++s) {
      SynthSpec sp;
      sp.seed = 500 + 100 * j + s;
      if (s % 5 == 4) sp.kind = "knapp";
      GridFunction f = synth(lat, sp);
      auto r = norms(f, {2, 4, 6, kInf});
      for (int i = 0; i < 3; ++i) {
        const double p = r.p[i];
        const double lhs = std::pow(r.lp_delta[i], p);
        const double rhs = std::pow(r.linf_delta, p - 2) * r.sum_sector_l2sq;
        worst = std::max(worst, lhs / rhs);
        if (i > 0) by_p[i - 1] = std::max(by_p[i - 1], lhs / rhs);
      }
      ++functions;
    }
  }
  v.require(worst <= 1 + 1e-9, "interpolation inequality");
  v.summary = "max ||f||_{p,d}^p / (||f||_{inf,d}^{p-2} sum ||f_a||_2^2) = " + g(worst, 12) + " (p=4: " + g(by_p[0]) +
              ", p=6: " + g(by_p[1]) + ") over " + std::to_string(functions) + " functions, p in {2,4,6}";
  return v;
}

// ---------------------------------------------------------------- 6

Verdict wave_packets() {
  Verdict v;
  auto S = share(SurfaceModel::circular_cone(1.0, 1.5));
  double rec = 0, cpk = 0, cwa_max = 0;
  long long nfnb = 0, checked = 0;
  std::vector<double> mean_wa;
  for (int j = 3; j <= 6; ++j) {
    auto t0 = std::chrono::steady_clock::now();
    auto lat = spectral_lattice(S, j);
    const int sj = std::max(2, j - 2);
    const int Msig = build_covering(S, Dyadic(sj)).M();
    double wa = 0, cp = 0, wa_hi = 0;
    for (int s = 0; s < 20; ++s) {
      SynthSpec sp;
      sp.seed = 7000 + 100 * j + s;
      sp.sigma_j = sj;
      sp.sigma_sector = s % Msig;
      auto d = decompose(synth(lat, sp));
      rec = std::max(rec, d.reconstruction_error);
      cp = std::max(cp, d.C_pkt);
      nfnb += d.nfnb_violations;
      checked += d.nfnb_checked;
      wa += d.C_wa / 20;
      wa_hi = std::max(wa_hi, d.C_wa);
    }
    cpk = std::max(cpk, cp);
    cwa_max = std::max(cwa_max, wa_hi);
    mean_wa.push_back(wa);
    double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "    2^-" << j << ": C_pkt max " << g(cp) << ", C_wa mean " << g(wa) << " max " << g(wa_hi) << " ("
              << g(sec, 3) << " s)\n";
  }
  v.require(rec <= 1e-6, "reconstruction error");
  v.require(cpk <= 4, "envelope constant");
  v.require(nfnb == 0, "spectral support of packets");
  v.require(cwa_max <= 8, "wa1 constant");
  // delta-stable: mean constant at every scale within 2x of the coarsest
  for (double w : mean_wa) v.require(w <= 2 * mean_wa.front() && w >= mean_wa.front() / 2, "wa1 stability");
  v.summary = "recon " + g(rec) + ", C_pkt " + g(cpk) + ", Nfnb violations " + std::to_string(nfnb) + "/" +
              std::to_string(checked) + ", C_wa max " + g(cwa_max) + ", C_wa means " + g(mean_wa.front()) + ".." +
              g(mean_wa.back()) + ", 80 functions";
  return v;
}

// ---------------------------------------------------------------- 7

OrientedBox random_plate(std::mt19937_64& rng, int D) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> U(0, 1);
  Mat A(D, D);
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) A(i, j) = gauss(rng);
  Eigen::HouseholderQR<Mat> qr(A);
  Mat Q = qr.householderQ();
  Vec c(D), h(D);
  for (int i = 0; i < D; ++i) {
    c[i] = U(rng);
    h[i] = 0.005 + 0.3 * U(rng) * U(rng);
  }
  return OrientedBox(c, Q, h);
}

Verdict localization_oracle() {
  Verdict v;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(0, 1);
  int agree = 0;
  double worst_related = 0;
  int maxP = 0, maxW = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const int D = 2 + inst % 2;
    const int P = 1 + static_cast<int>(rng() % 100);
    const int nw = 1 + static_cast<int>(rng() % 10000);
    const int n = 2 + static_cast<int>(rng() % 30);
    std::vector<OrientedBox> plates;
    for (int i = 0; i < P; ++i) plates.push_back(random_plate(rng, D));
    std::vector<Vec> W;
    // clustered points half the time so that anchors compete
    const bool clustered = inst % 2 == 0;
    Vec hub = Vec::Zero(D);
    for (int e = 0; e < D; ++e) hub[e] = U(rng);
    for (int i = 0; i < nw; ++i) {
      Vec x(D);
      for (int e = 0; e < D; ++e) x[e] = clustered ? std::fmod(hub[e] + 0.2 * U(rng) * U(rng) + 1.0, 1.0) : U(rng);
      W.push_back(x);
    }
    auto fast = localization_relation(plates, W, n);
    auto slow = localization_relation_bruteforce(plates, W, n);
    bool same = fast.I_b == slow.I_b && fast.entries.size() == slow.entries.size();
    for (size_t i = 0; same && i < fast.entries.size(); ++i)
      same = fast.entries[i].excluded == slow.entries[i].excluded && fast.entries[i].anchor == slow.entries[i].anchor &&
             fast.entries[i].related == slow.entries[i].related;
    agree += same;
    v.require(same, "fast relation differs on instance " + std::to_string(inst));
    const double bound = std::pow(12.0, D);
    worst_related = std::max(worst_related, fast.max_related / bound);
    v.require(fast.max_related <= bound, "12^D bound on instance " + std::to_string(inst));
    maxP = std::max(maxP, P);
    maxW = std::max(maxW, nw);
  }
  v.summary = std::to_string(agree) + "/50 exact I_b agreements (|P|<=" + std::to_string(maxP) +
              ", |W|<=" + std::to_string(maxW) + "), max related/12^D " + g(worst_related);
  return v;
}

// ---------------------------------------------------------------- 8

Verdict sharpness() {
  Verdict v;
  struct Case {
    std::shared_ptr<const SurfaceModel> S;
    int p;
  };
  std::vector<Case> cases = {{share(SurfaceModel::circular_cone(1.0, 1.5)), 4}, {share(SurfaceModel::paraboloid(2)), 6}};
  std::ostringstream sum;
  for (const auto& c : cases) {
    SharpnessConfig cfg;
    cfg.p = c.p;
    cfg.deltas = range(3, 6);
    cfg.seeds = 10;
    cfg.budget_bytes = 4e9;
    auto r = sharpness_experiment(c.S, cfg);
    double secs = 0;
    for (const auto& row : r.rows) secs += row.seconds;
    std::cout << "    (" << r.d << "," << r.k << ",p=" << r.p << ") slope " << g(r.fit.slope) << " +- "
              << g(r.fit.stderr_slope) << ", theory " << g(r.fit.theory_slope) << " (" << g(secs, 3) << " s)\n";
    v.require(std::abs(r.fit.slope - r.fit.theory_slope) <= 0.15,
              "slope for (" + std::to_string(r.d) + "," + std::to_string(r.k) + ")");
    sum << "(" << r.d << "," << r.k << "," << r.p << ") " << g(r.fit.slope, 3) << " vs " << g(r.fit.theory_slope, 3)
        << "; ";
  }
  int identities = 0;
  for (int dk = 1; dk <= 6; ++dk)
    for (int k = 0; k <= 4; ++k) {
      bool ok = sharpness_identity(dk + k, k);
      identities += ok;
      v.require(ok, "identity at d-k=" + std::to_string(dk));
    }
  sum << "identity exact for " << identities << "/30 (d,k) with d-k in 1..6";
  v.summary = sum.str();
  return v;
}

// ---------------------------------------------------------------- 9

Verdict exponents() {
  Verdict v;
  auto t41 = exponent_table(4, 1);
  auto t31 = exponent_table(3, 1);
  v.require(t41.p1_applicable && t41.p1 && *t41.p1 == Rational(10), "p1(4,1) = 10");
  v.require(t31.p2_applicable && t31.p2 && *t31.p2 == Rational(18), "p2(3,1) = 18");
  v.require(t31.best_p == Rational(4), "best_p(3,1) = 4");
  v.require(t31.r(Rational(4)) == Rational(1, 4), "r(4;3,1) = 1/4");
  // alpha_min = (d-k+1)|1/2-1/p| - 1/2 against an independent rational evaluation
  int exact = 0, total = 0;
  for (int d = 1; d <= 8; ++d)
    for (int k = 0; k < d; ++k)
      for (int num = 2; num <= 20; ++num)
        for (int den = 1; den <= 4; ++den) {
          Rational p(num, den);
          Rational h = Rational(1, 2) - Rational(den, num);
          if (h < 0) h = -h;
          Rational ref = Rational(d - k + 1) * h - Rational(1, 2);
          exact += exponent_table(d, k).alpha_min(p) == ref;
          ++total;
        }
  v.require(exact == total, "alpha_min exact");
  v.summary = "p1(4,1)=" + to_string(*t41.p1) + ", p2(3,1)=" + to_string(*t31.p2) + ", best_p(3,1)=" +
              to_string(t31.best_p) + ", r(4;3,1)=" + to_string(t31.r(Rational(4))) + ", alpha_min exact " +
              std::to_string(exact) + "/" + std::to_string(total);
  return v;
}

// ---------------------------------------------------------------- 10

Verdict cross_section_lemma() {
  Verdict v;
  auto S = random_ellipse_kcone(3, 3);
  Vec alpha(2);
  alpha << 0.5, 0.5;
  auto cs = cross_section(S, alpha, 10000);
  v.require(cs.max_normal_defect <= 1e-6, "section normals");
  v.require(cs.convex, "discrete convexity");
  v.summary = "normal defect " + g(cs.max_normal_defect) + " (finite difference " + g(cs.max_fd_normal_defect) +
              "), min h+h'' " + g(cs.min_second_difference) + ", 10^4 directions";
  return v;
}

// ---------------------------------------------------------------- 11

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> m;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) m[fs::relative(e.path(), dir).string()] = read_text(e.path().string());
  return m;
}

Verdict determinism(const std::string& cli) {
  Verdict v;
  if (cli.empty() || !fs::exists(cli)) {
    v.require(false, "cli binary not found (pass --cli)");
    v.summary = "cli unavailable";
    return v;
  }
  const fs::path root = fs::temp_directory_path() / "wolff_acceptance_det";
  const fs::path out = root / "out";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cone = (root / "cone.json").string(), ell = (root / "ellipse.json").string();
  write_text(cone, R"({"kind": "circular_cone", "c1": 1.0, "c2": 1.5})");
  write_text(ell, R"({"kind": "random_ellipse_kcone", "seed": 3})");
  write_json((root / "run.json").string(), json{{"surface", cone}, {"delta", "2^-4"}, {"seed", 7}});
  const std::string B = "\"" + cli + "\"", O = " --out \"" + out.string() + "\"",
                    C = " --config \"" + (root / "run.json").string() + "\"";
  const std::vector<std::string> cmds = {
      B + " exponents --d 3 --k 1" + O,
      B + " surface --surface " + ell + " --directions 2000" + O,
      B + " cover --surface " + cone + " --delta 2^-6 --tubes --sigma 2^-2" + O,
      B + " verify --samples 20000" + O,
      B + " stats --surface " + cone + " --deltas 2^-4..2^-8" + O,
      B + C + " synth" + O,
      B + C + " knapp --seed 3" + O,
      B + C + " norms --input \"" + (out / "f.wlf").string() + "\"" + O,
      B + C + " multiplier --alpha 0.5" + O,
      B + C + " decompose" + O,
      B + C + " localize --t 1/8" + O,
      B + " sharpness --surface " + cone + " --p 4 --deltas 2^-3..2^-5 --seeds 2" + O,
  };
  std::map<std::string, std::string> first;
  for (int rep = 0; rep < 2; ++rep) {
    fs::remove_all(out);
    for (const auto& c : cmds) {
      int rc = std::system((c + " > /dev/null").c_str());
      if (rc != 0) v.require(false, "command failed: " + c);
    }
    if (rep == 0) first = snapshot(out);
  }
  auto second = snapshot(out);
  int differ = 0;
  for (const auto& [k, bytes] : first) {
    auto it = second.find(k);
    if (it == second.end() || it->second != bytes) {
      ++differ;
      v.require(false, "differs: " + k);
    }
  }
  v.require(first.size() == second.size(), "file sets differ");
  size_t bytes = 0;
  for (const auto& kv : first) bytes += kv.second.size();
  v.summary = std::to_string(first.size()) + " files (" + std::to_string(bytes) + " bytes) from " +
              std::to_string(cmds.size()) + " commands, " + std::to_string(differ) + " differ";
  fs::remove_all(root);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string cli;
  std::vector<int> only;
  app.add_option("--cli", cli, "path to the wolff binary");
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"counting laws", counting_laws},
      {"sector volume law", volume_law},
      {"assumption A validator", assumption_a},
      {"partition and Plancherel", partition_plancherel},
      {"interpolation inequality", interpolation},
      {"wave packet suite", wave_packets},
      {"localization oracle", localization_oracle},
      {"sharpness experiment", sharpness},
      {"exponent table", exponents},
      {"cross-section lemma", cross_section_lemma},
      {"determinism", [&] { return determinism(cli); }},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    std::cout << "criterion " << id << " (" << criteria[i].first << ")\n" << std::flush;
    auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.summary = std::string("exception: ") + e.what();
    }
    double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << v.summary << " [" << g(sec, 3)
              << " s]\n"
              << std::flush;
    failed += !v.pass;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << failed << " failing criteria\n";
  return failed ? 1 : 0;
}
