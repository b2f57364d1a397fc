#include <algorithm>
#include <chrono>
#include <cmath>

#include "wolff/error.hpp"
#include "wolff/experiments.hpp"
#include "wolff/spectral.hpp"

namespace wolff {

SharpnessResult sharpness_experiment(std::shared_ptr<const SurfaceModel> model, const SharpnessConfig& cfg) {
  if (cfg.p < 2 || cfg.p % 2) throw ConfigError("sharpness needs an even exponent p >= 2");
  if (cfg.deltas.size() < 3) throw ConfigError("sharpness needs at least 3 scales");
  if (cfg.seeds < 1) throw ConfigError("sharpness needs at least one seed");
  SharpnessResult out;
  out.d = model->d();
  out.k = model->k();
  out.p = cfg.p;
  out.identity = sharpness_identity(out.d, out.k);
  ExponentTable tab = exponent_table(out.d, out.k);
  const double theory = boost::rational_cast<double>(tab.knapp_slope(Rational(cfg.p)));
  const int D = out.d + 1;
  std::vector<Dyadic> deltas = cfg.deltas;
  std::sort(deltas.begin(), deltas.end(), [](const Dyadic& a, const Dyadic& b) { return a.j < b.j; });
  // refuse before building anything
  for (const auto& dl : deltas) {
    double N = double(cfg.nu) * std::ldexp(1.0, dl.j);
    if (std::pow(N, D) * 16.0 * 3.0 > cfg.budget_bytes)
      throw BudgetError("grid for delta " + dl.str() + " exceeds the memory budget");
  }
  ScalingSeries series;
  for (const auto& dl : deltas) {
    auto t0 = std::chrono::steady_clock::now();
    auto cov = std::make_shared<const Covering>(build_covering(model, dl));
    auto lat = build_lattice(cov, cfg.nu);
    SharpnessRow row;
    row.delta = dl;
    row.M = lat->M();
    double lr = 0, l1 = 0, l2 = 0;
    row.ratio_min = kInf;
    for (int s = 0; s < cfg.seeds; ++s) {
      KnappResult kr = knapp(lat, cfg.random_phase, cfg.seed0 + s);
      row.skipped = kr.skipped;
      double num = exact_moment(kr.f, cfg.p);
      double den = 0;
      for (int a = 0; a < lat->M(); ++a) {
        GridFunction fa = sector_project(kr.f, a);
        if (fa.size()) den += exact_moment(fa, cfg.p);
      }
      if (!(num > 0) || !(den > 0)) throw NumericError("vanishing norm in the Knapp example");
      double lp = std::pow(num, 1.0 / cfg.p), lpd = std::pow(den, 1.0 / cfg.p);
      double ratio = lp / lpd;
      lr += std::log(ratio);
      l1 += std::log(lp);
      l2 += std::log(lpd);
      row.ratio_min = std::min(row.ratio_min, ratio);
      row.ratio_max = std::max(row.ratio_max, ratio);
    }
    row.ratio = std::exp(lr / cfg.seeds);
    row.lp = std::exp(l1 / cfg.seeds);
    row.lp_delta = std::exp(l2 / cfg.seeds);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    series.deltas.push_back(dl);
    series.values.push_back(row.ratio);
    out.rows.push_back(row);
  }
  out.fit = scaling_fit(series, theory, cfg.tol);
  return out;
}

}  // namespace wolff
