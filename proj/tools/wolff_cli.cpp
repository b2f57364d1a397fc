#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "wolff/error.hpp"
#include "wolff/io.hpp"

using namespace wolff;
namespace fs = std::filesystem;

namespace {

// effective configuration: raw file + overrides, and every value actually read
struct Cfg {
  json raw = json::object();
  json used = json::object();

  static json::json_pointer ptr(const std::string& key) {
    std::string p = "/" + key;
    for (auto& ch : p)
      if (ch == '.') ch = '/';
    return json::json_pointer(p);
  }
  bool has(const std::string& key) const { return raw.contains(ptr(key)) && !raw[ptr(key)].is_null(); }
  const json& at(const std::string& key) const { return raw[ptr(key)]; }

  template <class T>
  T get(const std::string& key, T def) {
    T v = def;
    if (has(key)) {
      try {
        v = at(key).get<T>();
      } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
      }
    }
    used[ptr(key)] = v;
    return v;
  }
  std::string str(const std::string& key, const std::string& def) { return get<std::string>(key, def); }
  double num(const std::string& key, double def) { return get<double>(key, def); }
  int integer(const std::string& key, int def) { return get<int>(key, def); }
  std::uint64_t seed(const std::string& key, std::uint64_t def) { return get<std::uint64_t>(key, def); }
  bool flag(const std::string& key, bool def) { return get<bool>(key, def); }

  Dyadic scale(const std::string& key, const std::string& def) {
    if (!has(key) && def.empty()) throw ConfigError("missing scale '" + key + "'");
    std::string s = has(key) ? at(key).get<std::string>() : def;
    Dyadic d = Dyadic::parse(s);
    used[ptr(key)] = d.str();
    return d;
  }
  std::optional<Dyadic> opt_scale(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return scale(key, "");
  }
  std::vector<Dyadic> scales(const std::string& key, const std::string& def) {
    std::string s = has(key) ? at(key).get<std::string>() : def;
    auto v = Dyadic::parse_list(s);
    used[ptr(key)] = s;
    return v;
  }
  // "1/16", "2^-4" or a plain number
  double fraction(const std::string& key, const std::string& def) {
    std::string s = def;
    if (has(key)) s = at(key).is_string() ? at(key).get<std::string>() : at(key).dump();
    used[ptr(key)] = s;
    double v;
    try {
      if (s.find('^') != std::string::npos) {
        v = Dyadic::parse(s).value();
      } else if (auto k = s.find('/'); k != std::string::npos) {
        v = std::stod(s.substr(0, k)) / std::stod(s.substr(k + 1));
      } else {
        v = std::stod(s);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("cannot read '" + key + "' = " + s);
    }
    return v;
  }
};

struct Run {
  std::string command;
  fs::path out;
  Cfg cfg;
  json measured = json::object();

  fs::path file(const std::string& name) const { return out / name; }
  double budget() { return cfg.num("budget_bytes", 4e9); }
};

// ---------------------------------------------------------------- config helpers

// a surface is a descriptor file, an inline JSON object, or a JSON object written as a string
std::shared_ptr<const SurfaceModel> surface_from_ref(const std::string& ref) {
  if (!ref.empty() && ref.front() == '{') return std::make_shared<const SurfaceModel>(surface_from_json(json::parse(ref)));
  return load_surface(ref);
}

std::shared_ptr<const SurfaceModel> surface_of(Run& r, std::string* ref = nullptr) {
  if (!r.cfg.has("surface")) throw ConfigError("no surface given (--surface or \"surface\" in the config)");
  json s = r.cfg.at("surface");
  if (s.is_string() && !s.get<std::string>().empty() && s.get<std::string>().front() == '{')
    s = json::parse(s.get<std::string>());
  r.cfg.used["surface"] = s;
  std::shared_ptr<const SurfaceModel> m;
  if (s.is_string()) {
    m = load_surface(s.get<std::string>());
    if (ref) *ref = s.get<std::string>();
  } else {
    m = std::make_shared<const SurfaceModel>(surface_from_json(s));
    if (ref) *ref = s.dump();
  }
  return m;
}

CoveringConstants covering_constants(Run& r) {
  CoveringConstants c;
  c.C = r.cfg.num("constants.C", c.C);
  c.c = r.cfg.num("constants.c", c.c);
  c.Cpp = r.cfg.num("constants.Cpp", c.Cpp);
  c.K_ang_bound = r.cfg.integer("constants.K_ang_bound", c.K_ang_bound);
  return c;
}

// delta <= rho <= sigma <= 1
void check_scales(Run& r) {
  auto d = r.cfg.opt_scale("delta"), rho = r.cfg.opt_scale("rho"), s = r.cfg.opt_scale("sigma");
  if (d && rho && rho->j > d->j) throw ConfigError("rho must not be finer than delta");
  if (d && s && s->j > d->j) throw ConfigError("sigma must not be finer than delta");
  if (rho && s && s->j > rho->j) throw ConfigError("sigma must not be finer than rho");
  for (const auto& x : {d, rho, s})
    if (x && x->j < 0) throw ConfigError("scales must be at most 1");
}

Covering covering_of(Run& r, Dyadic delta) {
  std::string ref;
  auto S = surface_of(r, &ref);
  Covering cov = build_covering(S, delta, covering_constants(r), r.cfg.seed("covering_seed", 0));
  cov.surface_ref = ref;
  return cov;
}

std::shared_ptr<const SpectralLattice> lattice_of(Run& r) {
  Dyadic delta = r.cfg.scale("delta", "");
  const int nu = r.cfg.integer("constants.nu", 4);
  const double q = r.cfg.num("constants.q", 4.0);
  std::string ref;
  auto S = surface_of(r, &ref);
  // projected footprint: N^D complex doubles, working factor 3
  const double N = double(nu) * std::ldexp(1.0, delta.j);
  const double bytes = std::pow(N, S->D()) * 16.0 * 3.0;
  if (bytes > r.budget())
    throw BudgetError("grid footprint " + fmt_double(bytes) + " bytes exceeds the budget " + fmt_double(r.budget()));
  auto cov = std::make_shared<Covering>(build_covering(S, delta, covering_constants(r), r.cfg.seed("covering_seed", 0)));
  cov->surface_ref = ref;
  auto lat = build_lattice(cov, nu, q);
  r.measured["M_delta"] = lat->M();
  r.measured["mask_points"] = lat->size();
  r.measured["mask_dropped"] = lat->dropped;
  r.measured["N"] = lat->N;
  return lat;
}

SynthSpec synth_spec(Run& r, const std::string& default_kind) {
  SynthSpec sp;
  sp.kind = r.cfg.str("kind", default_kind);
  sp.seed = r.cfg.seed("seed", 1);
  sp.random_phase = r.cfg.flag("random_phase", true);
  if (r.cfg.has("sectors")) sp.sectors = r.cfg.get<std::vector<int>>("sectors", {});
  if (r.cfg.has("xi")) sp.xi = r.cfg.get<std::vector<int>>("xi", {});
  if (auto s = r.cfg.opt_scale("sigma")) {
    sp.sigma_j = s->j;
    sp.sigma_sector = r.cfg.integer("sigma_sector", 0);
  }
  return sp;
}

// function from --input (WLF1 grid) or synthesized from the config
GridFunction function_of(Run& r, std::shared_ptr<const SpectralLattice> lat) {
  if (r.cfg.has("input")) {
    GridFile g = read_grid(r.cfg.str("input", ""));
    if (static_cast<int>(g.D) != lat->D) throw InputError("grid dimension does not match the surface");
    double off = 0;
    GridFunction f = grid_to_function(lat, g, &off);
    r.measured["input_off_mask_energy"] = off;
    return f;
  }
  return synth(lat, synth_spec(r, "random"));
}

PacketOptions packet_options(Run& r) {
  PacketOptions po;
  po.refine = r.cfg.integer("refine", po.refine);
  po.K = r.cfg.num("constants.K", po.K);
  po.cutoff = r.cfg.num("cutoff", po.cutoff);
  po.p = r.cfg.integer("p", po.p);
  po.r_eta = r.cfg.num("constants.r_eta", po.r_eta);
  po.window_scale = r.cfg.num("window_scale", po.window_scale);
  if (auto s = r.cfg.opt_scale("sigma")) {
    po.sigma_j = s->j;
    po.sigma_sector = r.cfg.integer("sigma_sector", 0);
  }
  return po;
}

json report_json(const CoveringReport& c) {
  return {{"delta", c.delta.str()},
          {"sigma", c.sigma.str()},
          {"M_delta", c.M_delta},
          {"max_overlap", c.max_overlap},
          {"mean_overlap", c.mean_overlap},
          {"coverage_failures", c.coverage_failures},
          {"coverage_boundary", c.coverage_boundary},
          {"K_ang", c.K_ang},
          {"ang_violations", c.ang_violations},
          {"K_ang_printed", c.K_ang_printed},
          {"consistency_checked", c.consistency_checked},
          {"consistency_violations", c.consistency_violations},
          {"containment_checked", c.containment_checked},
          {"containment_failures", c.containment_failures},
          {"containment_boundary", c.containment_boundary},
          {"distance_fallbacks", c.distance_fallbacks},
          {"mean_volume", c.mean_volume},
          {"volume_ratio", c.volume_ratio}};
}

json fit_json(const RegressionResult& f) {
  return {{"slope", f.slope},
          {"intercept", f.intercept},
          {"stderr", f.stderr_slope},
          {"theory_slope", f.theory_slope},
          {"tolerance", f.tolerance},
          {"verdict", f.verdict ? "pass" : "fail"}};
}

std::string rat(const std::optional<Rational>& r) { return r ? to_string(*r) : "-"; }

// ---------------------------------------------------------------- commands

void cmd_surface(Run& r) {
  auto S = surface_of(r);
  S->validate(r.cfg.integer("validate_net", 0));
  json j = {{"name", S->name}, {"d", S->d()}, {"k", S->k()}, {"D", S->D()}, {"param_dim", S->param_dim()},
            {"c0", S->c0()}, {"radius_bound", S->radius_bound()}};
  const char* kinds[] = {"graph", "conical", "kcone"};
  j["kind"] = kinds[static_cast<int>(S->kind())];
  r.measured["c0"] = S->c0();
  if (S->kind() == SurfaceKind::KCone) {
    const int m = S->d() - S->k() + 1;
    const int dirs = r.cfg.integer("directions", 10000);
    double vmin = kInf;
    for (const auto& n : sphere_samples(m, std::min(dirs, 2000), 5)) vmin = std::min(vmin, S->frame_volume(n));
    Vec alpha = Vec::Constant(S->k() + 1, 1.0 / (S->k() + 1));
    if (r.cfg.has("alpha")) alpha = json_vec(r.cfg.at("alpha"));
    r.cfg.used["alpha"] = vec_json(alpha);
    auto cs = cross_section(*S, alpha, dirs);
    j["min_frame_volume"] = vmin;
    j["cross_section"] = {{"alpha", vec_json(alpha)},
                          {"directions", dirs},
                          {"max_normal_defect", cs.max_normal_defect},
                          {"max_fd_normal_defect", cs.max_fd_normal_defect},
                          {"min_second_difference", cs.min_second_difference},
                          {"convex", cs.convex}};
    r.measured["min_frame_volume"] = vmin;
    r.measured["max_normal_defect"] = cs.max_normal_defect;
  }
  write_json(r.file("surface.json").string(), j);
  std::cout << S->name << ": d=" << S->d() << " k=" << S->k() << " D=" << S->D() << "\n";
}

void cmd_cover(Run& r) {
  check_scales(r);
  Dyadic delta = r.cfg.scale("delta", "");
  Covering cov = covering_of(r, delta);
  std::vector<Plate> plates;
  std::optional<TubeFamily> tubes;
  const bool want_tubes = r.cfg.flag("tubes", false);
  if (r.cfg.flag("plates", false) || want_tubes) {
    const int D = cov.surface->D();
    OrientedBox torus(Vec::Constant(D, 0.5), Mat::Identity(D, D), Vec::Constant(D, 0.5));
    for (const auto& s : cov.sectors) {
      auto p = plate_tiling(s, torus);
      plates.insert(plates.end(), p.begin(), p.end());
    }
    r.measured["plates"] = plates.size();
  }
  if (want_tubes) {
    Dyadic sigma = r.cfg.scale("sigma", "");
    tubes = build_tubes(plates, cov.sectors, sigma, delta, cov.constants.C);
    r.measured["tubes"] = tubes->tubes.size();
    r.measured["tube_fallbacks"] = tubes->fallbacks;
    r.measured["K_dir"] = tubes->K_dir;
  }
  write_json(r.file("covering.json").string(),
             covering_to_json(cov, plates.empty() ? nullptr : &plates, tubes ? &*tubes : nullptr));
  r.measured["M_delta"] = cov.M();
  r.measured["simplex_divisions"] = cov.simplex_divisions;
  r.measured["net_points"] = cov.net.points.size();
  std::cout << "M_delta " << cov.M() << " at " << delta.str() << "\n";
}

void cmd_verify(Run& r) {
  std::string path = r.cfg.str("covering", r.file("covering.json").string());
  json cj = read_json(path);
  std::shared_ptr<const SurfaceModel> S;
  if (r.cfg.has("surface")) {
    S = surface_of(r);
  } else {
    S = surface_from_ref(cj.at("surface_ref").get<std::string>());
  }
  Covering fine = covering_from_json(cj, S);
  const auto& k = fine.constants;
  r.cfg.used["constants"] = {{"C", k.C}, {"c", k.c}, {"Cpp", k.Cpp}, {"K_ang_bound", k.K_ang_bound}};
  const int js = std::max(2, fine.delta.j / 2);
  Dyadic sigma = r.cfg.scale("sigma", Dyadic(std::min(js, fine.delta.j)).str());
  if (sigma.j > fine.delta.j) throw ConfigError("sigma must not be finer than the covering scale");
  Covering coarse = build_covering(S, sigma, fine.constants, r.cfg.seed("covering_seed", 0));
  VerifyOptions vo;
  vo.samples = r.cfg.integer("samples", vo.samples);
  vo.containment_samples = r.cfg.integer("containment_samples", vo.containment_samples);
  vo.seed = r.cfg.seed("seed", vo.seed);
  auto rep = verify_assumption_A(fine, coarse, vo);
  write_text(r.file("report.csv").string(), report_csv_header() + report_csv_row(rep));
  write_json(r.file("report.json").string(), report_json(rep));
  r.measured["K"] = rep.max_overlap;
  r.measured["K_ang"] = rep.K_ang;
  r.measured["mean_overlap"] = rep.mean_overlap;
  r.measured["volume_ratio"] = rep.volume_ratio;
  std::cout << report_csv_header() << report_csv_row(rep);
}

void cmd_stats(Run& r) {
  std::string ref;
  auto S = surface_of(r, &ref);
  auto deltas = r.cfg.scales("deltas", "2^-4..2^-10");
  Dyadic sigma = r.cfg.scale("sigma", "2^-2");
  auto st = covering_stats(S, deltas, sigma, covering_constants(r));
  std::vector<Dyadic> ds;
  std::vector<double> ms;
  json rows = json::array();
  for (const auto& row : st.rows) {
    ds.push_back(row.delta);
    ms.push_back(row.M);
    rows.push_back({{"delta", row.delta.str()},
                    {"M_delta", row.M},
                    {"mean_volume", row.mean_volume},
                    {"volume_ratio", row.volume_ratio},
                    {"M_sigma_delta", row.M_sigma_delta},
                    {"M_sigma_delta_containing", row.M_sigma_delta_containing}});
  }
  RegressionResult fit = st.M_fit;
  write_text(r.file("stats.csv").string(), experiment_csv(ds, ms, fit));
  write_json(r.file("stats.json").string(), {{"surface_ref", ref},
                                              {"sigma", sigma.str()},
                                              {"M_sigma", st.M_sigma},
                                              {"rows", rows},
                                              {"fit", fit_json(fit)},
                                              {"volume_ratio_spread", st.volume_ratio_spread}});
  r.measured["M_slope"] = fit.slope;
  r.measured["volume_ratio_spread"] = st.volume_ratio_spread;
  std::cout << "slope " << fmt_double(fit.slope) << " theory " << fmt_double(fit.theory_slope) << "\n";
}

void synth_common(Run& r, const std::string& kind, const std::string& name) {
  check_scales(r);
  auto lat = lattice_of(r);
  json info;
  GridFunction f;
  if (kind == "knapp") {
    const bool phase = r.cfg.flag("random_phase", true);
    const std::uint64_t seed = r.cfg.seed("seed", 1);
    auto k = knapp(lat, phase, seed);
    f = k.f;
    info["skipped_sectors"] = k.skipped;
    r.measured["knapp_skipped"] = k.skipped;
  } else {
    f = synth(lat, synth_spec(r, kind));
  }
  write_grid(r.file(name + ".wlf").string(), f, r.budget());
  info["terms"] = f.size();
  info["l2"] = std::sqrt(f.l2sq());
  info["provenance"] = f.provenance;
  info["N"] = lat->N;
  write_json(r.file(name + ".json").string(), info);
  std::cout << name << ".wlf: " << f.size() << " terms\n";
}

void cmd_norms(Run& r) {
  check_scales(r);
  auto lat = lattice_of(r);
  GridFunction f = function_of(r, lat);
  std::vector<double> ps;
  std::string list = r.cfg.str("p_list", "2,4,6,inf");
  std::stringstream ss(list);
  for (std::string t; std::getline(ss, t, ',');) {
    if (t == "inf") {
      ps.push_back(kInf);
      continue;
    }
    try {
      ps.push_back(std::stod(t));
    } catch (const std::logic_error&) {
      throw ConfigError("bad exponent '" + t + "'");
    }
    if (ps.back() < 2) throw ConfigError("norm exponents must be >= 2");
  }
  auto nr = norms(f, ps, r.budget());
  std::string csv = "p,lp,lp_delta,interpolation_ratio\n";
  json rows = json::array();
  for (size_t i = 0; i < ps.size(); ++i) {
    // ||f||_{p,delta}^p against ||f||_{inf,delta}^{p-2} sum_a ||f_a||_2^2
    double ratio = std::isinf(ps[i]) ? 1.0
                                     : std::pow(nr.lp_delta[i], ps[i]) /
                                           (std::pow(nr.linf_delta, ps[i] - 2) * nr.sum_sector_l2sq);
    csv += fmt_double(ps[i]) + "," + fmt_double(nr.lp[i]) + "," + fmt_double(nr.lp_delta[i]) + "," +
           fmt_double(ratio) + "\n";
    rows.push_back({{"p", fmt_double(ps[i])}, {"lp", nr.lp[i]}, {"lp_delta", nr.lp_delta[i]}, {"interpolation_ratio", ratio}});
  }
  write_text(r.file("norms.csv").string(), csv);
  write_json(r.file("norms.json").string(), {{"rows", rows},
                                              {"linf", nr.linf},
                                              {"linf_delta", nr.linf_delta},
                                              {"l2_coef", nr.l2_coef},
                                              {"l2_grid", nr.l2_grid},
                                              {"sum_sector_l2sq", nr.sum_sector_l2sq},
                                              {"sectors_used", nr.sectors_used}});
  r.measured["linf_delta"] = nr.linf_delta;
  r.measured["plancherel_defect"] = std::abs(nr.l2_grid - nr.l2_coef) / std::max(1e-300, nr.l2_coef);
  std::cout << csv;
}

void cmd_multiplier(Run& r) {
  check_scales(r);
  auto lat = lattice_of(r);
  GridFunction f = function_of(r, lat);
  MultiplierSpec m;
  m.alpha = r.cfg.num("alpha", 0.0);
  m.inner = r.cfg.num("inner", m.inner);
  m.outer = r.cfg.num("outer", m.outer);
  if (!(m.outer > m.inner)) throw ConfigError("multiplier cutoff needs outer > inner");
  GridFunction g = apply_multiplier(f, m);
  write_grid(r.file("multiplied.wlf").string(), g, r.budget());
  const double sup = multiplier_sup(f, m);
  write_json(r.file("multiplier.json").string(), {{"alpha", m.alpha},
                                                   {"inner", m.inner},
                                                   {"outer", m.outer},
                                                   {"multiplier_sup", sup},
                                                   {"l2_in", std::sqrt(f.l2sq())},
                                                   {"l2_out", std::sqrt(g.l2sq())}});
  r.measured["multiplier_sup"] = sup;
  std::cout << "sup |m| " << fmt_double(sup) << "\n";
}

void cmd_decompose(Run& r) {
  check_scales(r);
  auto lat = lattice_of(r);
  GridFunction f = function_of(r, lat);
  auto dec = decompose(f, packet_options(r));
  json extra = {{"seed", r.cfg.seed("seed", 1)}};
  write_decomposition(r.file("decomposition").string(), dec, extra, r.budget());
  r.measured["C_pkt"] = dec.C_pkt;
  r.measured["C_pkt_global"] = dec.C_pkt_global;
  r.measured["C_wa"] = dec.C_wa;
  r.measured["katr1"] = dec.katr1;
  r.measured["reconstruction_error"] = dec.reconstruction_error;
  r.measured["nfnb_violations"] = dec.nfnb_violations;
  std::cout << dec.packets.size() << " packets in " << dec.levels.size() << " levels, C_pkt "
            << fmt_double(dec.C_pkt) << "\n";
}

void cmd_localize(Run& r) {
  check_scales(r);
  auto lat = lattice_of(r);
  GridFunction f = function_of(r, lat);
  auto dec = decompose(f, packet_options(r));
  double lambda;
  if (r.cfg.has("lambda")) {
    lambda = r.cfg.num("lambda", 0.0);
  } else {
    double mx = 0;
    for (auto v : f.samples(r.budget())) mx = std::max(mx, std::abs(v));
    lambda = r.cfg.num("lambda_frac", 0.5) * mx;
  }
  const double t = r.cfg.fraction("t", "1/16");
  LocalizeOptions lo;
  lo.tubes = r.cfg.flag("tubes", false);
  lo.capture_threshold = r.cfg.num("capture_threshold", lo.capture_threshold);
  lo.C_log_bound = r.cfg.num("C_log_bound", 0.0);
  lo.budget_bytes = r.budget();
  auto rep = localize_check(dec, lambda, t, lo);
  write_text(r.file("relation.csv").string(), relation_csv(rep.rel));
  write_json(r.file("localize.json").string(), {{"lambda", rep.lambda},
                                                 {"t", t},
                                                 {"empty", rep.empty},
                                                 {"localizes", rep.localizes},
                                                 {"W_size", rep.rel.W_size},
                                                 {"cubes", rep.cubes},
                                                 {"I_b", rep.rel.I_b},
                                                 {"max_related", rep.rel.max_related},
                                                 {"scaling", rep.rel.scaling},
                                                 {"sum_PQ", rep.sum_PQ},
                                                 {"C_log", rep.C_log},
                                                 {"captured", rep.captured},
                                                 {"tubes", rep.tubes}});
  r.measured["C_log"] = rep.C_log;
  r.measured["captured"] = rep.captured;
  r.measured["max_related"] = rep.rel.max_related;
  std::cout << (rep.localizes ? "localizes" : "does not localize") << ", captured " << fmt_double(rep.captured) << "\n";
}

void cmd_sharpness(Run& r) {
  std::string ref;
  auto S = surface_of(r, &ref);
  SharpnessConfig c;
  c.p = r.cfg.integer("p", c.p);
  c.deltas = r.cfg.scales("deltas", "2^-3..2^-6");
  c.seeds = r.cfg.integer("seeds", c.seeds);
  c.seed0 = r.cfg.seed("seed", c.seed0);
  c.random_phase = r.cfg.flag("random_phase", c.random_phase);
  c.tol = r.cfg.num("tolerance", c.tol);
  c.nu = r.cfg.integer("constants.nu", c.nu);
  c.budget_bytes = r.budget();
  auto res = sharpness_experiment(S, c);
  std::vector<Dyadic> ds;
  std::vector<double> vals;
  json rows = json::array();
  for (const auto& row : res.rows) {
    ds.push_back(row.delta);
    vals.push_back(row.ratio);
    rows.push_back({{"delta", row.delta.str()},
                    {"M_delta", row.M},
                    {"skipped", row.skipped},
                    {"ratio", row.ratio},
                    {"ratio_min", row.ratio_min},
                    {"ratio_max", row.ratio_max},
                    {"lp", row.lp},
                    {"lp_delta", row.lp_delta}});
  }
  write_text(r.file("sharpness.csv").string(), experiment_csv(ds, vals, res.fit));
  write_json(r.file("sharpness.json").string(), {{"surface_ref", ref},
                                                  {"d", res.d},
                                                  {"k", res.k},
                                                  {"p", res.p},
                                                  {"rows", rows},
                                                  {"fit", fit_json(res.fit)},
                                                  {"identity_at_best_p", res.identity}});
  r.measured["slope"] = res.fit.slope;
  r.measured["stderr"] = res.fit.stderr_slope;
  std::cout << experiment_csv(ds, vals, res.fit);
}

void cmd_exponents(Run& r) {
  const int d = r.cfg.integer("d", 3), k = r.cfg.integer("k", 1);
  auto t = exponent_table(d, k);
  Rational p = t.best_p;
  json j = {{"d", d},
            {"k", k},
            {"p1", rat(t.p1)},
            {"p1_applicable", t.p1_applicable},
            {"p2", rat(t.p2)},
            {"p2_applicable", t.p2_applicable},
            {"best_p", to_string(t.best_p)},
            {"r_best_p", to_string(t.r(p))},
            {"alpha_min_best_p", to_string(t.alpha_min(p))},
            {"knapp_slope_best_p", to_string(t.knapp_slope(p))},
            {"theorem_exponent_best_p", to_string(t.theorem_exponent(p))},
            {"identity", sharpness_identity(d, k)},
            {"note", t.note()}};
  std::ostringstream tab;
  tab << "d " << d << "  k " << k << "\n";
  tab << "p1      " << (t.p1_applicable ? rat(t.p1) : "n/a") << "\n";
  tab << "p2      " << (t.p2_applicable ? rat(t.p2) : "n/a") << "\n";
  tab << "best_p  " << to_string(t.best_p) << "\n";
  tab << "r(best_p)  " << to_string(t.r(p)) << "\n";
  tab << "alpha_min(best_p)  " << to_string(t.alpha_min(p)) << "\n";
  if (!t.note().empty()) tab << "note    " << t.note() << "\n";
  write_json(r.file("exponents.json").string(), j);
  write_text(r.file("exponents.txt").string(), tab.str());
  std::cout << tab.str();
}

// ---------------------------------------------------------------- flags

struct Override {
  CLI::Option* opt;
  std::string key;
  char type;  // s string, i int, d double, b flag, n negated flag, j json
  std::shared_ptr<std::string> val;
  std::shared_ptr<bool> on;
};

struct Command {
  CLI::App* app;
  std::vector<Override> over;

  void opt(const std::string& flag, const std::string& key, char type, const std::string& help) {
    Override o{nullptr, key, type, std::make_shared<std::string>(), std::make_shared<bool>(false)};
    if (type == 'b' || type == 'n')
      o.opt = app->add_flag(flag, *o.on, help);
    else
      o.opt = app->add_option(flag, *o.val, help);
    over.push_back(o);
  }

  void apply(json& cfg) const {
    for (const auto& o : over) {
      if (o.opt->count() == 0) continue;
      auto p = Cfg::ptr(o.key);
      try {
        switch (o.type) {
          case 'i': cfg[p] = std::stoll(*o.val); break;
          case 'd': cfg[p] = std::stod(*o.val); break;
          case 'b': cfg[p] = *o.on; break;
          case 'n': cfg[p] = !*o.on; break;
          case 'j': cfg[p] = json::parse(*o.val); break;
          default: cfg[p] = *o.val;
        }
      } catch (const std::logic_error&) {
        throw InputError("cannot read " + o.opt->get_name() + " '" + *o.val + "'");
      }
    }
  }
};

void lattice_flags(Command& c) {
  c.opt("--surface", "surface", 's', "surface descriptor JSON");
  c.opt("--delta", "delta", 's', "scale 2^-j");
  c.opt("--sigma", "sigma", 's', "coarse scale 2^-j (restricts the function to one sigma-sector)");
  c.opt("--sigma-sector", "sigma_sector", 'i', "sigma-sector index");
  c.opt("--nu", "constants.nu", 'i', "grid oversampling N = nu/delta");
  c.opt("--C", "constants.C", 'd', "sector constant C");
}

void function_flags(Command& c) {
  lattice_flags(c);
  c.opt("--input", "input", 's', "WLF1 grid file (default: synthesize)");
  c.opt("--kind", "kind", 's', "random | knapp | character | sector");
  c.opt("--seed", "seed", 'i', "synthesis seed");
  c.opt("--xi", "xi", 'j', "character frequency as a JSON list");
  c.opt("--sectors", "sectors", 'j', "sector ids as a JSON list");
}

void packet_flags(Command& c) {
  c.opt("--refine", "refine", 'i', "sample points per plate axis");
  c.opt("--K", "constants.K", 'd', "envelope exponent");
  c.opt("--r-eta", "constants.r_eta", 'd', "spectral radius of the packet window");
  c.opt("--window-scale", "window_scale", 'd', "plate size relative to the dual sector");
  c.opt("--cutoff", "cutoff", 'd', "relative amplitude below which plates are dropped");
  c.opt("--p", "p", 'i', "even exponent for the (wa1) check");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wolff: sector coverings, wave packets and decoupling experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir;
  int threads = 1;
  app.add_option("--config", config_path, "JSON config; flags override its keys");
  app.add_option("--out", out_dir, "output directory (default $WOLFF_OUT or ./wolff_out)");
  app.add_option("--threads", threads, "thread count (results do not depend on it)");

  std::vector<std::pair<std::string, void (*)(Run&)>> table;
  std::vector<Command> cmds;
  auto add = [&](const std::string& name, const std::string& help, void (*fn)(Run&)) -> Command& {
    cmds.push_back({app.add_subcommand(name, help), {}});
    table.emplace_back(name, fn);
    return cmds.back();
  };
  cmds.reserve(16);

  {
    auto& c = add("surface", "validate a surface descriptor, k-cone cross sections", cmd_surface);
    c.opt("--surface", "surface", 's', "surface descriptor JSON");
    c.opt("--alpha", "alpha", 'j', "simplex weights for the cross section");
    c.opt("--directions", "directions", 'i', "directions for the convexity test");
  }
  {
    auto& c = add("cover", "build a delta-sector covering", cmd_cover);
    c.opt("--surface", "surface", 's', "surface descriptor JSON");
    c.opt("--delta", "delta", 's', "scale 2^-j");
    c.opt("--sigma", "sigma", 's', "tube scale 2^-j");
    c.opt("--C", "constants.C", 'd', "sector constant C");
    c.opt("--plates", "plates", 'b', "add the plate tiling of the torus");
    c.opt("--tubes", "tubes", 'b', "add plates and sigma-tubes");
  }
  {
    auto& c = add("verify", "check Assumption (A) for a covering", cmd_verify);
    c.opt("--covering", "covering", 's', "covering JSON (default <out>/covering.json)");
    c.opt("--surface", "surface", 's', "surface descriptor (default: the covering's surface_ref)");
    c.opt("--sigma", "sigma", 's', "coarse scale for the consistency clause");
    c.opt("--samples", "samples", 'i', "overlap samples");
    c.opt("--seed", "seed", 'i', "sampling seed");
  }
  {
    auto& c = add("stats", "counting laws M_delta, sector volumes, M_sigma_delta", cmd_stats);
    c.opt("--surface", "surface", 's', "surface descriptor JSON");
    c.opt("--deltas", "deltas", 's', "scales, 2^-4..2^-10 or a comma list");
    c.opt("--sigma", "sigma", 's', "coarse scale");
  }
  {
    auto& c = add("synth", "synthesize a band-limited function", [](Run& r) {
      synth_common(r, r.cfg.str("kind", "random"), "f");
    });
    function_flags(c);
    c.opt("--deterministic-phase", "random_phase", 'n', "unit coefficients for knapp (sets random_phase)");
  }
  {
    auto& c = add("knapp", "Knapp example: one unimodular frequency per sector", [](Run& r) {
      synth_common(r, "knapp", "knapp");
    });
    lattice_flags(c);
    c.opt("--seed", "seed", 'i', "phase seed");
  }
  {
    auto& c = add("norms", "Lp and square-function norms", cmd_norms);
    function_flags(c);
    c.opt("--p", "p_list", 's', "exponents, e.g. 2,4,6,inf");
  }
  {
    auto& c = add("multiplier", "apply the multiplier m_alpha", cmd_multiplier);
    function_flags(c);
    c.opt("--alpha", "alpha", 'd', "multiplier order");
    c.opt("--inner", "inner", 'd', "cutoff is 1 below this distance");
    c.opt("--outer", "outer", 'd', "cutoff is 0 above this distance");
  }
  {
    auto& c = add("decompose", "wave packet decomposition", cmd_decompose);
    function_flags(c);
    packet_flags(c);
  }
  {
    auto& c = add("localize", "localization relation and check", cmd_localize);
    function_flags(c);
    packet_flags(c);
    c.opt("--lambda", "lambda", 'd', "superlevel (default lambda_frac * sup|f|)");
    c.opt("--lambda-frac", "lambda_frac", 'd', "superlevel as a fraction of sup|f|");
    c.opt("--t", "t", 's', "cube side as a torus fraction, 1/n");
    c.opt("--tubes", "tubes", 'b', "relate through tubes");
  }
  {
    auto& c = add("sharpness", "Knapp sharpness experiment", cmd_sharpness);
    c.opt("--surface", "surface", 's', "surface descriptor JSON");
    c.opt("--p", "p", 'i', "even exponent");
    c.opt("--deltas", "deltas", 's', "scales, e.g. 2^-3..2^-6");
    c.opt("--seeds", "seeds", 'i', "seeds per scale");
    c.opt("--seed", "seed", 'i', "first seed");
    c.opt("--tolerance", "tolerance", 'd', "slope tolerance");
    c.opt("--budget", "budget_bytes", 'd', "memory budget in bytes");
  }
  {
    auto& c = add("exponents", "exponent table", cmd_exponents);
    c.opt("--d", "d", 'i', "surface dimension");
    c.opt("--k", "k", 'i', "flat dimensions");
  }
  for (auto& c : cmds)
    if (c.app->get_name() != "sharpness") c.opt("--budget", "budget_bytes", 'd', "memory budget in bytes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorKind::Input);
  }

  Run run;
  size_t which = 0;
  for (; which < cmds.size(); ++which)
    if (cmds[which].app->parsed()) break;
  run.command = table[which].first;
  if (out_dir.empty()) {
    const char* env = std::getenv("WOLFF_OUT");
    out_dir = env && *env ? env : "wolff_out";
  }
  run.out = out_dir;

  int rc = 0;
  json status;
  try {
    if (!config_path.empty()) {
      run.cfg.raw = read_json(config_path);
      if (!run.cfg.raw.is_object()) throw InputError("config must be a JSON object");
    }
    cmds[which].apply(run.cfg.raw);
    fs::create_directories(run.out);
    table[which].second(run);
    status = {{"status", "ok"}};
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    rc = e.exit_code();
    status = {{"status", "error"}, {"exit_code", rc}, {"message", e.what()}};
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    rc = static_cast<int>(ErrorKind::Input);
    status = {{"status", "error"}, {"exit_code", rc}, {"message", e.what()}};
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    rc = static_cast<int>(ErrorKind::Input);
    status = {{"status", "error"}, {"exit_code", rc}, {"message", e.what()}};
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    rc = static_cast<int>(ErrorKind::Budget);
    status = {{"status", "error"}, {"exit_code", rc}, {"message", "out of memory"}};
  }

  // config echo and constants ledger, written on success and failure alike
  try {
    fs::create_directories(run.out);
    json echo = {{"command", run.command}};
    echo["config"] = run.cfg.used;
    if (!config_path.empty()) echo["config_file"] = config_path;
    write_json((run.out / ("config_" + run.command + ".json")).string(), echo);
    json ledger = {{"command", run.command}};
    ledger["inputs"] = run.cfg.used.contains("constants") ? run.cfg.used["constants"] : json::object();
    ledger["measured"] = run.measured;
    ledger["result"] = status;
    write_json((run.out / ("constants_" + run.command + ".json")).string(), ledger);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot write the run ledger: " << e.what() << "\n";
    if (rc == 0) rc = static_cast<int>(ErrorKind::Input);
  }
  return rc;
}
