#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wolff/io.hpp"

namespace py = pybind11;
using namespace wolff;

namespace {

// pybind11 holders cannot be const, the core only ever sees const pointers
using SurfacePtr = std::shared_ptr<SurfaceModel>;
using CoveringPtr = std::shared_ptr<Covering>;
using LatticePtr = std::shared_ptr<SpectralLattice>;

template <class T>
std::shared_ptr<T> held(std::shared_ptr<const T> p) {
  return std::const_pointer_cast<T>(std::move(p));
}

py::dict fit_dict(const RegressionResult& f) {
  py::dict d;
  d["slope"] = f.slope;
  d["intercept"] = f.intercept;
  d["stderr"] = f.stderr_slope;
  d["theory_slope"] = f.theory_slope;
  d["verdict"] = f.verdict;
  return d;
}

py::object rat(const std::optional<Rational>& r) {
  if (!r) return py::none();
  return py::make_tuple(r->numerator(), r->denominator());
}

py::array_t<double> points_array(const std::vector<Vec>& v, int D) {
  py::array_t<double> a({static_cast<py::ssize_t>(v.size()), static_cast<py::ssize_t>(D)});
  auto m = a.mutable_unchecked<2>();
  for (size_t i = 0; i < v.size(); ++i)
    for (int e = 0; e < D; ++e) m(i, e) = v[i][e];
  return a;
}

std::vector<Vec> rows_of(py::array_t<double, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 2) throw InputError("expected a 2-d array");
  auto m = a.unchecked<2>();
  std::vector<Vec> out(m.shape(0), Vec(m.shape(1)));
  for (py::ssize_t i = 0; i < m.shape(0); ++i)
    for (py::ssize_t e = 0; e < m.shape(1); ++e) out[i][e] = m(i, e);
  return out;
}

}  // namespace

PYBIND11_MODULE(_wolff, m) {
  m.doc() = "sector coverings, wave packets and decoupling experiments";

  auto base = py::register_exception<Error>(m, "WolffError", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<BudgetError>(m, "BudgetError", base.ptr());

  // exponents
  m.def("exponent_table", [](int d, int k) {
    auto t = exponent_table(d, k);
    py::dict r;
    r["d"] = d;
    r["k"] = k;
    r["p1"] = rat(t.p1);
    r["p2"] = rat(t.p2);
    r["p1_applicable"] = t.p1_applicable;
    r["p2_applicable"] = t.p2_applicable;
    r["best_p"] = rat(t.best_p);
    r["r_best_p"] = rat(t.r(t.best_p));
    r["alpha_min_best_p"] = rat(t.alpha_min(t.best_p));
    r["note"] = t.note();
    return r;
  }, py::arg("d"), py::arg("k"), "exact exponents as (numerator, denominator) pairs");
  m.def("sharpness_identity", &sharpness_identity, py::arg("d"), py::arg("k"));
  m.def("scaling_fit", [](const std::vector<int>& js, const std::vector<double>& values, double theory, double tol) {
    ScalingSeries s;
    for (int j : js) s.deltas.emplace_back(j);
    s.values = values;
    return fit_dict(scaling_fit(s, theory, tol));
  }, py::arg("js"), py::arg("values"), py::arg("theory") = 0.0, py::arg("tol") = 0.15);

  // surfaces
  py::class_<SurfaceModel, SurfacePtr>(m, "Surface")
      .def_property_readonly("d", &SurfaceModel::d)
      .def_property_readonly("k", &SurfaceModel::k)
      .def_property_readonly("D", &SurfaceModel::D)
      .def_readonly("name", &SurfaceModel::name)
      .def("point", [](const SurfaceModel& s, const Vec& u) { return Vec(s.point(u)); })
      .def("normal", [](const SurfaceModel& s, const Vec& u) { return Vec(s.normal(u)); })
      .def("distance", [](const SurfaceModel& s, const Vec& x) { return s.distance(x).distance; });
  m.def("surface", [](const std::string& descriptor) -> SurfacePtr {
    return std::make_shared<SurfaceModel>(surface_from_json(json::parse(descriptor)));
  }, py::arg("descriptor"), "surface from a JSON descriptor string");
  m.def("load_surface", [](const std::string& path) { return held(load_surface(path)); }, py::arg("path"));
  m.def("cross_section", [](SurfacePtr s, const Vec& alpha, int directions) {
    auto c = cross_section(*s, alpha, directions);
    py::dict r;
    r["max_normal_defect"] = c.max_normal_defect;
    r["max_fd_normal_defect"] = c.max_fd_normal_defect;
    r["min_second_difference"] = c.min_second_difference;
    r["convex"] = c.convex;
    return r;
  }, py::arg("surface"), py::arg("alpha"), py::arg("directions") = 10000);

  // coverings
  py::class_<Covering, CoveringPtr>(m, "Covering")
      .def_property_readonly("M", &Covering::M)
      .def_property_readonly("delta", [](const Covering& c) { return c.delta.str(); })
      .def("centers", [](const Covering& c) {
        std::vector<Vec> v;
        for (const auto& s : c.sectors) v.push_back(s.center);
        return points_array(v, c.surface->D());
      })
      .def("to_json", [](const Covering& c) { return covering_to_json(c).dump(); });
  m.def("build_covering", [](SurfacePtr s, int j, double C, std::uint64_t seed) -> CoveringPtr {
    CoveringConstants k;
    k.C = C;
    return std::make_shared<Covering>(build_covering(s, Dyadic(j), k, seed));
  }, py::arg("surface"), py::arg("j"), py::arg("C") = 4.0, py::arg("seed") = 0, "covering at delta = 2^-j");
  m.def("verify", [](CoveringPtr fine, CoveringPtr coarse, int samples, std::uint64_t seed) {
    VerifyOptions o;
    o.samples = samples;
    o.seed = seed;
    auto r = verify_assumption_A(*fine, *coarse, o);
    py::dict d;
    d["M_delta"] = r.M_delta;
    d["K"] = r.max_overlap;
    d["K_ang"] = r.K_ang;
    d["ang_violations"] = r.ang_violations;
    d["consistency_violations"] = r.consistency_violations;
    d["coverage_failures"] = r.coverage_failures;
    d["containment_failures"] = r.containment_failures;
    d["mean_volume"] = r.mean_volume;
    d["csv"] = report_csv_header() + report_csv_row(r);
    return d;
  }, py::arg("fine"), py::arg("coarse"), py::arg("samples") = 100000, py::arg("seed") = 7);
  m.def("covering_stats", [](SurfacePtr s, const std::vector<int>& js, int sigma_j) {
    std::vector<Dyadic> ds;
    for (int j : js) ds.emplace_back(j);
    auto st = covering_stats(s, ds, Dyadic(sigma_j));
    py::dict d;
    std::vector<int> M;
    std::vector<double> ratio;
    for (const auto& r : st.rows) {
      M.push_back(r.M);
      ratio.push_back(r.volume_ratio);
    }
    d["M"] = M;
    d["volume_ratio"] = ratio;
    d["fit"] = fit_dict(st.M_fit);
    return d;
  }, py::arg("surface"), py::arg("js"), py::arg("sigma_j") = 2);

  // spectral
  py::class_<SpectralLattice, LatticePtr>(m, "Lattice")
      .def_readonly("N", &SpectralLattice::N)
      .def_readonly("R", &SpectralLattice::R)
      .def_readonly("D", &SpectralLattice::D)
      .def_property_readonly("size", &SpectralLattice::size)
      .def_property_readonly("M", &SpectralLattice::M);
  m.def("build_lattice", [](SurfacePtr s, int j, int nu) -> LatticePtr {
    return build_lattice(std::make_shared<const Covering>(build_covering(s, Dyadic(j))), nu);
  }, py::arg("surface"), py::arg("j"), py::arg("nu") = 4);

  py::class_<GridFunction>(m, "GridFunction")
      .def_property_readonly("size", &GridFunction::size)
      .def_property_readonly("lattice", [](const GridFunction& f) { return held(f.lat); })
      .def("l2sq", &GridFunction::l2sq)
      .def("freqs", [](const GridFunction& f) {
        auto v = f.freqs();
        py::array_t<int> a({static_cast<py::ssize_t>(f.size()), static_cast<py::ssize_t>(f.D())});
        std::copy(v.begin(), v.end(), a.mutable_data());
        return a;
      })
      .def("coefficients", [](const GridFunction& f) {
        return py::array_t<cplx>(f.coef.size(), f.coef.data());
      })
      .def("samples", [](const GridFunction& f, double budget) {
        auto v = f.samples(budget);
        std::vector<py::ssize_t> shape(f.D(), static_cast<py::ssize_t>(f.lat->N));
        py::array_t<cplx> a(shape);
        std::copy(v.begin(), v.end(), a.mutable_data());
        return a;
      }, py::arg("budget_bytes") = 3e9, "values on the N^D torus grid")
      .def("__add__", [](const GridFunction& a, const GridFunction& b) { return a + b; })
      .def("scaled", [](const GridFunction& a, cplx s) { return scaled(a, s); });
  m.def("synth", [](LatticePtr lat, const std::string& kind, std::uint64_t seed, int sigma_j, int sigma_sector,
                    std::vector<int> xi) {
    SynthSpec sp;
    sp.kind = kind;
    sp.seed = seed;
    sp.sigma_j = sigma_j;
    sp.sigma_sector = sigma_sector;
    sp.xi = std::move(xi);
    return synth(lat, sp);
  }, py::arg("lattice"), py::arg("kind") = "random", py::arg("seed") = 1, py::arg("sigma_j") = -1,
        py::arg("sigma_sector") = 0, py::arg("xi") = std::vector<int>{});
  m.def("knapp", [](LatticePtr lat, std::uint64_t seed, bool random_phase) {
    return knapp(lat, random_phase, seed).f;
  }, py::arg("lattice"), py::arg("seed") = 1, py::arg("random_phase") = true);
  m.def("sector_project", &sector_project, py::arg("f"), py::arg("a"));
  m.def("norms", [](const GridFunction& f, const std::vector<double>& p) {
    auto r = norms(f, p);
    py::dict d;
    d["p"] = r.p;
    d["lp"] = r.lp;
    d["lp_delta"] = r.lp_delta;
    d["linf"] = r.linf;
    d["linf_delta"] = r.linf_delta;
    d["l2_coef"] = r.l2_coef;
    d["l2_grid"] = r.l2_grid;
    d["sum_sector_l2sq"] = r.sum_sector_l2sq;
    return d;
  }, py::arg("f"), py::arg("p"));
  m.def("exact_moment", &exact_moment, py::arg("f"), py::arg("p"));
  m.def("apply_multiplier", [](const GridFunction& f, double alpha, double inner, double outer) {
    return apply_multiplier(f, MultiplierSpec{alpha, inner, outer});
  }, py::arg("f"), py::arg("alpha"), py::arg("inner") = 1.0, py::arg("outer") = 2.0);
  m.def("write_grid", [](const std::string& path, const GridFunction& f) { write_grid(path, f); });
  m.def("read_grid", [](LatticePtr lat, const std::string& path) { return grid_to_function(lat, read_grid(path)); });

  // packets
  py::class_<PacketDecomposition>(m, "Decomposition")
      .def_property_readonly("packets", [](const PacketDecomposition& d) { return d.packets.size(); })
      .def_property_readonly("levels", [](const PacketDecomposition& d) {
        std::vector<std::pair<int, double>> v;
        for (const auto& l : d.levels) v.emplace_back(l.level, l.lambda);
        return v;
      })
      .def("level_function", [](const PacketDecomposition& d, size_t i) {
        if (i >= d.levels.size()) throw InputError("level index out of range");
        return d.levels[i].f;
      })
      .def("subfunction", [](const PacketDecomposition& d, const std::vector<int>& ids) { return subfunction(d, ids); })
      .def("diagnostics", [](const PacketDecomposition& d) {
        py::dict r;
        r["reconstruction_error"] = d.reconstruction_error;
        r["C_pkt"] = d.C_pkt;
        r["C_pkt_global"] = d.C_pkt_global;
        r["nfnb_checked"] = d.nfnb_checked;
        r["nfnb_violations"] = d.nfnb_violations;
        r["C_wa"] = d.C_wa;
        r["katr1"] = d.katr1;
        r["plates_total"] = d.plates_total;
        return r;
      })
      .def("write", [](const PacketDecomposition& d, const std::string& dir) { write_decomposition(dir, d, json()); });
  m.def("decompose", [](const GridFunction& f, int refine, double K, int p, double r_eta, int sigma_j,
                        int sigma_sector) {
    PacketOptions o;
    o.refine = refine;
    o.K = K;
    o.p = p;
    o.r_eta = r_eta;
    o.sigma_j = sigma_j;
    o.sigma_sector = sigma_sector;
    return decompose(f, o);
  }, py::arg("f"), py::arg("refine") = 4, py::arg("K") = 2.0, py::arg("p") = 4, py::arg("r_eta") = 0.45,
        py::arg("sigma_j") = -1, py::arg("sigma_sector") = 0);
  m.def("localize", [](const PacketDecomposition& d, double lambda, double t, bool tubes) {
    LocalizeOptions o;
    o.tubes = tubes;
    auto r = localize_check(d, lambda, t, o);
    py::dict out;
    out["localizes"] = r.localizes;
    out["empty"] = r.empty;
    out["W_size"] = r.rel.W_size;
    out["I_b"] = r.rel.I_b;
    out["max_related"] = r.rel.max_related;
    out["C_log"] = r.C_log;
    out["captured"] = r.captured;
    out["relation_csv"] = relation_csv(r.rel);
    return out;
  }, py::arg("decomposition"), py::arg("lam"), py::arg("t"), py::arg("tubes") = false);
  m.def("localization_relation", [](py::array_t<double> centers, py::array_t<double> axes, py::array_t<double> halves,
                                    py::array_t<double> W, int n, bool brute) {
    auto C = rows_of(centers), H = rows_of(halves), X = rows_of(W);
    auto A = axes.cast<py::array_t<double, py::array::c_style | py::array::forcecast>>();
    if (A.ndim() != 3 || A.shape(0) != static_cast<py::ssize_t>(C.size())) throw InputError("axes must be (P, D, D)");
    const int D = static_cast<int>(A.shape(1));
    auto a = A.unchecked<3>();
    std::vector<OrientedBox> plates;
    for (size_t i = 0; i < C.size(); ++i) {
      Mat U(D, D);
      for (int r = 0; r < D; ++r)
        for (int c = 0; c < D; ++c) U(r, c) = a(i, r, c);
      plates.emplace_back(C[i], U, H[i]);
    }
    auto rel = brute ? localization_relation_bruteforce(plates, X, n) : localization_relation(plates, X, n);
    py::dict d;
    d["I_b"] = rel.I_b;
    d["max_related"] = rel.max_related;
    std::vector<int> anchor;
    std::vector<long long> excluded;
    for (const auto& e : rel.entries) {
      anchor.push_back(static_cast<int>(e.anchor));
      excluded.push_back(e.excluded);
    }
    d["anchor"] = anchor;
    d["excluded"] = excluded;
    return d;
  }, py::arg("centers"), py::arg("axes"), py::arg("halves"), py::arg("W"), py::arg("n"), py::arg("brute") = false,
        "plates as boxes (columns of axes are the box axes), W as torus points");

  // experiments
  m.def("sharpness", [](SurfacePtr s, int p, const std::vector<int>& js, int seeds, double tol) {
    SharpnessConfig c;
    c.p = p;
    for (int j : js) c.deltas.emplace_back(j);
    c.seeds = seeds;
    c.tol = tol;
    auto r = sharpness_experiment(s, c);
    py::dict d;
    std::vector<double> ratio;
    for (const auto& row : r.rows) ratio.push_back(row.ratio);
    d["ratio"] = ratio;
    d["fit"] = fit_dict(r.fit);
    d["identity"] = r.identity;
    return d;
  }, py::arg("surface"), py::arg("p"), py::arg("js"), py::arg("seeds") = 10, py::arg("tol") = 0.15);
}
