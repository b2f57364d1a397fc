#include "wolff/io.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "wolff/error.hpp"

namespace wolff {

namespace fs = std::filesystem;

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------- json helpers

json vec_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec json_vec(const json& j) {
  if (!j.is_array()) throw InputError("expected a numeric array");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError("expected a numeric array");
    v[i] = j[i].get<double>();
  }
  return v;
}

namespace {

Mat json_mat(const json& j) {
  if (!j.is_array() || j.empty()) throw InputError("expected a matrix as a list of rows");
  const size_t r = j.size(), c = j[0].size();
  Mat m(r, c);
  for (size_t i = 0; i < r; ++i) {
    if (!j[i].is_array() || j[i].size() != c) throw InputError("ragged matrix rows");
    for (size_t k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

json mat_rows(const Mat& m) {
  json a = json::array();
  for (int i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
  return a;
}

template <class T>
T get_or(const json& j, const char* key, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError(std::string("bad value for '") + key + "'");
  }
}

ConvexBody body_from_json(const json& j, int label) {
  std::vector<PerturbationTerm> terms;
  if (j.contains("terms"))
    for (const auto& t : j["terms"]) {
      PerturbationTerm p;
      p.amplitude = t.at("amplitude").get<double>();
      p.wave = json_vec(t.at("wave"));
      p.phase = get_or(t, "phase", 0.0);
      terms.push_back(p);
    }
  Vec c = j.contains("center") ? json_vec(j["center"]) : Vec();
  return ConvexBody(json_mat(j.at("shape")), terms, label, c);
}

Mat random_spd(int m, std::mt19937_64& rng, double lo, double hi) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> U(lo, hi);
  Mat G(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) G(i, j) = g(rng);
  Eigen::HouseholderQR<Mat> qr(G);
  Mat Q = qr.householderQ();
  Vec ev(m);
  for (int i = 0; i < m; ++i) ev[i] = U(rng);
  return Q * ev.asDiagonal() * Q.transpose();
}

}  // namespace

SurfaceModel random_ellipse_kcone(std::uint64_t seed, int D) {
  if (D < 3) throw ConfigError("ellipse k-cone needs D >= 3");
  std::mt19937_64 rng(seed);
  const int m = D - 1;
  KConeData kc;
  kc.l0_basis = Mat::Zero(D, m);
  for (int i = 0; i < m; ++i) kc.l0_basis(i, i) = 1;
  Vec top = Vec::Zero(D);
  top[D - 1] = 1;
  kc.offsets = {Vec::Zero(D), top};
  Mat A0 = random_spd(m, rng, 0.7, 1.3);
  Mat A1 = random_spd(m, rng, 1.4, 2.2);
  kc.generators = {ConvexBody(A0, {}, 0), ConvexBody(A1, {}, 1)};
  auto s = SurfaceModel::kcone(kc);
  s.name = "random_ellipse_kcone_" + std::to_string(seed);
  return s;
}

SurfaceModel surface_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) throw InputError("surface descriptor needs a 'kind'");
  const std::string kind = j["kind"].get<std::string>();
  const double c0 = get_or(j, "c0", 1e-3);
  SurfaceModel s;
  if (kind == "paraboloid") {
    s = SurfaceModel::paraboloid(get_or(j, "d", 2), get_or(j, "domain_radius", 1.0));
  } else if (kind == "quadratic") {
    GraphData g;
    g.hessian = json_mat(j.at("hessian"));
    g.domain_radius = get_or(j, "domain_radius", 1.0);
    s = SurfaceModel::graph(g, c0);
    s.name = "quadratic";
  } else if (kind == "sphere") {
    GraphData g;
    g.kind = GraphKind::Sphere;
    g.dim = get_or(j, "d", 2);
    g.sphere_radius = get_or(j, "radius", 2.0);
    g.domain_radius = get_or(j, "domain_radius", 1.0);
    s = SurfaceModel::graph(g, c0);
    s.name = "sphere";
  } else if (kind == "circular_cone") {
    s = SurfaceModel::circular_cone(get_or(j, "c1", 1.0), get_or(j, "c2", 2.0));
  } else if (kind == "conical") {
    ConicalData c;
    c.x_basis = json_mat(j.at("x_basis"));
    c.x_offset = json_vec(j.at("x_offset"));
    c.c1 = get_or(j, "c1", 1.0);
    c.c2 = get_or(j, "c2", 2.0);
    if (j.contains("body")) {
      c.body_base = true;
      c.body = std::make_shared<ConvexBody>(body_from_json(j["body"], 0));
    } else {
      c.body_base = false;
      c.base_hessian = json_mat(j.at("base_hessian"));
      c.base_radius = get_or(j, "base_radius", 1.0);
    }
    s = SurfaceModel::conical(c, c0);
    s.name = "conical";
  } else if (kind == "cone_kcone") {
    s = SurfaceModel::cone_kcone(get_or(j, "r0", 1.0), get_or(j, "r1", 2.0));
  } else if (kind == "cylinder") {
    s = SurfaceModel::cylinder_kcone();
  } else if (kind == "kcone") {
    KConeData k;
    k.l0_basis = json_mat(j.at("l0_basis"));
    for (const auto& o : j.at("offsets")) k.offsets.push_back(json_vec(o));
    int label = 0;
    for (const auto& g : j.at("generators")) k.generators.push_back(body_from_json(g, label++));
    s = SurfaceModel::kcone(k, c0);
    s.name = "kcone";
  } else if (kind == "random_ellipse_kcone") {
    s = random_ellipse_kcone(get_or(j, "seed", std::uint64_t(1)), get_or(j, "D", 3));
  } else {
    throw InputError("unknown surface kind '" + kind + "'");
  }
  if (j.contains("name")) s.name = j["name"].get<std::string>();
  return s;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json read_json(const std::string& path) {
  std::string s = read_text(path);
  try {
    return json::parse(s);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed JSON in '" + path + "': " + e.what());
  }
}

std::shared_ptr<const SurfaceModel> load_surface(const std::string& path) {
  try {
    return std::make_shared<const SurfaceModel>(surface_from_json(read_json(path)));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("bad surface descriptor '" + path + "': " + e.what());
  }
}

void write_text(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------- coverings

json covering_to_json(const Covering& cov, const std::vector<Plate>* plates, const TubeFamily* tubes) {
  json j;
  j["surface_ref"] = cov.surface_ref;
  j["delta"] = cov.delta.str();
  j["constants"] = {{"C", cov.constants.C},
                    {"c", cov.constants.c},
                    {"Cpp", cov.constants.Cpp},
                    {"K_ang_bound", cov.constants.K_ang_bound}};
  j["d"] = cov.surface ? cov.surface->d() : 0;
  j["k"] = cov.surface ? cov.surface->k() : 0;
  json secs = json::array();
  for (const auto& s : cov.sectors) {
    json e;
    e["id"] = s.id;
    e["center"] = vec_json(s.center);
    e["frame"] = mat_rows(s.frame.axes().transpose());  // rows: normal, mid..., flat...
    e["sidelengths"] = vec_json(s.sidelengths());
    e["param"] = vec_json(s.param);
    secs.push_back(e);
  }
  j["sectors"] = secs;
  auto box_json = [](const OrientedBox& b) {
    return json{{"center", vec_json(b.center)}, {"axes", mat_rows(b.axes.transpose())}, {"half", vec_json(b.half)}};
  };
  if (plates) {
    json a = json::array();
    for (size_t i = 0; i < plates->size(); ++i) {
      json e = box_json((*plates)[i].box);
      e["id"] = i;
      e["owner"] = (*plates)[i].owner;
      e["b"] = (*plates)[i].b;
      a.push_back(e);
    }
    j["plates"] = a;
  }
  if (tubes) {
    json a = json::array();
    for (size_t i = 0; i < tubes->tubes.size(); ++i) {
      json e = box_json(tubes->tubes[i].box);
      e["id"] = i;
      e["plate"] = tubes->tubes[i].plate;
      e["owner"] = tubes->tubes[i].owner;
      a.push_back(e);
    }
    j["tubes"] = a;
    j["tube_assignment"] = tubes->assignment;
    j["tube_fallbacks"] = tubes->fallbacks;
    j["K_dir"] = tubes->K_dir;
  }
  return j;
}

Covering covering_from_json(const json& j, std::shared_ptr<const SurfaceModel> surface) {
  try {
    Covering cov;
    cov.surface = surface;
    cov.surface_ref = j.at("surface_ref").get<std::string>();
    cov.delta = Dyadic::parse(j.at("delta").get<std::string>());
    const auto& c = j.at("constants");
    cov.constants.C = c.at("C").get<double>();
    cov.constants.c = c.at("c").get<double>();
    cov.constants.Cpp = c.at("Cpp").get<double>();
    cov.constants.K_ang_bound = c.at("K_ang_bound").get<int>();
    const int d = surface->d(), k = surface->k(), D = d + 1;
    if (j.contains("d") && (j["d"].get<int>() != d || j["k"].get<int>() != k))
      throw InputError("covering was built for a different surface dimension");
    for (const auto& e : j.at("sectors")) {
      Sector s;
      s.id = e.at("id").get<int>();
      s.center = json_vec(e.at("center"));
      Mat rows = json_mat(e.at("frame"));
      if (rows.rows() != D || rows.cols() != D || s.center.size() != D) throw InputError("sector frame has wrong size");
      s.frame.point = s.center;
      s.frame.normal = rows.row(0).transpose();
      s.frame.mid = rows.block(1, 0, d - k, D).transpose();
      s.frame.flat = rows.block(1 + d - k, 0, k, D).transpose();
      s.param = e.contains("param") ? json_vec(e["param"]) : Vec();
      s.delta = cov.delta;
      s.C = cov.constants.C;
      s.d = d;
      s.k = k;
      cov.sectors.push_back(s);
      cov.net.points.push_back(s.center);
    }
    return cov;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed covering JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------- CSV

std::string report_csv_header() { return "delta,M_delta,K,ang_violations,consistency_violations,mean_volume\n"; }

std::string report_csv_row(const CoveringReport& r) {
  std::ostringstream os;
  os << r.delta.str() << ',' << r.M_delta << ',' << r.max_overlap << ',' << r.ang_violations << ','
     << r.consistency_violations << ',' << fmt_double(r.mean_volume) << '\n';
  return os.str();
}

std::string experiment_csv(const std::vector<Dyadic>& deltas, const std::vector<double>& values,
                           const RegressionResult& fit) {
  std::ostringstream os;
  os << "delta,value,fit_slope,stderr,theory_slope,verdict\n";
  for (size_t i = 0; i < deltas.size(); ++i)
    os << deltas[i].str() << ',' << fmt_double(values[i]) << ',' << fmt_double(fit.slope) << ','
       << fmt_double(fit.stderr_slope) << ',' << fmt_double(fit.theory_slope) << ','
       << (fit.verdict ? "pass" : "fail") << '\n';
  return os.str();
}

std::string relation_csv(const LocalizationRelation& rel) {
  std::ostringstream os;
  os << "plate_id,anchor_cube,related_cubes,excluded_mass\n";
  for (const auto& e : rel.entries) os << e.plate << ',' << e.anchor << ',' << e.related << ',' << e.excluded << '\n';
  return os.str();
}

// ---------------------------------------------------------------- grid binary

namespace {

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& s, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& s, size_t& pos) {
  if (pos + 4 > s.size()) throw InputError("truncated grid file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(s[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

double get_f64(const std::string& s, size_t& pos) {
  if (pos + 8 > s.size()) throw InputError("truncated grid file");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= std::uint64_t(static_cast<unsigned char>(s[pos + i])) << (8 * i);
  pos += 8;
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace

// lattice grid size, doubled until no frequency of f aliases
long long grid_size_for(const GridFunction& f) {
  const auto& L = *f.lat;
  int m = 0;
  std::vector<int> xi(L.D);
  for (auto k : f.keys) {
    L.unpack(k, xi.data());
    for (int v : xi) m = std::max(m, std::abs(v));
  }
  long long N = L.N;
  while (2 * m >= N) N *= 2;
  return N;
}

std::vector<cplx> samples_at(const GridFunction& f, long long N, double budget_bytes) {
  const auto& L = *f.lat;
  const double count = std::pow(double(N), L.D);
  if (count * 16.0 * 2 > budget_bytes) throw BudgetError("grid of " + std::to_string(N) + "^D exceeds the memory budget");
  std::vector<cplx> a(static_cast<size_t>(count), cplx(0, 0));
  std::vector<int> xi(L.D);
  for (int t = 0; t < f.size(); ++t) {
    L.unpack(f.keys[t], xi.data());
    long long idx = 0;
    for (int e = 0; e < L.D; ++e) idx = idx * N + ((xi[e] % N) + N) % N;
    a[idx] += f.coef[t];
  }
  std::vector<int> dims(L.D, static_cast<int>(N));
  auto* buf = reinterpret_cast<fftw_complex*>(a.data());
  fftw_plan p = fftw_plan_dft(L.D, dims.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_execute(p);
  fftw_destroy_plan(p);
  return a;
}

void write_grid(const std::string& path, const GridFunction& f, double budget_bytes) {
  const auto& L = *f.lat;
  const long long N = grid_size_for(f);
  auto samples = samples_at(f, N, budget_bytes);
  std::string s = "WLF1";
  s.reserve(16 + samples.size() * 16 + f.size() * 4 * L.D);
  put_u32(s, L.D);
  put_u32(s, static_cast<std::uint32_t>(N));
  put_u32(s, kGridHasMask);
  for (const auto& v : samples) {
    put_f64(s, v.real());
    put_f64(s, v.imag());
  }
  std::vector<std::vector<int>> mask;
  std::vector<int> xi(L.D);
  for (auto k : f.keys) {
    L.unpack(k, xi.data());
    mask.push_back(xi);
  }
  std::sort(mask.begin(), mask.end());
  for (const auto& m : mask)
    for (int v : m) put_u32(s, static_cast<std::uint32_t>(v));
  write_text(path, s);
}

GridFile read_grid(const std::string& path) {
  std::string s = read_text(path);
  if (s.size() < 16 || s.compare(0, 4, "WLF1") != 0) throw InputError("not a WLF1 grid file: '" + path + "'");
  size_t pos = 4;
  GridFile g;
  g.D = get_u32(s, pos);
  g.N = get_u32(s, pos);
  g.flags = get_u32(s, pos);
  if (g.D < 1 || g.D > 8 || g.N < 1) throw InputError("grid header out of range");
  double count = std::pow(double(g.N), g.D);
  if (count * 16 > double(s.size())) throw InputError("truncated grid file");
  const size_t n = static_cast<size_t>(count);
  g.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    double re = get_f64(s, pos);
    double im = get_f64(s, pos);
    g.samples[i] = cplx(re, im);
  }
  const size_t rest = s.size() - pos;
  if (g.flags & kGridHasMask) {
    if (rest % (4 * g.D)) throw InputError("grid mask section has a partial tuple");
    g.mask.resize(rest / 4);
    for (auto& v : g.mask) v = static_cast<std::int32_t>(get_u32(s, pos));
  } else if (rest) {
    throw InputError("trailing bytes after grid samples");
  }
  return g;
}

GridFunction grid_to_function(std::shared_ptr<const SpectralLattice> lat, const GridFile& g, double* off_mask_energy) {
  const auto& L = *lat;
  if (int(g.D) != L.D || (long long)g.N < L.N) throw InputError("grid size does not match the lattice");
  const long long N = g.N;
  if (!(g.flags & kGridHasMask)) throw InputError("grid file carries no spectral mask");
  std::vector<cplx> a = g.samples;
  std::vector<int> dims(L.D, static_cast<int>(N));
  auto* buf = reinterpret_cast<fftw_complex*>(a.data());
  fftw_plan p = fftw_plan_dft(L.D, dims.data(), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_execute(p);
  fftw_destroy_plan(p);
  const double scale = 1.0 / double(a.size());
  double total = 0;
  for (auto& v : a) {
    v *= scale;
    total += std::norm(v);
  }
  std::vector<std::pair<std::uint64_t, cplx>> pairs;
  double on = 0;
  const size_t m = g.mask.size() / L.D;
  for (size_t t = 0; t < m; ++t) {
    const int* xi = &g.mask[t * L.D];
    long long idx = 0;
    for (int e = 0; e < L.D; ++e) idx = idx * N + ((xi[e] % N) + N) % N;
    pairs.emplace_back(L.key(xi), a[idx]);
    on += std::norm(a[idx]);
  }
  if (off_mask_energy) *off_mask_energy = std::max(0.0, total - on);
  return GridFunction::from_pairs(lat, std::move(pairs), "grid");
}

// ---------------------------------------------------------------- decompositions

void write_decomposition(const std::string& dir, const PacketDecomposition& dec, const json& extra, double budget_bytes) {
  fs::create_directories(dir);
  const auto& L = *dec.f.lat;
  json m;
  m["format"] = "wolff-decomposition-1";
  m["surface_ref"] = L.cov->surface_ref;
  m["delta"] = L.delta.str();
  m["D"] = L.D;
  m["N"] = L.N;
  m["options"] = {{"refine", dec.opt.refine}, {"K", dec.opt.K},       {"cutoff", dec.opt.cutoff},
                  {"p", dec.opt.p},           {"r_eta", dec.opt.r_eta}, {"window_scale", dec.opt.window_scale}};
  m["diagnostics"] = {{"plates_total", dec.plates_total},
                      {"plates_dropped", dec.plates_dropped},
                      {"packets", dec.packets.size()},
                      {"reconstruction_error", dec.reconstruction_error},
                      {"C_pkt", dec.C_pkt},
                      {"C_pkt_global", dec.C_pkt_global},
                      {"nfnb_checked", dec.nfnb_checked},
                      {"nfnb_violations", dec.nfnb_violations},
                      {"wa1_lhs", dec.wa1_lhs},
                      {"wa1_rhs", dec.wa1_rhs},
                      {"C_wa", dec.C_wa},
                      {"linf_delta", dec.linf_delta},
                      {"katr1", dec.katr1}};
  json levels = json::array();
  for (const auto& lv : dec.levels) {
    std::string file = "level_" + std::to_string(lv.level) + ".wlf";
    write_grid((fs::path(dir) / file).string(), lv.f, budget_bytes);
    levels.push_back({{"level", lv.level}, {"lambda", lv.lambda}, {"packets", lv.packets.size()}, {"file", file}});
  }
  m["levels"] = levels;
  json pk = json::array();
  for (const auto& p : dec.packets)
    pk.push_back({{"id", p.id},
                  {"sector", p.sector},
                  {"cell", p.cell},
                  {"level", p.level},
                  {"lambda", p.lambda},
                  {"sup", p.sup},
                  {"volume", p.volume},
                  {"center", vec_json(p.plate.box.center)}});
  m["packets"] = pk;
  if (!extra.is_null()) m["extra"] = extra;
  write_json((fs::path(dir) / "manifest.json").string(), m);
}

}  // namespace wolff
