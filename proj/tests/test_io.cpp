#include <cstring>
#include <filesystem>

#include "doctest.h"
#include "wolff/error.hpp"
#include "wolff/io.hpp"

using namespace wolff;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("wolff_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::shared_ptr<const SpectralLattice> small_lattice() {
  static std::shared_ptr<const SpectralLattice> lat = [] {
    auto S = std::make_shared<const SurfaceModel>(SurfaceModel::circular_cone(1.0, 1.5));
    return build_lattice(std::make_shared<const Covering>(build_covering(S, Dyadic(3))));
  }();
  return lat;
}

}  // namespace

TEST_CASE("surface descriptors") {
  auto s = surface_from_json(json::parse(R"({"kind": "circular_cone", "c1": 1, "c2": 1.5})"));
  CHECK(s.d() == 2);
  CHECK(s.k() == 1);
  auto p = surface_from_json(json::parse(R"({"kind": "paraboloid", "d": 3, "name": "P3"})"));
  CHECK(p.d() == 3);
  CHECK(p.k() == 0);
  CHECK(p.name == "P3");
  auto q = surface_from_json(json::parse(R"({"kind": "quadratic", "hessian": [[2, 0], [0, 1]]})"));
  CHECK(q.d() == 2);
  auto e = surface_from_json(json::parse(R"({"kind": "random_ellipse_kcone", "seed": 8})"));
  CHECK(e.k() == 1);
  auto kc = surface_from_json(json::parse(R"({
    "kind": "kcone",
    "l0_basis": [[1, 0], [0, 1], [0, 0]],
    "offsets": [[0, 0, 0], [0, 0, 1]],
    "generators": [{"shape": [[1, 0], [0, 1]]}, {"shape": [[2, 0], [0, 2]]}]})"));
  CHECK(kc.d() == 2);
  CHECK(kc.k() == 1);
  // same generators as the built-in cone k-cone
  auto ref = SurfaceModel::cone_kcone(1.0, 2.0);
  Vec u = Vec::Zero(kc.param_dim());
  u[0] = 0.3;
  u[kc.param_dim() - 1] = 0.4;
  CHECK((kc.point(u) - ref.point(u)).norm() < 1e-12);

  CHECK_THROWS_AS(surface_from_json(json::parse(R"({"kind": "torus"})")), InputError);
  CHECK_THROWS_AS(surface_from_json(json::parse(R"({"c1": 1})")), InputError);
  CHECK_THROWS_AS(surface_from_json(json::parse(R"({"kind": "quadratic", "hessian": [[1, 0], [0]]})")), InputError);
  CHECK_THROWS_AS(surface_from_json(json::parse(R"({"kind": "quadratic", "hessian": [[1, 0], [0, 0]]})")),
                  ConfigError);
}

TEST_CASE("malformed files are input errors") {
  auto dir = scratch("bad");
  write_text((dir / "x.json").string(), "{ not json");
  CHECK_THROWS_AS(read_json((dir / "x.json").string()), InputError);
  CHECK_THROWS_AS(read_json((dir / "missing.json").string()), InputError);
  write_text((dir / "g.wlf").string(), "WLF2xxxxxxxxxxxxxxxx");
  CHECK_THROWS_AS(read_grid((dir / "g.wlf").string()), InputError);
}

TEST_CASE("covering JSON round trip") {
  auto S = std::make_shared<const SurfaceModel>(SurfaceModel::circular_cone(1.0, 2.0));
  Covering cov = build_covering(S, Dyadic(5));
  json j = covering_to_json(cov);
  CHECK(j["delta"] == "2^-5");
  CHECK(j["sectors"].size() == cov.sectors.size());
  CHECK(j["sectors"][0]["frame"].size() == 3);
  // text round trip, then structural equality
  Covering back = covering_from_json(json::parse(j.dump()), S);
  REQUIRE(back.M() == cov.M());
  for (int a = 0; a < cov.M(); ++a) {
    OrientedBox b0 = cov.sectors[a].box(), b1 = back.sectors[a].box();
    CHECK((b0.center - b1.center).norm() < 1e-15);
    CHECK((b0.axes - b1.axes).norm() < 1e-15);
    CHECK((b0.half - b1.half).norm() < 1e-15);
  }
  Covering coarse = build_covering(S, Dyadic(3));
  VerifyOptions vo;
  vo.samples = 2000;
  vo.containment_samples = 500;
  auto r0 = verify_assumption_A(cov, coarse, vo);
  auto r1 = verify_assumption_A(back, coarse, vo);
  CHECK(r0.max_overlap == r1.max_overlap);
  CHECK(r0.K_ang == r1.K_ang);
  CHECK(r0.consistency_violations == r1.consistency_violations);
  CHECK(report_csv_row(r0) == report_csv_row(r1));
  CHECK(report_csv_header() == "delta,M_delta,K,ang_violations,consistency_violations,mean_volume\n");

  std::vector<Plate> plates = plate_tiling(cov.sectors[0], OrientedBox(Vec::Constant(3, 0.5), Mat::Identity(3, 3), Vec::Constant(3, 0.5)));
  json jp = covering_to_json(cov, &plates);
  CHECK(jp["plates"].size() == plates.size());
}

TEST_CASE("grid binary layout and round trip") {
  auto lat = small_lattice();
  SynthSpec sp;
  sp.seed = 5;
  GridFunction f = synth(lat, sp);
  auto dir = scratch("grid");
  std::string path = (dir / "f.wlf").string();
  write_grid(path, f);
  std::string bytes = read_text(path);
  const size_t n = static_cast<size_t>(std::pow(lat->N, 3));
  CHECK(bytes.substr(0, 4) == "WLF1");
  CHECK(bytes.size() == 16 + 16 * n + 12 * f.size());
  std::uint32_t hdr[3];
  std::memcpy(hdr, bytes.data() + 4, 12);  // little-endian host
  CHECK(hdr[0] == 3);
  CHECK(hdr[1] == lat->N);
  CHECK(hdr[2] == kGridHasMask);

  GridFile g = read_grid(path);
  CHECK(g.mask.size() == 3 * static_cast<size_t>(f.size()));
  bool sorted = true;
  for (size_t t = 1; t < g.mask.size() / 3; ++t)
    sorted &= std::lexicographical_compare(&g.mask[3 * (t - 1)], &g.mask[3 * t], &g.mask[3 * t], &g.mask[3 * t + 3]);
  CHECK(sorted);
  double off = 1;
  GridFunction h = grid_to_function(lat, g, &off);
  CHECK(off < 1e-12 * f.l2sq());
  GridFunction d = h + scaled(f, -1.0);
  CHECK(std::sqrt(d.l2sq() / f.l2sq()) < 1e-12);

  // deterministic bytes
  write_grid((dir / "f2.wlf").string(), f);
  CHECK(read_text((dir / "f2.wlf").string()) == bytes);
}

TEST_CASE("csv writers") {
  LocalizationRelation rel;
  rel.entries = {{0, 5, 121, 3}, {1, -1, 0, 0}};
  CHECK(relation_csv(rel) == "plate_id,anchor_cube,related_cubes,excluded_mass\n0,5,121,3\n1,-1,0,0\n");
  RegressionResult fit;
  fit.slope = 0.5;
  fit.stderr_slope = 0.01;
  fit.theory_slope = 0.5;
  fit.verdict = true;
  std::string csv = experiment_csv({Dyadic(3), Dyadic(4)}, {1.0, 1.5}, fit);
  CHECK(csv == "delta,value,fit_slope,stderr,theory_slope,verdict\n2^-3,1,0.5,0.01,0.5,pass\n2^-4,1.5,0.5,0.01,0.5,pass\n");
  CHECK(fmt_double(0.1) == "0.1");
  CHECK(fmt_double(kInf) == "inf");
}

TEST_CASE("decomposition directory") {
  auto lat = small_lattice();
  SynthSpec sp;
  sp.seed = 9;
  GridFunction f = synth(lat, sp);
  auto dec = decompose(f);
  auto dir = scratch("dec");
  write_decomposition(dir.string(), dec, json{{"seed", 9}});
  json m = read_json((dir / "manifest.json").string());
  CHECK(m["levels"].size() == dec.levels.size());
  CHECK(m["packets"].size() == dec.packets.size());
  CHECK(m["extra"]["seed"] == 9);
  GridFunction sum;
  sum.lat = lat;
  for (const auto& lv : m["levels"]) {
    GridFile g = read_grid((dir / lv["file"].get<std::string>()).string());
    sum = sum + scaled(grid_to_function(lat, g), lv["lambda"].get<double>());
  }
  GridFunction d = sum + scaled(f, -1.0);
  CHECK(std::sqrt(d.l2sq() / f.l2sq()) < 1e-10);
}
