#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "wolff/boxes.hpp"
#include "wolff/covering.hpp"
#include "wolff/experiments.hpp"
#include "wolff/packets.hpp"
#include "wolff/spectral.hpp"

namespace wolff {

using json = nlohmann::ordered_json;

// surface descriptor: {"kind": ..., parameters..., "name"?: ..., "c0"?: ...}
SurfaceModel surface_from_json(const json& j);
std::shared_ptr<const SurfaceModel> load_surface(const std::string& path);
// random 1-cone over two ellipses (SPD support shapes)
SurfaceModel random_ellipse_kcone(std::uint64_t seed, int D = 3);

json read_json(const std::string& path);
void write_text(const std::string& path, const std::string& content);
void write_json(const std::string& path, const json& j);
std::string read_text(const std::string& path);

json vec_json(const Vec& v);
Vec json_vec(const json& j);

json covering_to_json(const Covering& cov, const std::vector<Plate>* plates = nullptr,
                      const TubeFamily* tubes = nullptr);
// sectors restored verbatim; the net holds the sector centers
Covering covering_from_json(const json& j, std::shared_ptr<const SurfaceModel> surface);

// report CSV: delta,M_delta,K,ang_violations,consistency_violations,mean_volume
std::string report_csv_header();
std::string report_csv_row(const CoveringReport& r);

// experiment CSV: delta,value,fit_slope,stderr,theory_slope,verdict
std::string experiment_csv(const std::vector<Dyadic>& deltas, const std::vector<double>& values,
                           const RegressionResult& fit);

// relation CSV: plate_id,anchor_cube,related_cubes,excluded_mass
std::string relation_csv(const LocalizationRelation& rel);

// "WLF1" grid binary
struct GridFile {
  std::uint32_t D = 0;
  std::uint32_t N = 0;
  std::uint32_t flags = 0;  // bit 0: mask present
  std::vector<cplx> samples;
  std::vector<int> mask;    // flat, D per frequency, sorted lexicographically
};
inline constexpr std::uint32_t kGridHasMask = 1;

// grid size is the lattice N, doubled until the spectrum of f does not alias
void write_grid(const std::string& path, const GridFunction& f, double budget_bytes = 3e9);
GridFile read_grid(const std::string& path);
// coefficients recovered by the forward transform at the mask frequencies
GridFunction grid_to_function(std::shared_ptr<const SpectralLattice> lat, const GridFile& g,
                              double* off_mask_energy = nullptr);

// manifest.json plus level_<k>.wlf per level
void write_decomposition(const std::string& dir, const PacketDecomposition& dec, const json& extra,
                         double budget_bytes = 3e9);

std::string fmt_double(double v);

}  // namespace wolff
