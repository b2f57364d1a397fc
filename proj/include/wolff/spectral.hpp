#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "wolff/covering.hpp"
#include "wolff/lattice.hpp"

namespace wolff {

// integer frequencies xi with dist(xi, R S) <= 1, R = 1/delta, on the torus grid N = nu R.
// also holds the Shepard cutoffs Xi-hat_a of the delta-covering on those frequencies
struct SpectralLattice {
  std::shared_ptr<const Covering> cov;
  int D = 0;
  Dyadic delta;
  long long R = 0;
  int nu = 4;
  long long N = 0;
  double q = 4.0;       // bump exponent of the cutoffs
  double shrink = 0.9;  // bumps live on shrink * Pi_a

  std::vector<int> freqs;  // flat, D per point, sorted by key
  std::vector<std::uint64_t> keys;
  std::vector<double> dist;  // dist(xi, R S) in lattice units
  std::vector<Vec> foot;     // surface parameter of the nearest point
  int band_points = 0;       // points within distance 1 before dropping
  int dropped = 0;           // band points covered by no bump
  int projection_fallbacks = 0;

  // cutoff weights, CSR by frequency and lists by sector
  std::vector<int> row;
  std::vector<int> col_sector;
  std::vector<double> col_weight;
  std::vector<std::vector<std::pair<int, double>>> members;  // sector -> (point, weight)

  int size() const { return static_cast<int>(keys.size()); }
  int M() const { return static_cast<int>(members.size()); }
  std::uint64_t key(const int* xi) const;
  void unpack(std::uint64_t key, int* xi) const;
  int find(std::uint64_t key) const;  // -1 if absent
  // cutoff Xi-hat_a at any integer frequency (Shepard ratio over all sectors)
  double weight(int a, const int* xi) const;
  // distance to R S in lattice units, warm started from `seed` when given
  double distance(const int* xi, const Vec* seed = nullptr) const;
  // sector box in lattice units
  OrientedBox sector_box(int a, double scale = 1.0) const;
  std::size_t grid_bytes() const;  // one complex N^D grid

 private:
  std::unordered_map<std::uint64_t, int> index_;
  int bits_ = 21;
  friend std::shared_ptr<SpectralLattice> build_lattice(std::shared_ptr<const Covering>, int, double);
};

std::shared_ptr<SpectralLattice> build_lattice(std::shared_ptr<const Covering> cov, int nu = 4, double q = 4.0);

// sparse trigonometric polynomial tied to a lattice; frequencies may leave the mask
struct GridFunction {
  std::shared_ptr<const SpectralLattice> lat;
  std::vector<std::uint64_t> keys;  // sorted, unique
  std::vector<cplx> coef;
  std::string provenance;

  int size() const { return static_cast<int>(keys.size()); }
  int D() const { return lat->D; }
  double l2sq() const;  // Plancherel: sum |c|^2
  std::vector<int> freqs() const;
  // torus samples on the N^D grid, row-major; BudgetError above the byte budget
  std::vector<cplx> samples(double budget_bytes = 3e9) const;
  cplx eval(const Vec& x) const;
  // build from unsorted (key, coef) pairs, summing duplicates
  static GridFunction from_pairs(std::shared_ptr<const SpectralLattice> lat,
                                 std::vector<std::pair<std::uint64_t, cplx>> pairs, std::string prov = "");
};

GridFunction operator+(const GridFunction& a, const GridFunction& b);
GridFunction scaled(const GridFunction& f, cplx s);
// pointwise product with a trigonometric polynomial (spectral convolution)
GridFunction multiply(const GridFunction& f, const TrigPoly& w);
// f_a = Xi_a * f
GridFunction sector_project(const GridFunction& f, int a);

struct SynthSpec {
  std::string kind = "random";  // random | knapp | character | sector
  std::uint64_t seed = 1;
  std::vector<int> sectors;     // restrict random coefficients to these 0.9 Pi_a (empty: all)
  std::vector<int> xi;          // character frequency
  bool random_phase = true;     // knapp
  int sigma_j = -1;             // random restricted to a sigma-sector box (with sigma_sector)
  int sigma_sector = 0;
};

struct KnappResult {
  GridFunction f;
  std::vector<int> sector;  // sector of each term, in key order
  int skipped = 0;          // sectors with no usable frequency
};
KnappResult knapp(std::shared_ptr<const SpectralLattice> lat, bool random_phase, std::uint64_t seed);

GridFunction synth(std::shared_ptr<const SpectralLattice> lat, const SynthSpec& spec);
// mask points inside a box given in surface units (e.g. Pi_{a,sigma})
std::vector<int> mask_in_box(const SpectralLattice& lat, const OrientedBox& surface_box);
GridFunction random_on(std::shared_ptr<const SpectralLattice> lat, const std::vector<int>& points, std::uint64_t seed);

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct NormReport {
  std::vector<double> p;
  std::vector<double> lp;        // ||f||_p on the grid
  std::vector<double> lp_delta;  // (sum_a ||f_a||_p^p)^{1/p}
  double linf = 0.0;
  double linf_delta = 0.0;  // max_a ||f_a||_inf
  double l2_coef = 0.0;     // sqrt(sum |c|^2)
  double l2_grid = 0.0;
  double sum_sector_l2sq = 0.0;  // sum_a ||f_a||_2^2
  int sectors_used = 0;
};
// Riemann sums on the N^D grid; p = kInf allowed
NormReport norms(const GridFunction& f, const std::vector<double>& p, double budget_bytes = 3e9);

// int |f|^p over the torus for even p, exact (sparse powers or a non-aliasing grid)
double exact_moment(const GridFunction& f, int p);
// ||Xi_a||_1 as a Riemann sum on the N^D grid (restricted to mask frequencies)
double cutoff_kernel_l1(const SpectralLattice& lat, int a, double budget_bytes = 3e9);

struct MultiplierSpec {
  double alpha = 0.0;
  double inner = 1.0;  // phi_mult = 1 for dist <= inner
  double outer = 2.0;  // and 0 for dist >= outer
};
double multiplier_symbol(const MultiplierSpec& m, double dist);
GridFunction apply_multiplier(const GridFunction& f, const MultiplierSpec& m);
// max |m(xi)| over the support of f
double multiplier_sup(const GridFunction& f, const MultiplierSpec& m);

struct Localized {
  GridFunction f;
  std::shared_ptr<WindowLattice> window;
  long long cell = 0;
  int outputs_checked = 0;
  int growth_violations = 0;  // output frequencies outside the allowed band or box
  double max_dist = 0.0;      // max dist(xi, R S) over outputs, lattice units
  double support_gauge = 0.0; // r-box: gauge of the psi spectrum in the R box
  double scale_factor = 1.0;  // r-box: window scales used, relative to the R box
  double growth_constant = 0.0;  // cube: max_dist / (rho R); r-box: (max_dist - 1) / (rho R)
};

// r-box outputs must satisfy dist(xi, R S) <= 1 + kRBoxBand * rho R
inline constexpr double kRBoxBand = 4.0;

// f_Q = psi_Q f for the cube grid of side delta/rho (torus units); delta <= rho <= 1
Localized localize_cube(const GridFunction& f, Dyadic rho, long long cell, bool check_growth = true);
// f_R = psi_R f for the R0-shaped windows of a sigma-sector; rho in [delta, sigma]
Localized localize_rbox(const GridFunction& f, const Sector& sigma_sector, double rho, long long cell,
                        double Cpp = 16.0, bool check_growth = true);

}  // namespace wolff
