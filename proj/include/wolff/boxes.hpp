#pragma once

#include <memory>
#include <vector>

#include "wolff/box.hpp"
#include "wolff/covering.hpp"

namespace wolff {

// axis-reciprocal dual: same center and axes, half-lengths inverted
OrientedBox dual_box(const OrientedBox& b);

struct Plate {
  OrientedBox box;
  int owner = 0;       // sector id
  std::vector<int> b;  // lattice index in the owner's plate lattice
};

// plate shape for a sector; torus units dilate the sector by 1/delta before dualizing,
// which gives full dims (1, delta^1/2, delta) for C = 4
OrientedBox plate_shape(const Sector& s, bool torus_units = true);

// lattice translates of the plate shape (cells [b, b+1] * full side, origin 0) meeting
// the interior of `region`
std::vector<Plate> plate_tiling(const Sector& s, const OrientedBox& region, bool torus_units = true);

struct Tube {
  OrientedBox box;
  int plate = 0;  // index of the generating plate in the input list
  int owner = 0;
};

struct TubeFamily {
  Dyadic sigma, delta;
  double C = 4.0;
  std::vector<Tube> tubes;
  std::vector<int> assignment;  // plate -> tube
  int fallbacks = 0;            // plates placed in the discarding tube instead of a 2C-containing one
  int K_dir = 0;                // max distinct owner sectors per tube
  std::vector<int> discarded;   // plates whose tube was not kept
};

// extend the k flat (length-1) plate sides by (sigma/delta)^1/2
OrientedBox extend_plate(const Plate& p, const Dyadic& sigma, const Dyadic& delta, int k);

TubeFamily build_tubes(const std::vector<Plate>& plates, const std::vector<Sector>& sectors, Dyadic sigma,
                       Dyadic delta, double C = 4.0);

struct RBox {
  OrientedBox R;   // frequency box, half-lengths (rho, rho sigma^-1/2, rho sigma^-1) * dilation
  OrientedBox R0;  // dual_box(R)
};

// boxes centered at the origin in the frame of a sigma-sector; dilation = 1/delta gives torus units
RBox r_box(const Sector& sigma_sector, double rho, double dilation = 1.0);

enum class WindowKind { Phi, Psi };

struct RadialTable;

struct WindowSpec {
  WindowKind kind = WindowKind::Phi;
  int D = 3;
  double K = 0.0;       // phi decay exponent
  double r_eta = 0.2;   // psi: spectral radius of eta-hat
  std::shared_ptr<const RadialTable> table;

  static WindowSpec phi(int D, double K = 0.0);  // K = 0 means 10(D+1)
  static WindowSpec psi(int D, double r_eta = 0.2);

  // eta-hat profile normalized so that ||eta||_2 = 1
  double eta_hat(double rho) const;
  double eta(double x) const;
  double phi_value(double x2) const;  // phi at |x|^2 = x2
};

// phi_R or psi_R at x, with u_R the affine map from [-1/2,1/2]^D onto the box
double window_eval(const WindowSpec& spec, const OrientedBox& box, const Vec& x);

// smooth bump exp(q (1 - 1/(1 - t^2))) on |t| < 1
double bump(double t, double q = 1.0);

}  // namespace wolff
