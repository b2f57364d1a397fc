#pragma once

#include <memory>
#include <vector>

#include "wolff/boxes.hpp"
#include "wolff/spectral.hpp"

namespace wolff {

struct PacketOptions {
  int refine = 4;         // sample lattice = refine-fold refinement of the window lattice
  double K = 2.0;         // envelope phi_pi = (1 + |u^-1 x|^2)^{-K/2}
  double cutoff = 1e-12;  // plates with sup |eta_b f_a| below cutoff * max are dropped
  int p = 4;              // exponent for (wa1)
  double r_eta = 0.45;
  double window_scale = 0.5;  // window frequency extents as a fraction of the sector half-lengths
  int sigma_j = -1;       // declared sector family S^sigma_delta(a); -1 skips the check
  int sigma_sector = 0;
};

struct Packet {
  int id = 0;
  int sector = 0;
  long long cell = 0;  // window lattice cell
  Plate plate;         // nominal plate box around the window center (torus units)
  int level = 0;       // lambda = 2^level
  double lambda = 0.0;
  double sup = 0.0;    // sup |eta_b f_a| on the sample lattice
  double volume = 0.0; // |pi| = window cell volume
};

struct PacketLevel {
  int level = 0;
  double lambda = 0.0;
  std::vector<int> packets;
  GridFunction f;  // f_lambda = lambda^-1 sum_{b in P_lambda} psi_b f_a
};

struct SectorPieces {
  int sector = 0;
  std::shared_ptr<WindowLattice> window;
  GridFunction fa;
  double sup_fa = 0.0;  // on the sample lattice
};

struct PacketDecomposition {
  GridFunction f;
  PacketOptions opt;
  std::vector<SectorPieces> pieces;
  std::vector<Packet> packets;
  std::vector<PacketLevel> levels;

  int plates_total = 0;
  int plates_dropped = 0;
  double reconstruction_error = 0.0;  // ||f - sum lambda f_lambda||_2 / ||f||_2
  double C_pkt = 0.0;                 // max |f_b| / phi_pi over kept packets and sample points
  double C_pkt_global = 0.0;          // sup 2|eta_0| / phi_0, the a priori bound
  long long nfnb_checked = 0;
  long long nfnb_violations = 0;      // spectrum of f_b outside 2 Pi_a
  double wa1_lhs = 0.0;               // sum_lambda lambda^p sum_{P_lambda} |pi|
  double wa1_rhs = 0.0;               // ||f||_{p,delta}^p
  double C_wa = 0.0;
  double linf_delta = 0.0;            // max_a sup |f_a| on the sample lattices
  double katr1 = 0.0;                 // max lambda / ||f||_{inf,delta}

  const Packet& packet(int id) const;
};

PacketDecomposition decompose(const GridFunction& f, const PacketOptions& opt = {});

// psi_b f_a; packets carry their lambda so that the sum over all packets is f
GridFunction packet_function(const PacketDecomposition& dec, int id);
GridFunction subfunction(const PacketDecomposition& dec, const std::vector<int>& ids);

struct SubfunctionReport {
  double norm_p_delta = 0.0;  // ||f_P'||_{p,delta}^p
  double mass = 0.0;          // sum lambda^p |pi|
  double C = 0.0;             // ratio
  double orthogonality = 0.0; // ||sum f_pi||_2^2 / sum ||f_pi||_2^2
};
SubfunctionReport subfunction_report(const PacketDecomposition& dec, const std::vector<int>& ids);

struct RelationEntry {
  int plate = 0;
  long long anchor = -1;  // flat cube index of Q(pi), -1 when pi meets no point of W
  int related = 0;        // number of cubes Q with pi ~ Q
  long long excluded = 0; // |{x in W cap pi : Q(x) not related}|
};

struct LocalizationRelation {
  int n = 0;  // cubes per axis, side t = 1/n
  int D = 0;
  std::vector<RelationEntry> entries;
  long long I_b = 0;
  long long W_size = 0;
  int max_related = 0;
  double scaling = 0.0;  // I_b / (|W| |P|^1/2)
};

// cubes of side 1/n wrap on the torus; pi ~ Q iff Q meets 10 Q(pi)
LocalizationRelation localization_relation(const std::vector<OrientedBox>& plates, const std::vector<Vec>& W, int n);
LocalizationRelation localization_relation_bruteforce(const std::vector<OrientedBox>& plates,
                                                      const std::vector<Vec>& W, int n);
int cubes_per_axis(double t);
bool cube_related(long long a, long long b, int n, int D);
bool periodic_contains(const OrientedBox& box, const Vec& x);

struct LocalizeReport {
  double lambda = 0.0;
  bool empty = false;       // lambda above sup |f|: nothing to localize
  bool localizes = false;
  LocalizationRelation rel;
  long long sum_PQ = 0;     // sum_Q |P(f^Q)|
  double C_log = 0.0;       // sum_PQ / |P|
  double captured = 0.0;    // fraction of W with |f^Q(x)| >= lambda / 2, Q = Q(x)
  int cubes = 0;            // cubes meeting W
  bool tubes = false;
};

struct LocalizeOptions {
  bool tubes = false;           // group packets by tubes before relating
  double C_log_bound = 0.0;  // 0 means 12^D, the cardinality bound on the relation
  double capture_threshold = 0.9;
  double budget_bytes = 3e9;
};

LocalizeReport localize_check(const PacketDecomposition& dec, double lambda, double t,
                              const LocalizeOptions& opt = {});

}  // namespace wolff
