#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "wolff/box.hpp"
#include "wolff/dyadic.hpp"
#include "wolff/experiments.hpp"
#include "wolff/surfaces.hpp"

namespace wolff {

struct CoveringConstants {
  double C = 4.0;     // sector full sidelengths C delta, C delta^1/2, C
  double c = 0.1;     // containment / angular constant
  double Cpp = 16.0;  // consistency dilation C''
  int K_ang_bound = 8;
};

struct Net {
  int sphere_dim = -1;  // m for S^{m-1}; -1 when the net lives on a surface
  double spacing = 0.0;
  double threshold = 0.0;  // distance actually used (chord for spheres)
  double candidate_spacing = 0.0;
  std::uint64_t seed = 0;
  std::vector<Vec> points;
  std::vector<Vec> params;  // surface parameters, surface nets only
  int candidates = 0;
};

// greedy farthest-point selection; returns chosen indices in selection order.
// stops when every candidate is closer than threshold*(1-1e-12) to the selection
std::vector<int> farthest_point_sample(const std::vector<Vec>& cand, double threshold, int first);

// nets on S^{m-1} (geodesic spacing s) and on surfaces (euclidean spacing s)
Net build_sphere_net(int m, double s, std::uint64_t seed = 0, double density = 0.0);
Net build_surface_net(const SurfaceModel& model, double s, std::uint64_t seed = 0);

struct NetCheck {
  double min_pair = 0.0;   // min pairwise net distance (geodesic on spheres)
  double max_probe = 0.0;  // max over probes of the distance to the net
};
NetCheck check_net(const Net& net, const std::vector<Vec>& probes);

struct Sector {
  int id = 0;
  Vec center;
  Frame frame;
  Vec param;
  Dyadic delta;
  double C = 4.0;
  int d = 0, k = 0;

  // half-lengths along (normal, mid..., flat...)
  Vec half_lengths() const;
  Vec sidelengths() const { return 2.0 * half_lengths(); }
  OrientedBox box() const;
  // same sector at another scale (used for Pi_{a,sigma} style boxes)
  OrientedBox box_at(const Dyadic& scale) const;
};

struct Covering {
  std::shared_ptr<const SurfaceModel> surface;
  std::string surface_ref;
  Dyadic delta;
  CoveringConstants constants;
  std::vector<Sector> sectors;
  Net net;
  int simplex_divisions = 1;  // k-cone simplex grid parameter q

  int M() const { return static_cast<int>(sectors.size()); }
};

Covering build_covering(std::shared_ptr<const SurfaceModel> model, Dyadic delta,
                        const CoveringConstants& constants = {}, std::uint64_t seed = 0);

struct VerifyOptions {
  int samples = 100000;
  int containment_samples = 20000;
  std::uint64_t seed = 7;
};

struct CoveringReport {
  Dyadic delta;
  Dyadic sigma;
  int M_delta = 0;
  int max_overlap = 0;
  double mean_overlap = 0.0;
  int coverage_failures = 0;      // uncovered samples away from the boundary
  int coverage_boundary = 0;      // uncovered samples within 2 delta of the boundary
  int K_ang = 0;                  // max count under the corrected (<=) reading
  int ang_violations = 0;         // sectors whose count exceeds the bound
  int K_ang_printed = 0;          // max count under the printed (>=) reading
  int consistency_checked = 0;
  int consistency_violations = 0;
  int containment_checked = 0;
  int containment_failures = 0;
  int containment_boundary = 0;   // excluded: foot point on the domain boundary
  int distance_fallbacks = 0;
  double mean_volume = 0.0;
  double volume_ratio = 0.0;      // mean volume / delta^{(d-k)/2+1}
};

CoveringReport verify_assumption_A(const Covering& cov, const Covering& coarse, const VerifyOptions& opt = {});

struct StatsRow {
  Dyadic delta;
  int M = 0;
  double mean_volume = 0.0;
  double volume_ratio = 0.0;
  double M_sigma_delta = 0.0;             // nearest-assignment mean (= M_delta / M_sigma)
  double M_sigma_delta_containing = 0.0;  // mean number of delta-centers inside Pi_{a,sigma}
};

struct CoveringStats {
  Dyadic sigma;
  int M_sigma = 0;
  std::vector<StatsRow> rows;
  RegressionResult M_fit;
  double volume_ratio_spread = 0.0;  // max/min of volume_ratio
};

CoveringStats covering_stats(std::shared_ptr<const SurfaceModel> model, const std::vector<Dyadic>& deltas,
                             Dyadic sigma, const CoveringConstants& constants = {});

}  // namespace wolff
