#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wolff/error.hpp"
#include "wolff/linalg.hpp"

namespace wolff {

// raised when a k-cone frame degenerates; carries the frame volume
struct NondegeneracyError : NumericError {
  double volume;
  NondegeneracyError(const std::string& m, double v) : NumericError(m), volume(v) {}
};

struct PerturbationTerm {
  double amplitude = 0.0;
  Vec wave;  // frequency vector in R^m
  double phase = 0.0;
};

// strictly convex body given by its support function
// h(n) = |A n| + sum_j c_j cos(w_j . n + phi_j)
class ConvexBody {
 public:
  ConvexBody(Mat shape, std::vector<PerturbationTerm> terms = {}, int label = 0,
             Vec center = Vec());

  static ConvexBody ball(int m, double radius = 1.0, int label = 0);

  int dim() const { return static_cast<int>(A_.rows()); }
  int label() const { return label_; }
  const Mat& shape() const { return A_; }
  const Vec& center() const { return center_; }
  const std::vector<PerturbationTerm>& terms() const { return terms_; }

  double support(const Vec& n) const;
  // x(n) = h(n) n + grad_sphere h(n), shifted by center
  Vec support_point(const Vec& n) const;
  // curvature-radius matrix on n^perp (m x m, annihilates n)
  Mat curvature_radii(const Vec& n) const;
  // smallest eigenvalue of the curvature-radius matrix restricted to n^perp
  double min_curvature_radius(const Vec& n) const;

  // sampled-net validation; throws ConfigError with a reason
  void validate(int net_size = 0) const;

 private:
  Mat A_;
  Mat A2_;
  std::vector<PerturbationTerm> terms_;
  int label_;
  Vec center_;
};

// deterministic direction nets used by validation and coverings
std::vector<Vec> sphere_samples(int m, int count, std::uint64_t seed = 7);

struct Frame {
  Vec point;
  Vec normal;
  Mat flat;  // D x k
  Mat mid;   // D x (d-k)

  int D() const { return static_cast<int>(point.size()); }
  // columns ordered (normal, mid..., flat...)
  Mat axes() const;
  double orthonormality_defect() const;
};

struct GoodTuple {
  Vec direction;
  std::vector<Vec> points;
  Vec center_of_mass;
  std::vector<Vec> simplex() const { return points; }
  int affine_dim(double tol = 1e-9) const;
};

enum class SurfaceKind { Graph, Conical, KCone };
enum class GraphKind { Quadratic, Sphere };

struct GraphData {
  GraphKind kind = GraphKind::Quadratic;
  int dim = 0;         // used by Sphere
  Mat hessian;         // d x d symmetric, for Quadratic
  double sphere_radius = 1.0;
  double domain_radius = 1.0;
};

struct ConicalData {
  Mat x_basis;  // D x d orthonormal directions of the hyperplane X
  Vec x_offset; // point of X, not the origin
  bool body_base = true;
  std::shared_ptr<ConvexBody> body;  // dim d
  Mat base_hessian;                  // (d-1) x (d-1) for graph bases
  double base_radius = 1.0;
  double c1 = 1.0, c2 = 2.0;
};

struct KConeData {
  Mat l0_basis;              // D x m orthonormal, m = d-k+1
  std::vector<Vec> offsets;  // k+1 points v_i; generator i lives in v_i + L0
  std::vector<ConvexBody> generators;
};

struct DistanceResult {
  double distance = 0.0;
  Vec param;
  Vec foot;
  bool converged = false;
  bool fallback = false;
  bool on_boundary = false;
  int iterations = 0;
};

class SurfaceModel {
 public:
  static SurfaceModel graph(GraphData g, double c0 = 1e-3);
  static SurfaceModel conical(ConicalData c, double c0 = 1e-3);
  static SurfaceModel kcone(KConeData k, double c0 = 1e-3);

  // common shapes
  static SurfaceModel paraboloid(int d, double domain_radius = 1.0);
  static SurfaceModel circular_cone(double c1 = 1.0, double c2 = 2.0);
  static SurfaceModel cone_kcone(double r0 = 1.0, double r1 = 2.0);
  static SurfaceModel cylinder_kcone();

  SurfaceKind kind() const { return kind_; }
  int d() const { return d_; }
  int k() const { return k_; }
  int D() const { return d_ + 1; }
  int param_dim() const;
  double c0() const { return c0_; }
  std::string name;  // free label used in reports

  const GraphData& graph_data() const { return *graph_; }
  const ConicalData& conical_data() const { return *conical_; }
  const KConeData& kcone_data() const { return *kcone_; }

  Vec canonical(const Vec& u) const;
  Vec point(const Vec& u) const;
  Mat tangents(const Vec& u) const;  // D x d, spans the tangent space
  Vec normal(const Vec& u) const;
  Frame frame(const Vec& u) const;
  bool on_boundary(const Vec& u, double tol) const;
  Vec random_param(std::mt19937_64& rng) const;

  // kcone helpers
  GoodTuple good_tuple(const Vec& n) const;
  double frame_volume(const Vec& n) const;
  Frame frame_at(const Vec& n, const Vec& alpha) const;
  Vec kcone_param(const Vec& n, const Vec& alpha) const;
  Vec alpha_of(const Vec& u) const;
  // simplex weights from an offset given in coordinates of an orthonormal basis of L0^perp
  Vec alpha_from_offset(const Vec& offset) const;
  Mat l0_complement() const;

  // conical helpers
  Vec conical_param(const Vec& base, double t) const;

  // rough extent of the surface, used for bounding-box checks
  double radius_bound() const;

  // distance to the surface; seeds empty means use internal multistart
  DistanceResult distance(const Vec& xi, const std::vector<Vec>& seeds = {}) const;
  DistanceResult refine_distance(const Vec& xi, const Vec& seed) const;
  double cloud_distance(const Vec& xi, int samples, std::uint64_t seed = 11) const;

  // nondegeneracy check on a sampled net; throws ConfigError
  void validate(int net = 0) const;

 private:
  SurfaceKind kind_ = SurfaceKind::Graph;
  int d_ = 0, k_ = 0;
  double c0_ = 1e-3;
  std::shared_ptr<const GraphData> graph_;
  std::shared_ptr<const ConicalData> conical_;
  std::shared_ptr<const KConeData> kcone_;
  std::shared_ptr<const std::vector<Vec>> seed_params_;
  std::shared_ptr<const std::vector<Vec>> seed_points_;

  void build_seeds();
  double graph_F(const Vec& x) const;
  Vec graph_grad(const Vec& x) const;
};

struct CrossSectionSample {
  Vec direction;  // n in S^{m-1}
  Vec point;      // ambient point sum alpha_i x_i(n)
  Vec normal;     // reported normal (lifted n0(x0))
  Vec tangent_normal_check;  // ambient normal recomputed from the section tangent
};

struct CrossSection {
  Vec alpha;
  std::vector<CrossSectionSample> samples;
  double min_second_difference = 0.0;  // discrete h + h'' on the sampled circle(s)
  double max_normal_defect = 0.0;      // analytic tangent vs reported normal
  double max_fd_normal_defect = 0.0;   // finite-difference tangent vs reported normal
  bool convex = false;
};

// cross-section of a k-cone at fixed simplex weights
CrossSection cross_section(const SurfaceModel& model, const Vec& alpha, int directions);

}  // namespace wolff
