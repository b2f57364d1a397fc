#include "wolff/surfaces.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace wolff {

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec unit(int m, int i) {
  Vec e = Vec::Zero(m);
  e[i] = 1.0;
  return e;
}

void require_unit(const Vec& n) {
  if (std::abs(n.norm() - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "direction is not a unit vector (|n| = " << n.norm() << ")";
    throw InputError(os.str());
  }
}

// euclidean projection onto {b >= 0, sum b <= 1}
Vec project_corner_simplex(const Vec& b) {
  Vec c = b.cwiseMax(0.0);
  if (c.sum() <= 1.0) return c;
  std::vector<double> s(b.data(), b.data() + b.size());
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (size_t i = 0; i < s.size(); ++i) {
    cum += s[i];
    double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (s[i] - t > 0) theta = t;
  }
  return (b.array() - theta).cwiseMax(0.0).matrix();
}

Vec complement_normal(const Mat& tangents) {
  const int D = static_cast<int>(tangents.rows());
  Eigen::JacobiSVD<Mat> svd(tangents, Eigen::ComputeFullU);
  return svd.matrixU().col(D - 1);
}

}  // namespace

// ---------------------------------------------------------------- ConvexBody

ConvexBody::ConvexBody(Mat shape, std::vector<PerturbationTerm> terms, int label, Vec center)
    : A_(std::move(shape)), terms_(std::move(terms)), label_(label), center_(std::move(center)) {
  const int m = static_cast<int>(A_.rows());
  if (m < 2 || A_.cols() != m) throw ConfigError("convex body matrix must be square, dim >= 2");
  if ((A_ - A_.transpose()).norm() > 1e-12 * (1.0 + A_.norm()))
    throw ConfigError("convex body matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(A_);
  if (es.eigenvalues().minCoeff() <= 0) throw ConfigError("convex body matrix must be positive definite");
  if (center_.size() == 0) center_ = Vec::Zero(m);
  if (center_.size() != m) throw ConfigError("convex body center has wrong dimension");
  for (const auto& t : terms_)
    if (t.wave.size() != m) throw ConfigError("perturbation wave vector has wrong dimension");
  A2_ = A_ * A_;
  validate();
}

ConvexBody ConvexBody::ball(int m, double radius, int label) {
  return ConvexBody(radius * Mat::Identity(m, m), {}, label);
}

double ConvexBody::support(const Vec& n) const {
  double h = (A_ * n).norm() + center_.dot(n);
  for (const auto& t : terms_) h += t.amplitude * std::cos(t.wave.dot(n) + t.phase);
  return h;
}

Vec ConvexBody::support_point(const Vec& n) const {
  require_unit(n);
  const double an = (A_ * n).norm();
  Vec x = A2_ * n / an;
  double p = 0.0;
  Vec gp = Vec::Zero(n.size());
  for (const auto& t : terms_) {
    double arg = t.wave.dot(n) + t.phase;
    p += t.amplitude * std::cos(arg);
    gp -= t.amplitude * std::sin(arg) * t.wave;
  }
  x += p * n + gp - n.dot(gp) * n;
  x += center_;
  if (!x.allFinite()) throw NumericError("support point evaluation produced non-finite values");
  return x;
}

Mat ConvexBody::curvature_radii(const Vec& n) const {
  const int m = dim();
  const double an = (A_ * n).norm();
  Vec a2n = A2_ * n;
  Mat H = A2_ / an - a2n * a2n.transpose() / (an * an * an);
  double p = 0.0, ndgp = 0.0;
  for (const auto& t : terms_) {
    double arg = t.wave.dot(n) + t.phase;
    p += t.amplitude * std::cos(arg);
    ndgp -= t.amplitude * std::sin(arg) * t.wave.dot(n);
    H -= t.amplitude * std::cos(arg) * t.wave * t.wave.transpose();
  }
  H += (p - ndgp) * Mat::Identity(m, m);
  Mat P = Mat::Identity(m, m) - n * n.transpose();
  return P * H * P;
}

double ConvexBody::min_curvature_radius(const Vec& n) const {
  Mat T = sphere_tangent_basis(n);
  Mat W = T.transpose() * curvature_radii(n) * T;
  Eigen::SelfAdjointEigenSolver<Mat> es(W);
  return es.eigenvalues().minCoeff();
}

void ConvexBody::validate(int net_size) const {
  const int m = dim();
  if (net_size <= 0) net_size = m == 2 ? 360 : (m == 3 ? 600 : 1000);
  auto net = sphere_samples(m, net_size);
  std::vector<Vec> pts;
  pts.reserve(net.size());
  for (const auto& n : net) {
    double h = support(n) - center_.dot(n);
    if (!(h > 0)) throw ConfigError("support function is not positive on the direction net");
    double w = min_curvature_radius(n);
    if (!(w > 1e-9)) {
      std::ostringstream os;
      os << "convex body " << label_ << " is not strictly convex: curvature radius " << w;
      throw ConfigError(os.str());
    }
    pts.push_back(support_point(n));
  }
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j)
      if ((pts[i] - pts[j]).norm() < 1e-13)
        throw ConfigError("support-point map is not injective on the direction net");
}

std::vector<Vec> sphere_samples(int m, int count, std::uint64_t seed) {
  std::vector<Vec> out;
  out.reserve(count);
  if (m == 2) {
    for (int i = 0; i < count; ++i) {
      double th = 2.0 * kPi * i / count;
      Vec v(2);
      v << std::cos(th), std::sin(th);
      out.push_back(v);
    }
  } else if (m == 3) {
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      double z = 1.0 - (2.0 * i + 1.0) / count;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      double th = golden * i;
      Vec v(3);
      v << z, r * std::cos(th), r * std::sin(th);
      out.push_back(v);
    }
  } else {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < count; ++i) {
      Vec v(m);
      for (int j = 0; j < m; ++j) v[j] = g(rng);
      out.push_back(v.normalized());
    }
  }
  return out;
}

// ---------------------------------------------------------------- Frame

Mat Frame::axes() const {
  const int D = static_cast<int>(point.size());
  Mat n(D, 1);
  n.col(0) = normal;
  return hstack({n, mid, flat}, D);
}

double Frame::orthonormality_defect() const {
  Mat U = axes();
  return (U.transpose() * U - Mat::Identity(U.cols(), U.cols())).cwiseAbs().maxCoeff();
}

int GoodTuple::affine_dim(double tol) const {
  if (points.size() < 2) return 0;
  Mat M(points[0].size(), static_cast<int>(points.size()) - 1);
  for (size_t i = 1; i < points.size(); ++i) M.col(static_cast<int>(i) - 1) = points[i] - points[0];
  Eigen::JacobiSVD<Mat> svd(M);
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > tol * std::max(1.0, svd.singularValues()[0])) ++r;
  return r;
}

// ---------------------------------------------------------------- SurfaceModel

SurfaceModel SurfaceModel::graph(GraphData g, double c0) {
  SurfaceModel s;
  s.kind_ = SurfaceKind::Graph;
  s.c0_ = c0;
  if (g.kind == GraphKind::Quadratic) {
    s.d_ = static_cast<int>(g.hessian.rows());
    if (s.d_ < 1 || g.hessian.cols() != s.d_) throw ConfigError("graph hessian must be square");
    g.hessian = 0.5 * (g.hessian + g.hessian.transpose());
  } else {
    s.d_ = g.dim;
    if (s.d_ < 1) throw ConfigError("sphere graph needs a positive dimension");
    if (g.domain_radius >= g.sphere_radius) throw ConfigError("sphere graph domain must be inside the sphere");
  }
  if (!(g.domain_radius > 0)) throw ConfigError("graph domain radius must be positive");
  s.k_ = 0;
  s.graph_ = std::make_shared<GraphData>(std::move(g));
  s.validate();
  s.build_seeds();
  return s;
}

SurfaceModel SurfaceModel::conical(ConicalData c, double c0) {
  SurfaceModel s;
  s.kind_ = SurfaceKind::Conical;
  s.c0_ = c0;
  const int D = static_cast<int>(c.x_basis.rows());
  const int d = static_cast<int>(c.x_basis.cols());
  if (D != d + 1) throw ConfigError("conical: X basis must be D x (D-1)");
  if ((c.x_basis.transpose() * c.x_basis - Mat::Identity(d, d)).norm() > 1e-10)
    throw ConfigError("conical: X basis must be orthonormal");
  if (c.x_offset.size() != D) throw ConfigError("conical: offset has wrong dimension");
  // move the offset to the component orthogonal to X's directions
  c.x_offset -= c.x_basis * (c.x_basis.transpose() * c.x_offset);
  if (c.x_offset.norm() < 1e-9) throw ConfigError("conical: X must not pass through the origin");
  if (!(0 < c.c1 && c.c1 < c.c2)) throw ConfigError("conical: need 0 < C1 < C2");
  if (c.body_base) {
    if (!c.body || c.body->dim() != d) throw ConfigError("conical: base body must have dimension d");
  } else {
    if (c.base_hessian.rows() != d - 1) throw ConfigError("conical: base hessian must be (d-1)x(d-1)");
  }
  s.d_ = d;
  s.k_ = 1;
  s.conical_ = std::make_shared<ConicalData>(std::move(c));
  s.validate();
  s.build_seeds();
  return s;
}

SurfaceModel SurfaceModel::kcone(KConeData kc, double c0) {
  SurfaceModel s;
  s.kind_ = SurfaceKind::KCone;
  s.c0_ = c0;
  const int D = static_cast<int>(kc.l0_basis.rows());
  const int m = static_cast<int>(kc.l0_basis.cols());
  const int k = static_cast<int>(kc.generators.size()) - 1;
  if (k < 1) throw ConfigError("kcone needs at least two generators");
  if (m + k != D) throw ConfigError("kcone: dim L0 + k must equal the ambient dimension");
  if ((kc.l0_basis.transpose() * kc.l0_basis - Mat::Identity(m, m)).norm() > 1e-10)
    throw ConfigError("kcone: L0 basis must be orthonormal");
  if (static_cast<int>(kc.offsets.size()) != k + 1) throw ConfigError("kcone: need one offset per generator");
  for (auto& g : kc.generators)
    if (g.dim() != m) throw ConfigError("kcone: generator dimension must equal dim L0");
  for (auto& v : kc.offsets) {
    if (v.size() != D) throw ConfigError("kcone: offset has wrong dimension");
    v -= kc.l0_basis * (kc.l0_basis.transpose() * v);
  }
  s.d_ = D - 1;
  s.k_ = k;
  s.kcone_ = std::make_shared<KConeData>(std::move(kc));
  // affine independence of the offsets modulo L0
  Mat Cb = s.l0_complement();
  Mat Z(k, k);
  for (int i = 1; i <= k; ++i) Z.col(i - 1) = Cb.transpose() * (s.kcone_->offsets[i] - s.kcone_->offsets[0]);
  if (std::abs(Z.determinant()) < 1e-9) throw ConfigError("kcone: generator planes are not affinely independent");
  s.validate();
  s.build_seeds();
  return s;
}

SurfaceModel SurfaceModel::paraboloid(int d, double domain_radius) {
  GraphData g;
  g.hessian = Mat::Identity(d, d);
  g.domain_radius = domain_radius;
  auto s = graph(g);
  s.name = "paraboloid";
  return s;
}

SurfaceModel SurfaceModel::circular_cone(double c1, double c2) {
  ConicalData c;
  c.x_basis = Mat::Zero(3, 2);
  c.x_basis(0, 0) = 1;
  c.x_basis(1, 1) = 1;
  c.x_offset = unit(3, 2);
  c.body = std::make_shared<ConvexBody>(ConvexBody::ball(2));
  c.c1 = c1;
  c.c2 = c2;
  auto s = conical(c);
  s.name = "circular_cone";
  return s;
}

SurfaceModel SurfaceModel::cone_kcone(double r0, double r1) {
  KConeData k;
  k.l0_basis = Mat::Zero(3, 2);
  k.l0_basis(0, 0) = 1;
  k.l0_basis(1, 1) = 1;
  k.offsets = {Vec::Zero(3), unit(3, 2)};
  k.generators = {ConvexBody::ball(2, r0, 0), ConvexBody::ball(2, r1, 1)};
  auto s = kcone(k);
  s.name = r0 == r1 ? "cylinder" : "cone_kcone";
  return s;
}

SurfaceModel SurfaceModel::cylinder_kcone() { return cone_kcone(1.0, 1.0); }

int SurfaceModel::param_dim() const {
  switch (kind_) {
    case SurfaceKind::Graph: return d_;
    case SurfaceKind::Conical: return conical_->body_base ? d_ + 1 : d_;
    case SurfaceKind::KCone: return static_cast<int>(kcone_->l0_basis.cols()) + k_;
  }
  return 0;
}

Mat SurfaceModel::l0_complement() const { return orthonormal_complement(kcone_->l0_basis); }

double SurfaceModel::graph_F(const Vec& x) const {
  if (graph_->kind == GraphKind::Quadratic) return 0.5 * x.dot(graph_->hessian * x);
  double r = graph_->sphere_radius;
  return r - std::sqrt(r * r - x.squaredNorm());
}

Vec SurfaceModel::graph_grad(const Vec& x) const {
  if (graph_->kind == GraphKind::Quadratic) return graph_->hessian * x;
  double r = graph_->sphere_radius;
  return x / std::sqrt(r * r - x.squaredNorm());
}

Vec SurfaceModel::canonical(const Vec& u) const {
  if (u.size() != param_dim()) throw InputError("surface parameter has wrong dimension");
  Vec v = u;
  switch (kind_) {
    case SurfaceKind::Graph: {
      double r = v.norm();
      if (r > graph_->domain_radius) v *= graph_->domain_radius / r;
      break;
    }
    case SurfaceKind::Conical: {
      const auto& c = *conical_;
      if (c.body_base) {
        Vec w = v.head(d_);
        double nw = w.norm();
        v.head(d_) = nw > 1e-300 ? Vec(w / nw) : unit(d_, 0);
      } else {
        Vec w = v.head(d_ - 1);
        double nw = w.norm();
        if (nw > c.base_radius) v.head(d_ - 1) = w * (c.base_radius / nw);
      }
      double& t = v[v.size() - 1];
      t = std::clamp(t, c.c1, c.c2);
      break;
    }
    case SurfaceKind::KCone: {
      const int m = static_cast<int>(kcone_->l0_basis.cols());
      Vec w = v.head(m);
      double nw = w.norm();
      v.head(m) = nw > 1e-300 ? Vec(w / nw) : unit(m, 0);
      v.tail(k_) = project_corner_simplex(v.tail(k_));
      break;
    }
  }
  return v;
}

Vec SurfaceModel::alpha_of(const Vec& u) const {
  Vec a(k_ + 1);
  Vec b = u.tail(k_);
  a[0] = 1.0 - b.sum();
  a.tail(k_) = b;
  return a;
}

Vec SurfaceModel::kcone_param(const Vec& n, const Vec& alpha) const {
  const int m = static_cast<int>(kcone_->l0_basis.cols());
  if (n.size() != m || alpha.size() != k_ + 1) throw InputError("kcone locator has wrong dimensions");
  if (alpha.minCoeff() < -1e-12 || std::abs(alpha.sum() - 1.0) > 1e-9)
    throw InputError("simplex weights must lie in the closed simplex");
  Vec u(m + k_);
  u.head(m) = n;
  u.tail(k_) = alpha.tail(k_);
  return u;
}

Vec SurfaceModel::conical_param(const Vec& base, double t) const {
  Vec u(param_dim());
  u.head(u.size() - 1) = base;
  u[u.size() - 1] = t;
  return u;
}

Vec SurfaceModel::point(const Vec& u0) const {
  Vec u = canonical(u0);
  switch (kind_) {
    case SurfaceKind::Graph: {
      Vec x(D());
      x.head(d_) = u;
      x[d_] = graph_F(u);
      return x;
    }
    case SurfaceKind::Conical: {
      const auto& c = *conical_;
      double t = u[u.size() - 1];
      Vec s;
      if (c.body_base) {
        s = c.x_offset + c.x_basis * c.body->support_point(u.head(d_));
      } else {
        Vec v = u.head(d_ - 1);
        Vec y(d_);
        y.head(d_ - 1) = v;
        y[d_ - 1] = 0.5 * v.dot(c.base_hessian * v);
        s = c.x_offset + c.x_basis * y;
      }
      return t * s;
    }
    case SurfaceKind::KCone: {
      const auto& kc = *kcone_;
      const int m = static_cast<int>(kc.l0_basis.cols());
      Vec n = u.head(m);
      Vec a = alpha_of(u);
      Vec x = Vec::Zero(D());
      Vec y = Vec::Zero(m);
      for (int i = 0; i <= k_; ++i) {
        x += a[i] * kc.offsets[i];
        y += a[i] * kc.generators[i].support_point(n);
      }
      return x + kc.l0_basis * y;
    }
  }
  return Vec();
}

Mat SurfaceModel::tangents(const Vec& u0) const {
  Vec u = canonical(u0);
  const int D = this->D();
  Mat T(D, d_);
  switch (kind_) {
    case SurfaceKind::Graph: {
      Vec g = graph_grad(u);
      T.setZero();
      for (int i = 0; i < d_; ++i) {
        T(i, i) = 1.0;
        T(d_, i) = g[i];
      }
      break;
    }
    case SurfaceKind::Conical: {
      const auto& c = *conical_;
      double t = u[u.size() - 1];
      if (c.body_base) {
        Vec n = u.head(d_);
        Vec s = c.x_offset + c.x_basis * c.body->support_point(n);
        T.col(0) = s;
        Mat Tl = sphere_tangent_basis(n);
        Mat W = c.body->curvature_radii(n);
        T.rightCols(d_ - 1) = t * c.x_basis * W * Tl;
      } else {
        Vec v = u.head(d_ - 1);
        Vec y(d_);
        y.head(d_ - 1) = v;
        y[d_ - 1] = 0.5 * v.dot(c.base_hessian * v);
        T.col(0) = c.x_offset + c.x_basis * y;
        Vec hv = c.base_hessian * v;
        for (int i = 0; i < d_ - 1; ++i) {
          Vec e = Vec::Zero(d_);
          e[i] = 1.0;
          e[d_ - 1] = hv[i];
          T.col(i + 1) = t * c.x_basis * e;
        }
      }
      break;
    }
    case SurfaceKind::KCone: {
      const auto& kc = *kcone_;
      const int m = static_cast<int>(kc.l0_basis.cols());
      Vec n = u.head(m);
      Vec a = alpha_of(u);
      auto gt = good_tuple(n);
      for (int i = 1; i <= k_; ++i) T.col(i - 1) = gt.points[i] - gt.points[0];
      Mat W = Mat::Zero(m, m);
      for (int i = 0; i <= k_; ++i) W += a[i] * kc.generators[i].curvature_radii(n);
      T.rightCols(m - 1) = kc.l0_basis * W * sphere_tangent_basis(n);
      break;
    }
  }
  return T;
}

namespace {
// orientation reference vector: the surface normal is chosen with positive dot product
Vec orientation_ref(const SurfaceModel& s, const Vec& u) {
  switch (s.kind()) {
    case SurfaceKind::Graph: {
      Vec r = Vec::Zero(s.D());
      r[s.d()] = -1.0;
      return r;
    }
    case SurfaceKind::Conical: {
      const auto& c = s.conical_data();
      if (c.body_base) return c.x_basis * u.head(s.d());
      Vec v = u.head(s.d() - 1);
      Vec y(s.d());
      y.head(s.d() - 1) = c.base_hessian * v;
      y[s.d() - 1] = -1.0;
      return c.x_basis * y;
    }
    case SurfaceKind::KCone: {
      const int m = static_cast<int>(s.kcone_data().l0_basis.cols());
      return s.kcone_data().l0_basis * u.head(m);
    }
  }
  return Vec();
}
}  // namespace

Vec SurfaceModel::normal(const Vec& u0) const {
  Vec u = canonical(u0);
  if (kind_ == SurfaceKind::Graph) {
    Vec g = graph_grad(u);
    Vec n(D());
    n.head(d_) = g;
    n[d_] = -1.0;
    return n.normalized();
  }
  Vec n = complement_normal(tangents(u));
  if (n.dot(orientation_ref(*this, u)) < 0) n = -n;
  return n;
}

Frame SurfaceModel::frame(const Vec& u0) const {
  Vec u = canonical(u0);
  Frame f;
  f.point = point(u);
  const int D = this->D();
  switch (kind_) {
    case SurfaceKind::Graph: {
      f.flat = Mat(D, 0);
      f.mid = gram_schmidt(tangents(u), Mat(D, 0));
      break;
    }
    case SurfaceKind::Conical: {
      Mat T = tangents(u);
      f.flat = Mat(D, 1);
      f.flat.col(0) = T.col(0).normalized();
      f.mid = gram_schmidt(T.rightCols(d_ - 1), f.flat);
      break;
    }
    case SurfaceKind::KCone: {
      const auto& kc = *kcone_;
      const int m = static_cast<int>(kc.l0_basis.cols());
      Vec n = u.head(m);
      double V = frame_volume(n);
      if (V < c0_) {
        std::ostringstream os;
        os << "degenerate k-cone frame: V(x0) = " << V << " < c0 = " << c0_;
        throw NondegeneracyError(os.str(), V);
      }
      auto gt = good_tuple(n);
      Mat diffs(D, k_);
      for (int i = 1; i <= k_; ++i) diffs.col(i - 1) = gt.points[i] - gt.points[0];
      f.flat = gram_schmidt(diffs, Mat(D, 0));
      f.mid = gram_schmidt(kc.l0_basis * sphere_tangent_basis(n), f.flat);
      break;
    }
  }
  if (f.flat.cols() != k_ || f.mid.cols() != d_ - k_) throw NumericError("frame lost rank");
  Mat both = hstack({f.mid, f.flat}, D);
  Mat comp = orthonormal_complement(both);
  Vec n = comp.col(0);
  if (n.dot(orientation_ref(*this, u)) < 0) n = -n;
  f.normal = n;
  return f;
}

GoodTuple SurfaceModel::good_tuple(const Vec& n) const {
  if (kind_ != SurfaceKind::KCone) throw InputError("good_tuple needs a k-cone");
  require_unit(n);
  const auto& kc = *kcone_;
  GoodTuple g;
  g.direction = n;
  g.center_of_mass = Vec::Zero(D());
  for (int i = 0; i <= k_; ++i) {
    Vec x = kc.offsets[i] + kc.l0_basis * kc.generators[i].support_point(n);
    g.center_of_mass += x;
    g.points.push_back(std::move(x));
  }
  g.center_of_mass /= static_cast<double>(k_ + 1);
  return g;
}

double SurfaceModel::frame_volume(const Vec& n) const {
  const auto& kc = *kcone_;
  auto gt = good_tuple(n);
  const int D = this->D();
  Mat diffs(D, k_);
  for (int i = 1; i <= k_; ++i) diffs.col(i - 1) = gt.points[i] - gt.points[0];
  Mat Fperp = gram_schmidt(diffs, Mat(D, 0));
  if (Fperp.cols() != k_) return 0.0;
  Mat Fpar = kc.l0_basis * sphere_tangent_basis(n);
  Mat nl(D, 1);
  nl.col(0) = kc.l0_basis * n;
  return std::abs(hstack({Fpar, Fperp, nl}, D).determinant());
}

Frame SurfaceModel::frame_at(const Vec& n, const Vec& alpha) const {
  if (kind_ != SurfaceKind::KCone) throw InputError("frame_at with (n, alpha) needs a k-cone");
  require_unit(n);
  return frame(kcone_param(n, alpha));
}

Vec SurfaceModel::alpha_from_offset(const Vec& offset) const {
  if (kind_ != SurfaceKind::KCone) throw InputError("offsets are defined for k-cones only");
  if (offset.size() != k_) throw InputError("offset must be a k-vector");
  Mat Cb = l0_complement();
  Mat M(k_ + 1, k_ + 1);
  Vec rhs(k_ + 1);
  for (int i = 0; i <= k_; ++i) {
    M.block(0, i, k_, 1) = Cb.transpose() * kcone_->offsets[i];
    M(k_, i) = 1.0;
  }
  rhs.head(k_) = offset;
  rhs[k_] = 1.0;
  Vec a = M.fullPivLu().solve(rhs);
  if (a.minCoeff() < -1e-12) throw InputError("offset lies outside the simplex of attainable offsets");
  return a.cwiseMax(0.0);
}

bool SurfaceModel::on_boundary(const Vec& u0, double tol) const {
  Vec u = canonical(u0);
  switch (kind_) {
    case SurfaceKind::Graph: return u.norm() >= graph_->domain_radius - tol;
    case SurfaceKind::Conical: {
      const auto& c = *conical_;
      double t = u[u.size() - 1];
      if (t <= c.c1 + tol || t >= c.c2 - tol) return true;
      if (!c.body_base && u.head(d_ - 1).norm() >= c.base_radius - tol) return true;
      return false;
    }
    case SurfaceKind::KCone: return alpha_of(u).minCoeff() <= tol;
  }
  return false;
}

Vec SurfaceModel::random_param(std::mt19937_64& rng) const {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Vec u(param_dim());
  auto ball = [&](int m, double r) {
    Vec v(m);
    for (int i = 0; i < m; ++i) v[i] = g(rng);
    double len = v.norm();
    double rad = r * std::pow(U(rng), 1.0 / m);
    return Vec(v * (rad / len));
  };
  switch (kind_) {
    case SurfaceKind::Graph: u = ball(d_, graph_->domain_radius); break;
    case SurfaceKind::Conical: {
      const auto& c = *conical_;
      if (c.body_base) {
        for (int i = 0; i < d_; ++i) u[i] = g(rng);
        u.head(d_).normalize();
      } else {
        u.head(d_ - 1) = ball(d_ - 1, c.base_radius);
      }
      u[u.size() - 1] = c.c1 + (c.c2 - c.c1) * U(rng);
      break;
    }
    case SurfaceKind::KCone: {
      const int m = static_cast<int>(kcone_->l0_basis.cols());
      for (int i = 0; i < m; ++i) u[i] = g(rng);
      u.head(m).normalize();
      // uniform on the simplex
      Vec e(k_ + 1);
      for (int i = 0; i <= k_; ++i) e[i] = -std::log(1.0 - U(rng));
      e /= e.sum();
      u.tail(k_) = e.tail(k_);
      break;
    }
  }
  return u;
}

void SurfaceModel::validate(int net) const {
  switch (kind_) {
    case SurfaceKind::Graph: {
      const auto& g = *graph_;
      if (g.kind == GraphKind::Quadratic) {
        Eigen::SelfAdjointEigenSolver<Mat> es(g.hessian);
        double mn = es.eigenvalues().cwiseAbs().minCoeff();
        if (mn < c0_) throw ConfigError("graph hessian is degenerate (|eigenvalue| < c0)");
      } else {
        std::mt19937_64 rng(3);
        int count = net > 0 ? net : 200;
        for (int i = 0; i < count; ++i) {
          Vec x = random_param(rng);
          double r = g.sphere_radius;
          double s = std::sqrt(r * r - x.squaredNorm());
          Mat H = Mat::Identity(d_, d_) / s + x * x.transpose() / (s * s * s);
          Eigen::SelfAdjointEigenSolver<Mat> es(H);
          if (es.eigenvalues().cwiseAbs().minCoeff() < c0_) throw ConfigError("graph hessian degenerate");
        }
      }
      break;
    }
    case SurfaceKind::Conical: {
      const auto& c = *conical_;
      if (!c.body_base) {
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (c.base_hessian + c.base_hessian.transpose()));
        if (d_ > 1 && es.eigenvalues().cwiseAbs().minCoeff() < c0_)
          throw ConfigError("conical base is degenerate in X");
      }
      break;
    }
    case SurfaceKind::KCone: {
      const int m = static_cast<int>(kcone_->l0_basis.cols());
      int count = net > 0 ? net : 1000;
      for (const auto& n : sphere_samples(m, count, 5)) {
        double V = frame_volume(n);
        if (V < c0_) {
          std::ostringstream os;
          os << "k-cone frame volume " << V << " below c0 = " << c0_;
          throw ConfigError(os.str());
        }
      }
      break;
    }
  }
}

void SurfaceModel::build_seeds() {
  std::mt19937_64 rng(1234);
  auto params = std::make_shared<std::vector<Vec>>();
  auto pts = std::make_shared<std::vector<Vec>>();
  const int count = 3000;
  params->reserve(count);
  pts->reserve(count);
  for (int i = 0; i < count; ++i) {
    Vec u = random_param(rng);
    params->push_back(u);
    pts->push_back(point(u));
  }
  seed_params_ = params;
  seed_points_ = pts;
}

double SurfaceModel::radius_bound() const {
  double r = 0.0;
  for (const auto& p : *seed_points_) r = std::max(r, p.norm());
  return r * 1.05 + 1e-9;
}

DistanceResult SurfaceModel::refine_distance(const Vec& xi, const Vec& seed) const {
  DistanceResult res;
  Vec u = canonical(seed);
  Vec r = point(u) - xi;
  double f = r.squaredNorm();
  double mu = 1e-3;
  const int P = param_dim();
  for (int it = 0; it < 20; ++it) {
    res.iterations = it + 1;
    Mat J(D(), P);
    for (int j = 0; j < P; ++j) {
      double h = 1e-6 * std::max(1.0, std::abs(u[j]));
      Vec up = u, um = u;
      up[j] += h;
      um[j] -= h;
      J.col(j) = (point(up) - point(um)) / (2 * h);
    }
    Mat A = J.transpose() * J;
    Vec g = J.transpose() * r;
    bool accepted = false;
    for (int tries = 0; tries < 30; ++tries) {
      Mat M = A;
      for (int j = 0; j < P; ++j) M(j, j) += mu * (A(j, j) + 1e-12);
      Vec step = M.ldlt().solve(-g);
      Vec un = canonical(u + step);
      Vec rn = point(un) - xi;
      double fn = rn.squaredNorm();
      double moved = (un - u).norm();
      if (fn < f) {
        u = un;
        r = rn;
        f = fn;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        if (moved < 1e-10) res.converged = true;
        break;
      }
      if (moved < 1e-10) {
        res.converged = true;
        break;
      }
      mu *= 4.0;
    }
    if (res.converged || !accepted) {
      if (!accepted) res.converged = true;
      break;
    }
  }
  // newton polish with the full hessian of f = |x(u) - xi|^2 / 2; gauss-newton alone is
  // slow when the residual is comparable to the curvature radius
  auto fval = [&](const Vec& v) { return 0.5 * (point(canonical(v)) - xi).squaredNorm(); };
  for (int it = 0; it < 20; ++it) {
    const double hg = 1e-6, hh = 1e-4;
    Vec g(P);
    Mat H(P, P);
    for (int i = 0; i < P; ++i) {
      Vec up = u, um = u;
      up[i] += hg;
      um[i] -= hg;
      g[i] = (fval(up) - fval(um)) / (2 * hg);
      for (int j = i; j < P; ++j) {
        Vec a = u, b = u, c = u, e = u;
        a[i] += hh; a[j] += hh;
        b[i] += hh; b[j] -= hh;
        c[i] -= hh; c[j] += hh;
        e[i] -= hh; e[j] -= hh;
        H(i, j) = H(j, i) = (fval(a) - fval(b) - fval(c) + fval(e)) / (4 * hh * hh);
      }
    }
    double f0 = 0.5 * f;
    bool moved_any = false;
    for (double lam = 1e-10; lam < 1e6; lam *= 100) {
      Mat M = H;
      for (int j = 0; j < P; ++j) M(j, j) += lam * (1.0 + std::abs(H(j, j)));
      Eigen::LDLT<Mat> ldlt(M);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) continue;
      Vec step = ldlt.solve(-g);
      Vec un = canonical(u + step);
      double fn = fval(un);
      if (fn <= f0) {
        double moved = (un - u).norm();
        u = un;
        f = 2 * fn;
        moved_any = moved > 1e-10;
        break;
      }
    }
    if (!moved_any) {
      res.converged = true;
      break;
    }
  }
  r = point(u) - xi;
  f = r.squaredNorm();
  res.param = u;
  res.foot = point(u);
  res.distance = std::sqrt(f);
  res.on_boundary = on_boundary(u, 1e-9);
  return res;
}

double SurfaceModel::cloud_distance(const Vec& xi, int samples, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) best = std::min(best, (point(random_param(rng)) - xi).norm());
  return best;
}

DistanceResult SurfaceModel::distance(const Vec& xi, const std::vector<Vec>& seeds) const {
  if (xi.size() != D()) throw InputError("point has wrong dimension");
  std::vector<Vec> starts = seeds;
  if (starts.empty()) {
    std::vector<std::pair<double, int>> near;
    near.reserve(seed_points_->size());
    for (size_t i = 0; i < seed_points_->size(); ++i)
      near.emplace_back(((*seed_points_)[i] - xi).squaredNorm(), static_cast<int>(i));
    std::partial_sort(near.begin(), near.begin() + 8, near.end());
    for (int i = 0; i < 8; ++i) starts.push_back((*seed_params_)[near[i].second]);
  }
  DistanceResult best;
  best.distance = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& s : starts) {
    auto r = refine_distance(xi, s);
    if (r.converged && r.distance < best.distance) {
      best = r;
      any = true;
    }
  }
  if (!any) {
    best.distance = cloud_distance(xi, 200000);
    best.fallback = true;
    best.converged = false;
  }
  return best;
}

// ---------------------------------------------------------------- cross sections

CrossSection cross_section(const SurfaceModel& model, const Vec& alpha, int directions) {
  if (model.kind() != SurfaceKind::KCone) throw InputError("cross_section needs a k-cone");
  const auto& kc = model.kcone_data();
  const int k = model.k();
  const int m = static_cast<int>(kc.l0_basis.cols());
  if (alpha.size() != k + 1) throw InputError("alpha must have k+1 entries");
  if (alpha.minCoeff() < -1e-12 || std::abs(alpha.sum() - 1.0) > 1e-9)
    throw InputError("alpha outside the simplex");
  CrossSection cs;
  cs.alpha = alpha;
  Vec base = Vec::Zero(model.D());
  for (int i = 0; i <= k; ++i) base += alpha[i] * kc.offsets[i];

  // great circles through coordinate planes of L0
  std::vector<std::pair<int, int>> planes;
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b) planes.emplace_back(a, b);
  const int per = std::max(16, directions / static_cast<int>(planes.size()));
  const double dth = 2.0 * kPi / per;
  cs.min_second_difference = std::numeric_limits<double>::infinity();
  bool first_plane = true;
  for (auto [pa, pb] : planes) {
    std::vector<Vec> pts(per), dirs(per);
    std::vector<double> h(per);
    for (int j = 0; j < per; ++j) {
      Vec n = Vec::Zero(m);
      n[pa] = std::cos(j * dth);
      n[pb] = std::sin(j * dth);
      Vec y = Vec::Zero(m);
      Mat W = Mat::Zero(m, m);
      for (int i = 0; i <= k; ++i) {
        y += alpha[i] * kc.generators[i].support_point(n);
        W += alpha[i] * kc.generators[i].curvature_radii(n);
      }
      dirs[j] = n;
      pts[j] = base + kc.l0_basis * y;
      h[j] = y.dot(n);
      Vec reported = kc.l0_basis * n;
      Mat T = kc.l0_basis * W * sphere_tangent_basis(n);
      for (int c = 0; c < T.cols(); ++c)
        cs.max_normal_defect = std::max(cs.max_normal_defect, std::abs(reported.dot(T.col(c).normalized())));
      if (first_plane) {
        CrossSectionSample s;
        s.direction = n;
        s.point = pts[j];
        s.normal = reported;
        cs.samples.push_back(std::move(s));
      }
    }
    for (int j = 0; j < per; ++j) {
      int jp = (j + 1) % per, jm = (j + per - 1) % per;
      double curv = h[j] + (h[jp] - 2 * h[j] + h[jm]) / (dth * dth);
      cs.min_second_difference = std::min(cs.min_second_difference, curv);
      Vec t = pts[jp] - pts[jm];
      Vec reported = kc.l0_basis * dirs[j];
      double defect = std::abs(reported.dot(t.normalized()));
      cs.max_fd_normal_defect = std::max(cs.max_fd_normal_defect, defect);
      if (first_plane) {
        // normal recomputed from the section tangent within the plane of the circle
        Vec tl = kc.l0_basis.transpose() * t;
        Vec nl = Vec::Zero(m);
        nl[pa] = tl[pb];
        nl[pb] = -tl[pa];
        if (nl.dot(dirs[j]) < 0) nl = -nl;
        cs.samples[j].tangent_normal_check = kc.l0_basis * nl.normalized();
      }
    }
    first_plane = false;
  }
  cs.convex = cs.min_second_difference > 0;
  return cs;
}

}  // namespace wolff
