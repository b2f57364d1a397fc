#include <cmath>
#include <numeric>
#include <sstream>

#include "wolff/error.hpp"
#include "wolff/experiments.hpp"

namespace wolff {

std::string to_string(const Rational& r) {
  std::ostringstream os;
  os << r.numerator();
  if (r.denominator() != 1) os << "/" << r.denominator();
  return os.str();
}

ExponentTable exponent_table(int d, int k) {
  if (d < 1 || k < 0 || k > d - 1) throw InputError("exponent table needs 0 <= k <= d-1, d >= 1");
  ExponentTable t;
  t.d = d;
  t.k = k;
  // k < d/3  <=>  3k < d
  t.p1_applicable = 3 * k < d;
  if (t.p1_applicable) t.p1 = Rational(2) + Rational(8, d - 3 * k);
  // k < (3d-3)/4  <=>  4k < 3d-3
  t.p2_applicable = 4 * k < 3 * d - 3;
  if (t.p2_applicable) t.p2 = Rational(2) + Rational(32, 3 * d - 4 * k - 3);
  t.best_p = Rational(2) + Rational(4, d - k);
  return t;
}

Rational ExponentTable::r(const Rational& p) const {
  return Rational(1) - Rational(2) / p - Rational(2) / (p * Rational(d - k));
}

Rational ExponentTable::alpha_min(const Rational& p) const {
  Rational a = Rational(1, 2) - Rational(1) / p;
  if (a < 0) a = -a;
  return Rational(d - k + 1) * a - Rational(1, 2);
}

Rational ExponentTable::theorem_exponent(const Rational& p) const {
  return Rational(d - k, 2) - Rational(d - k + 1) / p;
}

Rational ExponentTable::knapp_slope(const Rational& p) const {
  return Rational(d - k, 4) - Rational(d - k) / (Rational(2) * p);
}

std::optional<Rational> ExponentTable::dual(const std::optional<Rational>& p) const {
  if (!p) return std::nullopt;
  return *p / (*p - Rational(1));
}

std::string ExponentTable::note() const {
  if (!p1_applicable && !p2_applicable) return "inapplicable, see prior work";
  return "";
}

bool sharpness_identity(int d, int k) {
  ExponentTable t = exponent_table(d, k);
  return t.knapp_slope(t.best_p) == t.theorem_exponent(t.best_p);
}

RegressionResult scaling_fit(const ScalingSeries& s, double theory_slope, double tol) {
  if (s.deltas.size() != s.values.size()) throw InputError("series lengths differ");
  const size_t n = s.deltas.size();
  if (n < 3) throw InputError("regression needs at least 3 scales");
  RegressionResult r;
  r.theory_slope = theory_slope;
  r.tolerance = tol;
  for (size_t i = 0; i < n; ++i) {
    if (!(s.values[i] > 0) || !std::isfinite(s.values[i])) throw NumericError("non-positive value in series");
    r.x.push_back(static_cast<double>(s.deltas[i].j));
    r.y.push_back(std::log2(s.values[i]));
  }
  double mx = std::accumulate(r.x.begin(), r.x.end(), 0.0) / n;
  double my = std::accumulate(r.y.begin(), r.y.end(), 0.0) / n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (r.x[i] - mx) * (r.x[i] - mx);
    sxy += (r.x[i] - mx) * (r.y[i] - my);
  }
  if (sxx == 0) throw InputError("degenerate series: all scales equal");
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double rss = 0;
  for (size_t i = 0; i < n; ++i) {
    double e = r.y[i] - (r.intercept + r.slope * r.x[i]);
    rss += e * e;
  }
  r.stderr_slope = n > 2 ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
  r.verdict = std::abs(r.slope - theory_slope) <= tol;
  return r;
}

}  // namespace wolff
