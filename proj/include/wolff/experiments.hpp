#pragma once

#include <boost/rational.hpp>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wolff/dyadic.hpp"

namespace wolff {

using Rational = boost::rational<long long>;

std::string to_string(const Rational& r);

struct ExponentTable {
  int d = 0, k = 0;
  bool p1_applicable = false;
  bool p2_applicable = false;
  std::optional<Rational> p1, p2;
  Rational best_p;

  Rational r(const Rational& p) const;          // 1 - 2/p - 2/(p(d-k))
  Rational alpha_min(const Rational& p) const;  // (d-k+1)|1/2 - 1/p| - 1/2
  // (d-k)/2 - (d-k+1)/p, the decoupling exponent at best_p
  Rational theorem_exponent(const Rational& p) const;
  // (d-k)/4 - (d-k)/(2p), slope of the Knapp ratio
  Rational knapp_slope(const Rational& p) const;
  // dual exponent bound p_i/(p_i-1) for the multiplier corollary
  std::optional<Rational> dual(const std::optional<Rational>& p) const;
  std::string note() const;
};

ExponentTable exponent_table(int d, int k);

struct ScalingSeries {
  std::vector<Dyadic> deltas;
  std::vector<double> values;
};

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  double theory_slope = 0.0;
  double tolerance = 0.15;
  bool verdict = false;
  std::vector<double> x, y;  // -log2 delta, log2 value
};

// least squares of log2(value) against -log2(delta)
RegressionResult scaling_fit(const ScalingSeries& s, double theory_slope = 0.0, double tol = 0.15);

// knapp_slope(best_p) == theorem_exponent(best_p), exactly
bool sharpness_identity(int d, int k);

class SurfaceModel;

struct SharpnessConfig {
  int p = 4;
  std::vector<Dyadic> deltas;
  int seeds = 10;
  std::uint64_t seed0 = 1;
  bool random_phase = true;
  double tol = 0.15;
  int nu = 4;
  double budget_bytes = 4e9;  // projected grid footprint N^D * 16 * 3 must fit
};

struct SharpnessRow {
  Dyadic delta;
  int M = 0;
  int skipped = 0;
  double ratio = 0.0;     // geometric mean over seeds of ||f||_p / ||f||_{p,delta}
  double ratio_min = 0.0, ratio_max = 0.0;
  double lp = 0.0;        // geometric means of the two norms
  double lp_delta = 0.0;
  double seconds = 0.0;
};

struct SharpnessResult {
  int d = 0, k = 0, p = 0;
  RegressionResult fit;
  std::vector<SharpnessRow> rows;
  bool identity = false;
};

// Knapp ratio ||f||_p / ||f||_{p,delta} against -log2 delta; p even, norms by exact moments
SharpnessResult sharpness_experiment(std::shared_ptr<const SurfaceModel> model, const SharpnessConfig& cfg);

}  // namespace wolff
