#include <cmath>
#include <random>

#include "doctest.h"
#include "wolff/error.hpp"
#include "wolff/experiments.hpp"
#include "wolff/surfaces.hpp"

using namespace wolff;

TEST_CASE("exponent table values") {
  auto t41 = exponent_table(4, 1);
  REQUIRE(t41.p1_applicable);
  CHECK(*t41.p1 == Rational(10));

  auto t31 = exponent_table(3, 1);
  CHECK(!t31.p1_applicable);
  CHECK(!t31.p1);
  REQUIRE(t31.p2_applicable);
  CHECK(*t31.p2 == Rational(18));
  CHECK(t31.best_p == Rational(4));
  CHECK(t31.r(Rational(4)) == Rational(1, 4));

  CHECK(exponent_table(2, 0).best_p == Rational(4));

  auto t21 = exponent_table(2, 1);
  CHECK(!t21.p1_applicable);
  CHECK(!t21.p2_applicable);
  CHECK(t21.note() == "inapplicable, see prior work");

  CHECK_THROWS_AS(exponent_table(2, 2), InputError);
  CHECK_THROWS_AS(exponent_table(0, 0), InputError);
}

TEST_CASE("exponent table against a float oracle") {
  for (int d = 1; d <= 9; ++d)
    for (int k = 0; k < d; ++k) {
      auto t = exponent_table(d, k);
      CHECK(t.p1_applicable == (k < d / 3.0));
      CHECK(t.p2_applicable == (k < (3.0 * d - 3) / 4.0));
      if (t.p1) CHECK(boost::rational_cast<double>(*t.p1) == doctest::Approx(2 + 8.0 / (d - 3 * k)));
      if (t.p2) CHECK(boost::rational_cast<double>(*t.p2) == doctest::Approx(2 + 32.0 / (3 * d - 4 * k - 3)));
      double bp = 2 + 4.0 / (d - k);
      CHECK(boost::rational_cast<double>(t.best_p) == doctest::Approx(bp));
      // best_p below every applicable threshold
      if (t.p1) CHECK(t.best_p <= *t.p1);
      if (t.p2) CHECK(t.best_p <= *t.p2);
      for (double p : {2.0, 3.0, 4.5, 7.0}) {
        Rational rp(static_cast<long long>(p * 2), 2);
        CHECK(boost::rational_cast<double>(t.r(rp)) == doctest::Approx(1 - 2 / p - 2 / (p * (d - k))));
        CHECK(boost::rational_cast<double>(t.alpha_min(rp)) ==
              doctest::Approx((d - k + 1) * std::abs(0.5 - 1 / p) - 0.5));
      }
    }
}

TEST_CASE("alpha_min is exact") {
  auto t = exponent_table(3, 1);
  CHECK(t.alpha_min(Rational(4)) == Rational(1, 4));
  CHECK(t.alpha_min(Rational(2)) == Rational(-1, 2));
  CHECK(t.alpha_min(Rational(4, 3)) == Rational(1, 4));
  auto d = t.dual(t.p2);
  REQUIRE(d);
  CHECK(*d == Rational(18, 17));
}

TEST_CASE("sharpness identity holds for every codimension") {
  for (int dk = 1; dk <= 6; ++dk)
    for (int k = 0; k <= 3; ++k) CHECK(sharpness_identity(dk + k, k));
}

TEST_CASE("scaling fit") {
  ScalingSeries s;
  for (int j = 3; j <= 8; ++j) {
    s.deltas.emplace_back(j);
    s.values.push_back(3.0 * std::pow(2.0, 0.75 * j));
  }
  auto r = scaling_fit(s, 0.75);
  CHECK(std::abs(r.slope - 0.75) < 1e-12);
  CHECK(r.stderr_slope < 1e-12);
  CHECK(r.verdict);

  ScalingSeries c;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 0.01);
  for (int j = 3; j <= 8; ++j) {
    c.deltas.emplace_back(j);
    c.values.push_back(5.0 * std::exp(g(rng)));
  }
  auto rc = scaling_fit(c, 0.0);
  CHECK(std::abs(rc.slope) <= 4 * rc.stderr_slope + 1e-12);
  CHECK(std::isfinite(rc.stderr_slope));

  ScalingSeries two;
  two.deltas = {Dyadic(3), Dyadic(4)};
  two.values = {1, 2};
  CHECK_THROWS_AS(scaling_fit(two), InputError);
  ScalingSeries flat;
  flat.deltas = {Dyadic(3), Dyadic(3), Dyadic(3)};
  flat.values = {1, 2, 3};
  CHECK_THROWS_AS(scaling_fit(flat), InputError);
  flat.deltas = {Dyadic(3), Dyadic(4), Dyadic(5)};
  flat.values = {1, 0, 3};
  CHECK_THROWS_AS(scaling_fit(flat), NumericError);
}

TEST_CASE("sharpness experiment, cone p=4") {
  auto S = std::make_shared<const SurfaceModel>(SurfaceModel::circular_cone(1.0, 1.5));
  SharpnessConfig c;
  c.p = 4;
  c.deltas = Dyadic::parse_list("2^-3..2^-5");
  c.seeds = 4;
  auto r = sharpness_experiment(S, c);
  REQUIRE(r.rows.size() == 3);
  CHECK(r.identity);
  CHECK(r.fit.theory_slope == doctest::Approx(0.125));
  CHECK(std::abs(r.fit.slope - 0.125) <= 0.15);
  for (const auto& row : r.rows) {
    CHECK(row.ratio >= row.ratio_min - 1e-12);
    CHECK(row.ratio <= row.ratio_max + 1e-12);
    // ||f||_{p,delta}^p is within a factor 2 of M
    CHECK(std::pow(row.lp_delta, 4) >= 0.5 * row.M);
    CHECK(std::pow(row.lp_delta, 4) <= 2.0 * row.M);
  }
}

TEST_CASE("sharpness experiment refuses over budget") {
  auto S = std::make_shared<const SurfaceModel>(SurfaceModel::circular_cone(1.0, 1.5));
  SharpnessConfig c;
  c.deltas = Dyadic::parse_list("2^-3..2^-9");
  c.budget_bytes = 1e8;
  CHECK_THROWS_AS(sharpness_experiment(S, c), BudgetError);
  c.deltas = Dyadic::parse_list("2^-3..2^-4");
  CHECK_THROWS_AS(sharpness_experiment(S, c), ConfigError);
  c.deltas = Dyadic::parse_list("2^-3..2^-5");
  c.p = 5;
  CHECK_THROWS_AS(sharpness_experiment(S, c), ConfigError);
}
