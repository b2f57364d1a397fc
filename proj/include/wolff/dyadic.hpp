#pragma once

#include <string>
#include <vector>

namespace wolff {

// a scale 2^-j, kept as the integer exponent so it never drifts
struct Dyadic {
  int j = 0;

  Dyadic() = default;
  explicit Dyadic(int exponent) : j(exponent) {}

  double value() const;
  double sqrt() const;  // 2^{-j/2}
  std::string str() const;

  static Dyadic parse(const std::string& s);
  // "2^-3..2^-6" or comma separated list
  static std::vector<Dyadic> parse_list(const std::string& s);

  bool operator==(const Dyadic& o) const { return j == o.j; }
  bool operator<(const Dyadic& o) const { return j > o.j; }  // smaller scale
};

}  // namespace wolff
