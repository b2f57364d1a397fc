#include "wolff/dyadic.hpp"

#include <cmath>
#include <regex>

#include "wolff/error.hpp"

namespace wolff {

double Dyadic::value() const { return std::ldexp(1.0, -j); }

double Dyadic::sqrt() const {
  if (j % 2 == 0) return std::ldexp(1.0, -j / 2);
  return std::ldexp(1.0, -(j + 1) / 2) * std::sqrt(2.0);
}

std::string Dyadic::str() const { return "2^-" + std::to_string(j); }

Dyadic Dyadic::parse(const std::string& s) {
  static const std::regex re(R"(\s*2\^\(?(-?\d+)\)?\s*)");
  std::smatch m;
  if (std::regex_match(s, m, re)) {
    int e = std::stoi(m[1].str());
    return Dyadic(-e);
  }
  // plain numbers are accepted only when they are exact powers of two
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos == s.size() && v > 0) {
      int e = 0;
      double mant = std::frexp(v, &e);
      if (mant == 0.5) return Dyadic(1 - e);
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("scale must be dyadic, written 2^-j: '" + s + "'");
}

std::vector<Dyadic> Dyadic::parse_list(const std::string& s) {
  std::vector<Dyadic> out;
  auto dots = s.find("..");
  if (dots != std::string::npos) {
    Dyadic a = parse(s.substr(0, dots));
    Dyadic b = parse(s.substr(dots + 2));
    int step = a.j <= b.j ? 1 : -1;
    for (int j = a.j;; j += step) {
      out.emplace_back(j);
      if (j == b.j) break;
    }
    return out;
  }
  size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    std::string tok = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!tok.empty()) out.push_back(parse(tok));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("empty scale list");
  return out;
}

}  // namespace wolff
