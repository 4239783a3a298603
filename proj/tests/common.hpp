#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "pmhom/pmhom.hpp"

namespace testing_support {

using pmhom::Vec;

inline std::string source_path(const std::string& rel) { return std::string(PMHOM_SOURCE_DIR) + "/" + rel; }

inline std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline pmhom::ProblemDocument problem(const std::string& name, const std::map<std::string, std::string>& params = {}) {
  return pmhom::load_problem(read_text(source_path("problems/" + name + ".pm")), params);
}

inline Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Composite 8-point Gauss-Legendre on [lo, hi].
template <class F>
double gauss_legendre(F f, double lo, double hi, int panels) {
  static const double node[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
  static const double weight[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  double h = (hi - lo) / panels, sum = 0;
  for (int p = 0; p < panels; ++p) {
    double mid = lo + (p + 0.5) * h, half = 0.5 * h;
    for (int i = 0; i < 4; ++i) sum += weight[i] * half * (f(mid - half * node[i]) + f(mid + half * node[i]));
  }
  return sum;
}

// p = -(x1^3, x2^3), Q = 2|x|^2, w = x1^2 x2^2: phi_i = x_i / sqrt(1 + 2 x_i^2 t) and
// M^{-1} w(phi) = u v / ((1 + 2ut)(1 + 2vt))^2, so h = -u v int_0^inf ((1+2ut)(1+2vt))^{-2} dt.
inline double ex3_by_quadrature(const Vec& x) {
  const double u = x(0) * x(0), v = x(1) * x(1);
  auto integrand = [&](double s) {
    double t = s / (1 - s);
    double g = (1 + 2 * u * t) * (1 + 2 * v * t);
    return 1.0 / (g * g) / ((1 - s) * (1 - s));
  };
  return -u * v * gauss_legendre(integrand, 0.0, 1.0, 4000);
}

// p = (-x1^2, -a x1 x2), Q = b x1.
inline Vec ex2_phi(double a, const Vec& x, double t) { return vec2(x(0) / (1 + x(0) * t), x(1) * std::pow(1 + x(0) * t, -a)); }
inline double ex2_minv(double b, const Vec& x, double t) { return std::pow(1 + x(0) * t, -b); }

inline double rel(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

// Polar points at radius r away from the band |x2^2 - x1^2| <= band |x|^2.
inline std::vector<Vec> ex3_points(int count, double r, double band) {
  std::vector<Vec> out;
  for (int i = 0; static_cast<int>(out.size()) < count; ++i) {
    double th = 0.05 + i * 0.618034 * 2 * M_PI;
    Vec x = vec2(r * std::cos(th), r * std::sin(th));
    if (std::abs(x(1) * x(1) - x(0) * x(0)) > band * x.squaredNorm() && std::abs(x(0) * x(1)) > 1e-3 * r * r)
      out.push_back(x);
  }
  return out;
}

}  // namespace testing_support
