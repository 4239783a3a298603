#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "pmhom/error.hpp"
#include "pmhom/poly.hpp"

namespace pmhom {

enum class NormKind { max, euclidean };

inline std::string to_string(NormKind k) { return k == NormKind::max ? "max" : "euclidean"; }

// Max or Euclidean norm, optionally composed with a positive diagonal weight.
struct Norm {
  NormKind kind = NormKind::euclidean;
  std::vector<double> weights;

  bool weighted() const { return !weights.empty(); }

  double operator()(const Vec& x) const {
    if (!weighted()) return kind == NormKind::max ? x.lpNorm<Eigen::Infinity>() : x.norm();
    Vec y = x;
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) *= weights.at(i);
    return kind == NormKind::max ? y.lpNorm<Eigen::Infinity>() : y.norm();
  }

  // Induced operator norm: max row sum or largest singular value.
  double op(const Mat& A) const {
    Mat B = A;
    if (weighted())
      for (Eigen::Index i = 0; i < B.rows(); ++i)
        for (Eigen::Index j = 0; j < B.cols(); ++j) B(i, j) *= weights.at(i) / weights.at(j);
    if (kind == NormKind::max) return B.cwiseAbs().rowwise().sum().maxCoeff();
    if (B.rows() == 1 && B.cols() == 1) return std::abs(B(0, 0));
    Eigen::JacobiSVD<Mat> svd(B);
    return svd.singularValues()(0);
  }

  bool operator==(const Norm&) const = default;
};

enum class ConeKind { sector, halfspace, punctured };

inline std::string to_string(ConeKind k) {
  switch (k) {
    case ConeKind::sector: return "sector";
    case ConeKind::halfspace: return "halfspace";
    case ConeKind::punctured: return "punctured";
  }
  return "?";
}

struct ChartAxis {
  double lo;
  double hi;
  bool periodic;
};

// Star-shaped cone V intersected with the ball of radius rho.  Built-in cones:
//   sector     {|x_rest|_2 < kappa x1}
//   halfspace  {x1 > 0}
//   punctured  R^n minus the origin
// For n = 1 sector and halfspace both mean x > 0.
class DomainSpec {
 public:
  DomainSpec() = default;
  DomainSpec(int n, ConeKind cone, double rho, Norm norm_x, Norm norm_y, double kappa = 1.0)
      : n_(n), cone_(cone), kappa_(kappa), rho_(rho), norm_x_(std::move(norm_x)),
        norm_y_(std::move(norm_y)) {
    if (n < 1) throw ValidationError("domain dimension must be positive");
    if (!(rho > 0)) throw ValidationError("rho must be positive");
    if (cone == ConeKind::sector && !(kappa > 0)) throw ValidationError("sector kappa must be positive");
    for (const Norm* nm : {&norm_x_, &norm_y_})
      for (double w : nm->weights)
        if (!(w > 0)) throw ValidationError("norm weights must be positive");
    if (norm_x_.weighted() && static_cast<int>(norm_x_.weights.size()) != n)
      throw ValidationError("x-norm weight count differs from n");
  }

  int n() const { return n_; }
  ConeKind cone() const { return cone_; }
  double kappa() const { return kappa_; }
  double rho() const { return rho_; }
  const Norm& norm_x() const { return norm_x_; }
  const Norm& norm_y() const { return norm_y_; }

  DomainSpec with_rho(double rho) const {
    DomainSpec d = *this;
    d.rho_ = rho;
    return d;
  }

  bool in_cone(const Vec& x) const {
    switch (cone_) {
      case ConeKind::sector:
        if (n_ == 1) return x(0) > 0;
        return x.tail(n_ - 1).norm() < kappa_ * x(0);
      case ConeKind::halfspace: return x(0) > 0;
      case ConeKind::punctured: return x.cwiseAbs().maxCoeff() > 0;
    }
    return false;
  }

  bool contains(const Vec& x) const { return in_cone(x) && norm_x_(x) < rho_; }

  // dist(x, V^c) for the cone alone, in norm_x.
  double cone_distance(const Vec& x) const {
    if (!in_cone(x)) return 0.0;
    if (!norm_x_.weighted()) {
      switch (cone_) {
        case ConeKind::punctured: return norm_x_(x);
        case ConeKind::halfspace: return x(0);
        case ConeKind::sector: {
          if (n_ == 1) return x(0);
          double s = kappa_ * x(0) - x.tail(n_ - 1).norm();
          if (n_ == 2 && norm_x_.kind == NormKind::max) return s / (1.0 + kappa_);
          if (norm_x_.kind == NormKind::euclidean) return s / std::sqrt(1.0 + kappa_ * kappa_);
          break;
        }
      }
    }
    return bisect_distance(x, [this](const Vec& z) { return in_cone(z); });
  }

  // dist(x, (V_rho)^c); positive iff x is a member.
  double boundary_distance(const Vec& x) const {
    if (!contains(x)) return 0.0;
    return std::min(cone_distance(x), rho_ - norm_x_(x));
  }

  // Directional bisection estimate of the distance to the complement of `member`.
  template <class Pred>
  double bisect_distance(const Vec& x, Pred member, int directions = 40) const {
    double best = std::numeric_limits<double>::infinity();
    double scale = std::max(norm_x_(x), 1e-300);
    for (int k = 0; k < directions; ++k) {
      Vec d = probe_direction(k, directions);
      d /= norm_x_(d);
      double lo = 0.0, hi = scale;
      int grow = 0;
      while (member(x + hi * d) && grow < 60) {
        lo = hi;
        hi *= 2.0;
        ++grow;
      }
      if (grow == 60) continue;
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        (member(x + mid * d) ? lo : hi) = mid;
      }
      best = std::min(best, hi);
    }
    return best;
  }

  // Chart of the cross-section {x in V : |x| = 1}.  Empty for n = 1.
  std::vector<ChartAxis> chart_axes() const {
    constexpr double pi = std::numbers::pi;
    std::vector<ChartAxis> axes;
    if (n_ == 1) return axes;
    if (n_ == 2) {
      switch (cone_) {
        case ConeKind::sector: axes.push_back({-std::atan(kappa_), std::atan(kappa_), false}); break;
        case ConeKind::halfspace: axes.push_back({-pi / 2, pi / 2, false}); break;
        case ConeKind::punctured: axes.push_back({-pi, pi, true}); break;
      }
      return axes;
    }
    double polar = cone_ == ConeKind::sector ? std::atan(kappa_)
                   : cone_ == ConeKind::halfspace ? pi / 2 : pi;
    axes.push_back({0.0, polar, false});
    for (int i = 2; i < n_ - 1; ++i) axes.push_back({0.0, pi, false});
    axes.push_back({-pi, pi, true});
    return axes;
  }

  // Directions of the cross-section for n = 1.
  std::vector<double> line_signs() const {
    if (cone_ == ConeKind::punctured) return {-1.0, 1.0};
    return {1.0};
  }

  // Euclidean unit vector for chart coordinates.
  Vec euclidean_direction(const std::vector<double>& theta) const {
    Vec e(n_);
    if (n_ == 2) {
      e << std::cos(theta[0]), std::sin(theta[0]);
      return e;
    }
    double s = 1.0;
    for (int i = 0; i < n_ - 1; ++i) {
      e(i) = s * std::cos(theta[i]);
      s *= std::sin(theta[i]);
    }
    e(n_ - 1) = s;
    return e;
  }

  // Unit vector in norm_x for chart coordinates.
  Vec direction(const std::vector<double>& theta) const {
    Vec e = euclidean_direction(theta);
    return e / norm_x_(e);
  }

  std::vector<double> chart_coords(const Vec& x) const {
    std::vector<double> theta;
    if (n_ == 2) {
      theta.push_back(std::atan2(x(1), x(0)));
      return theta;
    }
    for (int i = 0; i < n_ - 2; ++i) theta.push_back(std::atan2(x.tail(n_ - 1 - i).norm(), x(i)));
    theta.push_back(std::atan2(x(n_ - 1), x(n_ - 2)));
    return theta;
  }

  bool operator==(const DomainSpec&) const = default;

 private:
  Vec probe_direction(int k, int count) const {
    Vec d(n_);
    if (n_ == 1) {
      d(0) = (k % 2 == 0) ? 1.0 : -1.0;
      return d;
    }
    if (n_ == 2) {
      double a = 2.0 * std::numbers::pi * (k + 0.5) / count;
      d << std::cos(a), std::sin(a);
      return d;
    }
    // Golden-ratio spiral on the sphere, deterministic.
    const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
    double z = 1.0 - 2.0 * (k + 0.5) / count;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = 2.0 * std::numbers::pi * k / golden;
    d.setZero();
    d(0) = z;
    d(1) = r * std::cos(phi);
    d(2) = r * std::sin(phi);
    for (int i = 3; i < n_; ++i) d(i) = std::sin((i + 1.0) * (k + 1.0));
    return d;
  }

  int n_ = 1;
  ConeKind cone_ = ConeKind::sector;
  double kappa_ = 1.0;
  double rho_ = 1.0;
  Norm norm_x_;
  Norm norm_y_;
};

}  // namespace pmhom
