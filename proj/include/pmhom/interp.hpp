#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "pmhom/domain.hpp"
#include "pmhom/error.hpp"
#include "pmhom/settings.hpp"

namespace pmhom {

// Interpolation along one chart coordinate.  Spectral: Chebyshev points of the
// first kind (interior, so every node lies in the open cross-section) or
// equispaced trigonometric nodes on periodic axes.  Cubic: not-a-knot or
// periodic spline through cell-centred uniform nodes.
class Axis1D {
 public:
  Axis1D() = default;
  Axis1D(ChartAxis axis, int count, InterpScheme scheme) : axis_(axis), scheme_(scheme) {
    constexpr double pi = std::numbers::pi;
    if (count < 4) count = 4;
    if (axis.periodic && scheme == InterpScheme::spectral && count % 2 == 0) ++count;
    const double width = axis.hi - axis.lo;
    nodes_.resize(count);
    if (scheme == InterpScheme::spectral && !axis.periodic) {
      weights_.resize(count);
      for (int j = 0; j < count; ++j) {
        double a = (2.0 * j + 1.0) * pi / (2.0 * count);
        nodes_[j] = axis.lo + 0.5 * width * (1.0 - std::cos(a));
        weights_[j] = ((j % 2 == 0) ? 1.0 : -1.0) * std::sin(a);
      }
    } else {
      for (int j = 0; j < count; ++j) nodes_[j] = axis.lo + (j + 0.5) * width / count;
      if (scheme == InterpScheme::cubic) build_spline();
    }
  }

  const std::vector<double>& nodes() const { return nodes_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const ChartAxis& axis() const { return axis_; }

  bool covers(double theta) const {
    if (axis_.periodic) return true;
    double slack = 1e-3 * (axis_.hi - axis_.lo);
    return theta >= axis_.lo - slack && theta <= axis_.hi + slack;
  }

  double wrap(double theta) const {
    if (!axis_.periodic) return theta;
    double period = axis_.hi - axis_.lo;
    double t = std::fmod(theta - axis_.lo, period);
    if (t < 0) t += period;
    return axis_.lo + t;
  }

  // Lagrange-type basis values at theta (sum to one).
  void basis(double theta, std::vector<double>& out) const {
    if (!covers(theta)) throw StaleInterpolant("chart coordinate outside the covered patch");
    theta = wrap(theta);
    const int n = size();
    out.assign(n, 0.0);
    if (scheme_ == InterpScheme::cubic) {
      spline_basis(theta, out);
      return;
    }
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      double diff = theta - nodes_[j];
      if (axis_.periodic) {
        double period = axis_.hi - axis_.lo;
        diff = std::sin(std::numbers::pi * diff / period);
      }
      if (std::abs(diff) < 1e-15) {
        out.assign(n, 0.0);
        out[j] = 1.0;
        return;
      }
      double w = axis_.periodic ? ((j % 2 == 0) ? 1.0 : -1.0) / diff : weights_[j] / diff;
      out[j] = w;
      total += w;
    }
    for (double& v : out) v /= total;
  }

  // Estimated max interpolation error from data at the nodes.
  double error_estimate(std::span<const double> f) const {
    const int n = size();
    double scale = 0.0;
    for (double v : f) scale = std::max(scale, std::abs(v));
    double floor = 1e-15 * scale * n;
    if (scheme_ == InterpScheme::cubic) {
      double worst = 0.0;
      for (int j = 0; j + 4 < n; ++j) {
        double d4 = f[j] - 4 * f[j + 1] + 6 * f[j + 2] - 4 * f[j + 3] + f[j + 4];
        worst = std::max(worst, std::abs(d4));
      }
      return 5.0 / 384.0 * worst + floor;
    }
    // Trailing expansion coefficients (Chebyshev or Fourier).
    std::vector<double> mag(n, 0.0);
    constexpr double pi = std::numbers::pi;
    if (!axis_.periodic) {
      for (int k = 0; k < n; ++k) {
        double c = 0.0;
        for (int j = 0; j < n; ++j) c += f[j] * std::cos(k * (2.0 * j + 1.0) * pi / (2.0 * n));
        mag[k] = std::abs(2.0 * c / n);
      }
    } else {
      for (int k = 0; k <= n / 2; ++k) {
        double re = 0.0, im = 0.0;
        for (int j = 0; j < n; ++j) {
          re += f[j] * std::cos(2.0 * pi * k * j / n);
          im += f[j] * std::sin(2.0 * pi * k * j / n);
        }
        mag[k] = 2.0 * std::hypot(re, im) / n;
      }
      mag.resize(n / 2 + 1);
    }
    int m = static_cast<int>(mag.size());
    int from = m - std::max(2, m / 8);
    double tail = 0.0;
    for (int k = from; k < m; ++k) tail += mag[k];
    return 2.0 * tail + floor;
  }

 private:
  void build_spline() {
    const int n = size();
    const double h = nodes_[1] - nodes_[0];
    Mat A = Mat::Zero(n, n);
    Mat B = Mat::Zero(n, n);
    auto idx = [n](int i) { return ((i % n) + n) % n; };
    for (int i = 0; i < n; ++i) {
      bool interior = i > 0 && i < n - 1;
      if (axis_.periodic || interior) {
        A(i, idx(i - 1)) += 1.0;
        A(i, i) += 4.0;
        A(i, idx(i + 1)) += 1.0;
        B(i, idx(i - 1)) += 6.0 / (h * h);
        B(i, i) -= 12.0 / (h * h);
        B(i, idx(i + 1)) += 6.0 / (h * h);
      } else if (i == 0) {
        A(0, 0) = 1.0;
        A(0, 1) = -2.0;
        A(0, 2) = 1.0;
      } else {
        A(i, n - 3) = 1.0;
        A(i, n - 2) = -2.0;
        A(i, n - 1) = 1.0;
      }
    }
    second_ = A.partialPivLu().solve(B);
    h_ = h;
  }

  void spline_basis(double theta, std::vector<double>& out) const {
    const int n = size();
    int i;
    int i1;
    double a;
    if (axis_.periodic) {
      double s = (theta - nodes_[0]) / h_;
      int k = static_cast<int>(std::floor(s));
      a = 1.0 - (s - k);
      i = ((k % n) + n) % n;
      i1 = (i + 1) % n;
    } else {
      double s = (theta - nodes_[0]) / h_;
      int k = std::clamp(static_cast<int>(std::floor(s)), 0, n - 2);
      a = 1.0 - (s - k);
      i = k;
      i1 = k + 1;
    }
    double b = 1.0 - a;
    double ca = (a * a * a - a) * h_ * h_ / 6.0;
    double cb = (b * b * b - b) * h_ * h_ / 6.0;
    out[i] += a;
    out[i1] += b;
    for (int j = 0; j < n; ++j) out[j] += ca * second_(i, j) + cb * second_(i1, j);
  }

  ChartAxis axis_{0.0, 1.0, false};
  InterpScheme scheme_ = InterpScheme::spectral;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  Mat second_;
  double h_ = 0.0;
};

}  // namespace pmhom
