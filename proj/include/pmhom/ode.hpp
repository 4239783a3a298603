#pragma once

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "pmhom/error.hpp"
#include "pmhom/poly.hpp"

namespace pmhom {

using OdeRhs = std::function<void(double t, const Vec& y, Vec& dy)>;

// Contiguous state blocks sharing an error scale: errors in a block are
// measured against rtol * (|y_i| + 1e-6 * max_block |y|).
struct StateBlock {
  int offset;
  int size;
};

// Dormand-Prince 5(4) with FSAL and PI-free step control.
class DormandPrince {
 public:
  DormandPrince(OdeRhs rhs, int dim, double rtol, std::vector<StateBlock> blocks)
      : rhs_(std::move(rhs)), rtol_(rtol), blocks_(std::move(blocks)) {
    if (blocks_.empty()) blocks_.push_back({0, dim});
    for (auto& k : k_) k.resize(dim);
    ytmp_.resize(dim);
    ynew_.resize(dim);
  }

  double step_size() const { return h_; }
  long steps() const { return steps_; }

  // Advances y from t to t_end; `on_step` sees every accepted (t, y).
  void integrate(double& t, Vec& y, double t_end, const std::function<void(double, const Vec&)>& on_step = {}) {
    if (t_end <= t) return;
    if (!fsal_valid_) {
      rhs_(t, y, k_[0]);
      fsal_valid_ = true;
    }
    if (h_ <= 0) h_ = initial_step(t, y, t_end);
    while (t < t_end) {
      double h = std::min(h_, t_end - t);
      bool last = h >= t_end - t;
      attempt(t, y, h);
      double err = error_norm(y);
      if (!std::isfinite(err)) err = 1e10;
      if (err <= 1.0) {
        t = last ? t_end : t + h;
        std::swap(y, ynew_);
        std::swap(k_[0], k_[6]);
        ++steps_;
        if (on_step) on_step(t, y);
        double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        if (!last || h == h_) h_ = h * fac;
      } else {
        h_ = h * std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
        if (h_ < 1e-14 * std::max(1.0, std::abs(t)))
          throw StepUnderflow(fmt::format("step size underflow at t = {:.6g}", t));
      }
      if (steps_ > 50'000'000) throw StepUnderflow("step budget exhausted");
    }
  }

 private:
  double initial_step(double t, const Vec& y, double t_end) const {
    double scale = std::max(y.cwiseAbs().maxCoeff(), 1e-300);
    double rate = std::max(k_[0].cwiseAbs().maxCoeff(), 1e-300);
    return std::min(t_end - t, 0.01 * std::pow(rtol_, 0.2) * scale / rate);
  }

  void attempt(double t, const Vec& y, double h) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    ytmp_ = y + h * a21 * k_[0];
    rhs_(t + h / 5, ytmp_, k_[1]);
    ytmp_ = y + h * (a31 * k_[0] + a32 * k_[1]);
    rhs_(t + 3 * h / 10, ytmp_, k_[2]);
    ytmp_ = y + h * (a41 * k_[0] + a42 * k_[1] + a43 * k_[2]);
    rhs_(t + 4 * h / 5, ytmp_, k_[3]);
    ytmp_ = y + h * (a51 * k_[0] + a52 * k_[1] + a53 * k_[2] + a54 * k_[3]);
    rhs_(t + 8 * h / 9, ytmp_, k_[4]);
    ytmp_ = y + h * (a61 * k_[0] + a62 * k_[1] + a63 * k_[2] + a64 * k_[3] + a65 * k_[4]);
    rhs_(t + h, ytmp_, k_[5]);
    ynew_ = y + h * (b1 * k_[0] + b3 * k_[2] + b4 * k_[3] + b5 * k_[4] + b6 * k_[5]);
    rhs_(t + h, ynew_, k_[6]);
    err_ = h * (e1 * k_[0] + e3 * k_[2] + e4 * k_[3] + e5 * k_[4] + e6 * k_[5] + e7 * k_[6]);
  }

  double error_norm(const Vec& y) const {
    double worst = 0.0;
    for (const auto& b : blocks_) {
      double bmax = std::max(y.segment(b.offset, b.size).cwiseAbs().maxCoeff(),
                             ynew_.segment(b.offset, b.size).cwiseAbs().maxCoeff());
      for (int i = b.offset; i < b.offset + b.size; ++i) {
        double sc = rtol_ * (std::max(std::abs(y(i)), std::abs(ynew_(i))) + 1e-6 * bmax) + 1e-300;
        worst = std::max(worst, std::abs(err_(i)) / sc);
      }
    }
    return worst;
  }

  OdeRhs rhs_;
  double rtol_;
  std::vector<StateBlock> blocks_;
  Vec k_[7];
  Vec ytmp_, ynew_, err_;
  double h_ = 0.0;
  bool fsal_valid_ = false;
  long steps_ = 0;
};

}  // namespace pmhom
