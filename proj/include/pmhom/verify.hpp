#pragma once

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "pmhom/domain.hpp"
#include "pmhom/error.hpp"
#include "pmhom/poly.hpp"
#include "pmhom/settings.hpp"

namespace pmhom {

struct SlopeFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = 0;
  double r2 = 0;
  int points = 0;
};

// Least squares log|value| = intercept + slope log(radius), points below `floor` dropped.
inline SlopeFit fit_slope(const std::vector<double>& radii, const std::vector<double>& values, double floor) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < radii.size(); ++i)
    if (values[i] > floor && std::isfinite(values[i])) {
      lx.push_back(std::log(radii[i]));
      ly.push_back(std::log(values[i]));
    }
  SlopeFit fit;
  fit.points = static_cast<int>(lx.size());
  if (fit.points < 3) return fit;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= lx.size();
  my /= ly.size();
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

// Unit directions spread over the cross-section, the outermost `inset` away from its boundary.
inline std::vector<Vec> residual_rays(const DomainSpec& domain, int count, double inset) {
  std::vector<Vec> rays;
  if (domain.n() == 1) {
    for (double s : domain.line_signs()) {
      Vec u(1);
      u(0) = s;
      rays.push_back(u / domain.norm_x()(u));
    }
    return rays;
  }
  auto axes = domain.chart_axes();
  if (axes.size() == 1) {
    const ChartAxis& ax = axes[0];
    for (int i = 0; i < count; ++i) {
      double theta = ax.periodic ? ax.lo + (ax.hi - ax.lo) * (i + 0.25) / count
                                 : ax.lo + inset + (ax.hi - ax.lo - 2 * inset) * i / std::max(1, count - 1);
      rays.push_back(domain.direction({theta}));
    }
    return rays;
  }
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < count; ++i) {
    std::vector<double> theta(axes.size());
    for (std::size_t a = 0; a < axes.size(); ++a) {
      double frac = i == 0 ? 0.0 : i == 1 ? 1.0 : std::fmod((i + 0.5) * golden * (a + 1) + 0.37 * a, 1.0);
      double pad = axes[a].periodic ? 0.0 : inset;
      theta[a] = axes[a].lo + pad + (axes[a].hi - axes[a].lo - 2 * pad) * frac;
    }
    rays.push_back(domain.direction(theta));
  }
  return rays;
}

inline std::vector<double> residual_radii(double rho, int count = 10, double ratio = 0.7) {
  std::vector<double> r;
  double v = 0.5 * rho;
  for (int i = 0; i < count; ++i, v *= ratio) r.push_back(v);
  return r;
}

enum class ResidualVerdict { pass, log_suspect, floor, fail };

inline std::string to_string(ResidualVerdict v) {
  switch (v) {
    case ResidualVerdict::pass: return "pass";
    case ResidualVerdict::log_suspect: return "pass (log-suspect)";
    case ResidualVerdict::floor: return "pass (residual at machine floor)";
    case ResidualVerdict::fail: return "fail";
  }
  return "?";
}

struct RaySample {
  int ray;
  double radius;
  double residual;
};

struct ResidualReport {
  std::string block;
  double target = 0;
  double margin = 0.9;
  std::vector<Vec> rays;
  std::vector<double> radii;
  std::vector<SlopeFit> fits;
  std::vector<RaySample> samples;
  double min_slope = std::numeric_limits<double>::quiet_NaN();
  ResidualVerdict verdict = ResidualVerdict::fail;

  bool passed() const { return verdict != ResidualVerdict::fail; }
};

// Residual norms along rays and the fitted decay order per ray.  Each phase is
// a separate sample set; the per-ray slope is the minimum over phases.
inline ResidualReport residual_order(const std::function<Vec(const Vec&, double)>& residual, const DomainSpec& domain,
                                     double target, const Tolerances& tol, const std::string& block,
                                     const std::vector<double>& phases = {0.0}) {
  ResidualReport rep;
  rep.block = block;
  rep.target = target;
  rep.margin = tol.slope_margin;
  rep.rays = residual_rays(domain, tol.rays, tol.ray_inset);
  rep.radii = residual_radii(domain.rho());
  bool any_fit = false;
  for (int k = 0; k < static_cast<int>(rep.rays.size()); ++k) {
    SlopeFit worst;
    for (double t : phases) {
      std::vector<double> vals;
      for (double r : rep.radii) {
        double v = residual(r * rep.rays[k], t).norm();
        vals.push_back(v);
        rep.samples.push_back({k, r, v});
      }
      SlopeFit fit = fit_slope(rep.radii, vals, tol.residual_floor);
      if (fit.points >= 3 && (std::isnan(worst.slope) || fit.slope < worst.slope)) worst = fit;
    }
    if (!std::isnan(worst.slope)) {
      any_fit = true;
      if (std::isnan(rep.min_slope) || worst.slope < rep.min_slope) rep.min_slope = worst.slope;
    }
    rep.fits.push_back(worst);
  }
  if (!any_fit) rep.verdict = ResidualVerdict::floor;
  else if (rep.min_slope >= target + tol.slope_margin) rep.verdict = ResidualVerdict::pass;
  else if (rep.min_slope > target + std::min(0.1, tol.slope_margin - 0.1)) rep.verdict = ResidualVerdict::log_suspect;
  else rep.verdict = ResidualVerdict::fail;
  return rep;
}

inline std::string residual_csv(const ResidualReport& rep) {
  std::string out = "block,ray,radius,residual\n";
  for (const auto& s : rep.samples) out += fmt::format("{},{},{:.6e},{:.6e}\n", rep.block, s.ray, s.radius, s.residual);
  return out;
}

}  // namespace pmhom
