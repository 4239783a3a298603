#pragma once

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "pmhom/domain.hpp"
#include "pmhom/error.hpp"
#include "pmhom/model.hpp"
#include "pmhom/poly.hpp"
#include "pmhom/settings.hpp"

namespace pmhom {

struct Extremum {
  double value = 0.0;
  Vec witness;
};

// Radial x cross-section sample of V_rho with local refinement around extremes.
class ConeSampler {
 public:
  ConeSampler(const DomainSpec& domain, const Tolerances& tol) : domain_(domain), tol_(tol) {
    radii_ = {0.999, 0.9, 0.75, 0.6, 0.45, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005};
    for (double& r : radii_) r *= domain.rho();
    const int n = domain.n();
    if (n == 1) {
      for (double s : domain.line_signs()) directions_.push_back({{}, s});
    } else {
      axes_ = domain.chart_axes();
      const double want = std::max(1.0, double(tol.sample_points) / radii_.size());
      int per_axis = dyadic_count(std::pow(want, 1.0 / (n - 1)));
      std::vector<std::vector<double>> levels;
      for (const auto& ax : axes_) levels.push_back(axis_levels(ax, per_axis));
      std::vector<std::size_t> idx(axes_.size(), 0);
      while (true) {
        std::vector<double> theta(axes_.size());
        for (std::size_t a = 0; a < axes_.size(); ++a) theta[a] = levels[a][idx[a]];
        directions_.push_back({theta, 1.0});
        std::size_t a = 0;
        while (a < axes_.size() && ++idx[a] == levels[a].size()) idx[a++] = 0;
        if (a == axes_.size()) break;
      }
      spacing_ = 1.0 / (per_axis - 1);
    }
  }

  int base_size() const { return static_cast<int>(directions_.size() * radii_.size()); }
  int refinement_depth() const { return tol_.refine_rounds; }

  Vec point(const std::vector<double>& theta, double sign, double r) const {
    if (domain_.n() == 1) {
      Vec u(1);
      u(0) = sign;
      return r * u / domain_.norm_x()(u);
    }
    return r * domain_.direction(theta);
  }

  // Every base point (radius-major order).
  std::vector<Vec> base_points() const {
    std::vector<Vec> pts;
    for (double r : radii_)
      for (const auto& d : directions_) pts.push_back(point(d.theta, d.sign, r));
    return pts;
  }

  Extremum sup(const std::function<double(const Vec&)>& fn) const {
    struct Sample {
      std::vector<double> theta;
      double sign;
      double r;
      double value;
    };
    std::vector<Sample> samples;
    for (double r : radii_)
      for (const auto& d : directions_) samples.push_back({d.theta, d.sign, r, fn(point(d.theta, d.sign, r))});
    if (samples.empty()) throw EmptyDomainSample("no sample points in V_rho");
    double dtheta = spacing_;
    double dr = 0.25;
    for (int round = 0; round < tol_.refine_rounds; ++round) {
      std::vector<std::size_t> order(samples.size());
      std::iota(order.begin(), order.end(), 0);
      std::size_t top = std::max<std::size_t>(1, samples.size() / 20);
      std::partial_sort(order.begin(), order.begin() + top, order.end(),
                        [&](std::size_t a, std::size_t b) { return samples[a].value > samples[b].value; });
      std::vector<Sample> fresh;
      for (std::size_t i = 0; i < top; ++i) {
        const Sample s = samples[order[i]];
        for (double fr : {-0.5, 0.0, 0.5}) {
          double r = std::min(s.r * (1.0 + fr * dr), 0.999 * domain_.rho());
          for (std::size_t a = 0; a <= axes_.size(); ++a)
            for (double ft : {-0.5, -0.25, 0.25, 0.5}) {
              if (a == axes_.size() && ft != 0.5) continue;
              std::vector<double> theta = s.theta;
              if (a < axes_.size()) theta[a] = clamp_axis(a, theta[a] + ft * dtheta * width(a));
              else if (fr == 0.0) continue;
              fresh.push_back({theta, s.sign, r, fn(point(theta, s.sign, r))});
            }
        }
      }
      samples.insert(samples.end(), fresh.begin(), fresh.end());
      dtheta *= 0.5;
      dr *= 0.5;
    }
    auto best = std::max_element(samples.begin(), samples.end(),
                                 [](const Sample& a, const Sample& b) { return a.value < b.value; });
    return {best->value, point(best->theta, best->sign, best->r)};
  }

  Extremum inf(const std::function<double(const Vec&)>& fn) const {
    Extremum e = sup([&](const Vec& x) { return -fn(x); });
    e.value = -e.value;
    return e;
  }

 private:
  struct Direction {
    std::vector<double> theta;
    double sign;
  };

  static int dyadic_count(double want) {
    int k = 2;
    while (k + 1 < want) k *= 2;
    return k + 1;
  }

  double width(std::size_t a) const { return axes_[a].hi - axes_[a].lo; }

  double clamp_axis(std::size_t a, double t) const {
    const auto& ax = axes_[a];
    if (ax.periodic) return t;
    double eps = 1e-7 * (ax.hi - ax.lo);
    return std::clamp(t, ax.lo + eps, ax.hi - eps);
  }

  // Nested levels: doubling the count keeps every previous level.
  static std::vector<double> axis_levels(const ChartAxis& ax, int count) {
    std::vector<double> v;
    const double w = ax.hi - ax.lo;
    if (ax.periodic) {
      for (int k = 0; k < count - 1; ++k) v.push_back(ax.lo + w * k / (count - 1));
    } else {
      double eps = 1e-7 * w;
      for (int k = 0; k < count; ++k) v.push_back(ax.lo + eps + (w - 2 * eps) * k / (count - 1));
    }
    return v;
  }

  DomainSpec domain_;
  Tolerances tol_;
  std::vector<double> radii_;
  std::vector<ChartAxis> axes_;
  std::vector<Direction> directions_;
  double spacing_ = 0.0;
};

// Constants of the cohomological pair (pa, Q): flow rate, growth of Id + Dpa,
// and the two-sided bounds on Q.  Q is a k x k matrix polynomial (row-major,
// arity n) of degree N - 1.
struct PairConstants {
  int N = 2;
  double a = 0, b = 0, A = 0, B_Q = 0, A_Q = 0, c = 0, d = 0;
  double a_V = 0;
  Extremum a_witness, a_V_witness;

  double alpha() const { return 1.0 / (N - 1); }

  // nu + 1 + B_Q/c - max(1 - A/d, 0); positive means the integral formula applies.
  double margin(double nu) const { return nu + 1.0 + B_Q / c - std::max(1.0 - A / d, 0.0); }
};

namespace detail {

inline double pow_norm(const Norm& norm, const Vec& x, double e) { return std::pow(norm(x), e); }

// sup (|Id + s Q(x)| - 1)/|x|^deg over the sample.
inline Extremum shifted_norm_sup(const ConeSampler& sampler, const Norm& norm_x, const Norm& norm_k,
                                 const SparsePolynomial& Q, int k, double deg, double s) {
  if (Q.is_zero()) return {0.0, Vec()};
  return sampler.sup([&](const Vec& x) {
    Mat M = Mat::Identity(k, k) + s * eval_matrix(Q, x, k, k);
    return (norm_k.op(M) - 1.0) / pow_norm(norm_x, x, deg);
  });
}

}  // namespace detail

// Distance from x + pa(x) to the complement of V_rho, scaled by |x|^N, minimized.
inline Extremum invariance_margin(const ConeSampler& sampler, const DomainSpec& domain, const SparsePolynomial& pa,
                                  int N) {
  return sampler.inf([&](const Vec& x) {
    Vec z = x + pa(x);
    return domain.boundary_distance(z) / std::pow(domain.norm_x()(x), N);
  });
}

inline PairConstants estimate_pair_constants(const SparsePolynomial& pa, const SparsePolynomial& Q, int k, int N,
                                             const DomainSpec& domain, const Tolerances& tol,
                                             const Norm* norm_k = nullptr) {
  ConeSampler sampler(domain, tol);
  const Norm& nx = domain.norm_x();
  const Norm& nk = norm_k ? *norm_k : domain.norm_x();
  PairConstants pc;
  pc.N = N;
  Extremum ea = sampler.sup([&](const Vec& x) { return (nx(x + pa(x)) - nx(x)) / std::pow(nx(x), N); });
  pc.a = -ea.value;
  pc.a_witness = ea;
  pc.b = sampler.sup([&](const Vec& x) { return nx(pa(x)) / std::pow(nx(x), N); }).value;
  pc.A = -detail::shifted_norm_sup(sampler, nx, nx, pa.jacobian_poly(), domain.n(), N - 1, 1.0).value;
  pc.B_Q = -detail::shifted_norm_sup(sampler, nx, nk, Q, k, N - 1, -1.0).value;
  pc.A_Q = detail::shifted_norm_sup(sampler, nx, nk, Q, k, N - 1, 1.0).value;
  pc.c = pc.B_Q <= 0 ? pc.a : pc.b;
  pc.d = pc.A < 0 ? pc.a : pc.b;
  pc.a_V_witness = invariance_margin(sampler, domain, pa, N);
  pc.a_V = pc.a_V_witness.value;
  return pc;
}

struct HypothesisVerdict {
  bool satisfied = false;
  double margin = 0.0;
  std::vector<Vec> witnesses;
  std::string note;
};

struct ConstantsReport {
  double a_p = 0, b_p = 0, A_p = 0, B_p = 0, B_q = 0, c_p = 0, d_p = 0, a_V = 0;
  double alpha = 1;
  int sample_size = 0;
  int refinement_depth = 0;
  double rho = 0;
  std::vector<std::pair<std::string, Extremum>> witnesses;
  HypothesisVerdict h1, h2, h3;
};

inline ConstantsReport estimate_constants(const MapSpec& F, const DomainSpec& domain, const Tolerances& tol) {
  if (tol.sample_points < 1000) throw ValidationError("sampling budget below 1000 points");
  ConeSampler sampler(domain, tol);
  const Norm& nx = domain.norm_x();
  const Norm& ny = domain.norm_y();
  const int N = F.N, M = F.M;
  SparsePolynomial pa = F.pa().restrict_prefix(F.n);
  ConstantsReport rep;
  rep.rho = domain.rho();
  rep.alpha = 1.0 / (N - 1);
  rep.sample_size = sampler.base_size();
  rep.refinement_depth = sampler.refinement_depth();

  SparsePolynomial dxp = F.dxp0().restrict_prefix(F.n);
  SparsePolynomial dyq = F.dyq0().restrict_prefix(F.n);

  Extremum ea = sampler.sup([&](const Vec& x) { return (nx(x + pa(x)) - nx(x)) / std::pow(nx(x), N); });
  Extremum eb = sampler.sup([&](const Vec& x) { return nx(pa(x)) / std::pow(nx(x), N); });
  Extremum eA = detail::shifted_norm_sup(sampler, nx, nx, dxp, F.n, N - 1, 1.0);
  Extremum eB = detail::shifted_norm_sup(sampler, nx, nx, dxp, F.n, N - 1, -1.0);
  Extremum eBq = detail::shifted_norm_sup(sampler, nx, ny, dyq, F.m, M - 1, -1.0);
  Extremum eV = invariance_margin(sampler, domain, pa, N);
  rep.a_p = -ea.value;
  rep.b_p = eb.value;
  rep.A_p = -eA.value;
  rep.B_p = eB.value;
  rep.B_q = -eBq.value;
  rep.c_p = rep.B_q <= 0 ? rep.a_p : rep.b_p;
  rep.d_p = rep.A_p <= 0 ? rep.a_p : rep.b_p;
  rep.a_V = eV.value;
  rep.witnesses = {{"a_p", ea}, {"b_p", eb}, {"A_p", eA}, {"B_p", eB}, {"B_q", eBq}, {"a_V", eV}};
  return rep;
}

// Iterates x -> x + pa(x) from x0 and returns the first step that leaves V_rho.
inline std::optional<int> escaping_orbit(const SparsePolynomial& pa, const DomainSpec& domain, Vec x0,
                                         int max_iter = 1'000'000) {
  for (int k = 0; k < max_iter; ++k) {
    if (!domain.contains(x0)) return k;
    x0 += pa(x0);
  }
  return std::nullopt;
}

inline void check_hypotheses(const MapSpec& F, const DomainSpec& domain, ConstantsReport& rep,
                             const Tolerances& tol) {
  // H1
  rep.h1.margin = rep.a_p;
  rep.h1.note = "a_p > 0";
  if (F.M > F.N) {
    rep.h1.margin = std::min(rep.h1.margin, rep.A_p / rep.d_p + 1.0);
    rep.h1.note += " and A_p/d_p > -1";
  }
  rep.h1.satisfied = rep.h1.margin > 0;
  rep.h1.witnesses = {rep.witnesses[0].second.witness};

  // H2
  if (!vanishes_on_y_zero(F.q, F.n)) {
    rep.h2 = {false, -1.0, {}, "q(x,0) does not vanish"};
  } else if (F.M < F.N) {
    ConeSampler sampler(domain, tol);
    SparsePolynomial dyq = F.dyq0().restrict_prefix(F.n);
    Extremum e = sampler.inf([&](const Vec& x) {
      Mat Q = eval_matrix(dyq, x, F.m, F.m);
      Eigen::JacobiSVD<Mat> svd(Q);
      return svd.singularValues().minCoeff() / std::pow(domain.norm_x()(x), F.M - 1);
    });
    rep.h2 = {e.value > 1e-12, e.value, {e.witness}, "D_y q(x,0) invertible"};
  } else if (F.M == F.N) {
    double m = 2.0 + rep.B_q / rep.c_p - std::max(1.0 - rep.A_p / rep.d_p, 0.0);
    rep.h2 = {m > 0, m, {}, "2 + B_q/c_p > max(1 - A_p/d_p, 0)"};
  } else {
    rep.h2 = {true, std::numeric_limits<double>::infinity(), {}, "q(x,0) = 0 (M > N)"};
  }

  // H3
  rep.h3.margin = rep.a_V;
  rep.h3.satisfied = rep.a_V > 0;
  rep.h3.note = "dist(x + p(x,0), complement of V_rho) >= a_V |x|^N";
  const Extremum& wv = rep.witnesses.back().second;
  rep.h3.witnesses = {wv.witness};
  if (!rep.h3.satisfied) {
    // An interior start point whose orbit under x + p(x,0) escapes.
    SparsePolynomial pa = F.pa().restrict_prefix(F.n);
    Vec x0 = 0.5 * wv.witness;
    if (auto steps = escaping_orbit(pa, domain, x0)) {
      Vec xk = x0;
      for (int k = 0; k < *steps; ++k) xk += pa(xk);
      rep.h3.witnesses.push_back(x0);
      rep.h3.witnesses.push_back(xk);
      rep.h3.note += fmt::format("; orbit from the second witness leaves V_rho after {} steps", *steps);
    }
  }
}

enum class RegularityCase { analytic, smooth, finite };

inline std::string to_string(RegularityCase c) {
  switch (c) {
    case RegularityCase::analytic: return "analytic";
    case RegularityCase::smooth: return "smooth";
    case RegularityCase::finite: return "finite";
  }
  return "?";
}

struct RegularityBudget {
  std::optional<int> gamma;  // empty: unbounded
  int ell_f = 0;
  RegularityCase tag = RegularityCase::analytic;
  bool safety_band = false;
  bool gamma_tie = false;
};

inline RegularityBudget regularity_budget(const ConstantsReport& rep, int N, int M, int ell,
                                          const Tolerances& tol) {
  RegularityBudget out;
  const double rel = tol.equality_tol * std::max(1.0, std::abs(rep.d_p));
  if (M < N || rep.A_p > rep.d_p + rel) {
    out.tag = RegularityCase::analytic;
  } else if (std::abs(rep.A_p - rep.d_p) <= rel) {
    out.tag = RegularityCase::smooth;
  } else {
    out.tag = RegularityCase::finite;
    double coef = 1.0 - rep.A_p / rep.d_p;
    double bound = M == N ? 2.0 + rep.B_q / rep.c_p : 2.0;
    if (bound <= 0 || coef <= 0 || bound <= coef)
      throw BudgetUndefined("regularity budget empty: the H2 inequality fails for k = 1");
    double ratio = bound / coef;
    double nearest = std::round(ratio);
    int gamma;
    if (std::abs(ratio - nearest) <= 1e-3 * ratio) {
      gamma = static_cast<int>(nearest) - 1;
      out.gamma_tie = true;
    } else {
      gamma = static_cast<int>(std::ceil(ratio)) - 1;
    }
    out.gamma = gamma;
  }
  if (M < N) {
    out.ell_f = ell;
    return out;
  }
  auto budget = [&](double shrink) {
    double v = shrink * rep.B_p / rep.a_p;
    if (rep.A_p < rep.b_p) v += out.gamma.value_or(0) * (1.0 - rep.A_p / rep.d_p);
    return N - 1 + static_cast<int>(std::floor(v + 1e-12));
  };
  out.ell_f = budget(1.0 - tol.deflation);
  out.safety_band = budget(1.0) != out.ell_f || budget(1.0 + tol.deflation) != out.ell_f;
  return out;
}

// nu + 1 + B_Q/c - max(1 - A/d, 0) with the map constants standing in for the
// pair constants; `B_Q` selects the equation (0, B_q, or -B_p).
inline double solvability_margin(double nu, const ConstantsReport& rep, double B_Q) {
  double c = B_Q <= 0 ? rep.a_p : rep.b_p;
  return nu + 1.0 + B_Q / c - std::max(1.0 - rep.A_p / rep.d_p, 0.0);
}

}  // namespace pmhom
