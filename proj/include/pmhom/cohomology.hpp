#pragma once

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pmhom/constants.hpp"
#include "pmhom/domain.hpp"
#include "pmhom/error.hpp"
#include "pmhom/graded.hpp"
#include "pmhom/ode.hpp"
#include "pmhom/poly.hpp"
#include "pmhom/settings.hpp"

namespace pmhom {

// Dh(x) pa(x) - Q(x) h(x) = w(x) for h homogeneous of degree nu + 1.
struct CohomologicalProblem {
  SparsePolynomial pa;  // arity n, codomain n, degree N
  SparsePolynomial Q;   // arity n, codomain k*k (row-major), degree N - 1, may be zero
  int k = 1;
  int N = 2;
  HomogeneousTerm w;  // degree nu + N
  double nu = 0;
  DomainSpec domain;
  GridPtr grid;
  PairConstants constants;
  HypothesisPolicy policy = HypothesisPolicy::strict;
  bool force = false;  // attempt integration even when the margin test fails

  int n() const { return domain.n(); }
  bool hp1() const { return constants.a > 0; }
  bool hp2() const { return constants.a_V > 0; }
  double margin() const { return constants.margin(nu); }
  Mat Q_at(const Vec& x) const { return Q.is_zero() ? Mat::Zero(k, k) : eval_matrix(Q, x, k, k); }
};

inline CohomologicalProblem make_problem(SparsePolynomial pa, SparsePolynomial Q, int k, int N, HomogeneousTerm w,
                                         const DomainSpec& domain, GridPtr grid, const Tolerances& tol,
                                         std::optional<PairConstants> constants = std::nullopt) {
  CohomologicalProblem prob;
  prob.pa = std::move(pa);
  prob.Q = Q.is_zero() ? SparsePolynomial(domain.n(), k * k) : std::move(Q);
  prob.k = k;
  prob.N = N;
  prob.nu = w.degree() - N;
  prob.w = std::move(w);
  prob.domain = domain;
  prob.grid = std::move(grid);
  prob.constants = constants ? *constants : estimate_pair_constants(prob.pa, prob.Q, k, N, domain, tol);
  return prob;
}

// w along a trajectory; an interpolated w cannot follow a flow that leaves its chart patch.
inline Vec w_along_flow(const CohomologicalProblem& prob, const Vec& x) {
  try {
    return prob.w(x);
  } catch (const StaleInterpolant&) {
    throw LeftDomain("flow leaves the patch where the right-hand side is tabulated");
  }
}

struct FlowState {
  double t = 0;
  Vec x;
  Mat Minv;
  Vec integral;
};

namespace detail {

// State layout: x (n), Minv (k*k, column-major), I (k).
struct FlowLayout {
  int n, k;
  int dim() const { return n + k * k + k; }
  std::vector<StateBlock> blocks() const { return {{0, n}, {n, k * k}, {n + k * k, k}}; }
};

inline Vec flow_initial(const FlowLayout& L, const Vec& x) {
  Vec y = Vec::Zero(L.dim());
  y.head(L.n) = x;
  for (int i = 0; i < L.k; ++i) y(L.n + i * L.k + i) = 1.0;
  return y;
}

inline OdeRhs flow_rhs(const CohomologicalProblem& prob, const FlowLayout& L, bool with_integral) {
  return [&prob, L, with_integral](double, const Vec& y, Vec& dy) {
    Vec x = y.head(L.n);
    dy.head(L.n) = prob.pa(x);
    Eigen::Map<const Mat> Minv(y.data() + L.n, L.k, L.k);
    Eigen::Map<Mat> dMinv(dy.data() + L.n, L.k, L.k);
    if (prob.Q.is_zero()) dMinv.setZero();
    else dMinv = -Minv * prob.Q_at(x);
    if (with_integral) dy.tail(L.k) = Minv * w_along_flow(prob, x);
    else dy.tail(L.k).setZero();
  };
}

}  // namespace detail

// Trajectory of (phi, M^{-1}, partial integral) from x up to t_end, one state per accepted step.
inline std::vector<FlowState> integrate_flow(const CohomologicalProblem& prob, const Vec& x, double t_end,
                                             const Tolerances& tol, bool assert_domain = true) {
  detail::FlowLayout L{prob.n(), prob.k};
  DormandPrince dp(detail::flow_rhs(prob, L, prob.w.valid()), L.dim(), tol.ode_rtol, L.blocks());
  Vec y = detail::flow_initial(L, x);
  double t = 0;
  std::vector<FlowState> traj;
  auto record = [&](double tt, const Vec& yy) {
    FlowState s;
    s.t = tt;
    s.x = yy.head(L.n);
    s.Minv = Eigen::Map<const Mat>(yy.data() + L.n, L.k, L.k);
    s.integral = yy.tail(L.k);
    if (assert_domain && !prob.domain.in_cone(s.x))
      throw LeftDomain(fmt::format("trajectory left V at t = {:.6g}", tt));
    traj.push_back(std::move(s));
  };
  record(0, y);
  dp.integrate(t, y, t_end, record);
  return traj;
}

// Constants of the decay bounds for |phi| and |M^{-1}|, and the integrand exponent.
struct DecayEnvelope {
  int N = 2;
  double nu = 0;
  double a = 0, b = 0, A = 0, B = 0, c = 0, delta = 0;
  double w_scale = 0;  // sup of |w| on the unit cross-section
  bool measured = false;
  double measured_kappa = 0;

  double alpha() const { return 1.0 / (N - 1); }
  double kappa() const { return measured ? measured_kappa : alpha() * (nu + N + B / c); }

  double phi_upper(double t, double r) const {
    return r * std::pow(1.0 + (N - 1) * a * t * std::pow(r, N - 1), -alpha());
  }
  double phi_lower(double t, double r) const {
    return r * std::pow(1.0 + (N - 1) * b * t * std::pow(r, N - 1), -alpha());
  }
  double minv_upper(double t, double r) const {
    return std::pow(1.0 + c * (N - 1) * t * std::pow(r, N - 1), -alpha() * B / c);
  }
  double minv_lower(double t, double r) const {
    return std::pow(1.0 + delta * (N - 1) * t * std::pow(r, N - 1), -alpha() * A / delta);
  }

  // Bound on the integral of |M^{-1} w(phi)| over [T, inf) at |x| = r.
  double tail(double T, double r) const {
    double k = kappa();
    if (k <= 1) return std::numeric_limits<double>::infinity();
    double rate = a * (N - 1) * std::pow(r, N - 1);
    return w_scale * std::pow(r, nu + N) * std::pow(1.0 + rate * T, 1.0 - k) / (rate * (k - 1.0));
  }

  // Smallest T with tail(T, 1) <= target, capped.
  double horizon(double target, double cap) const {
    double k = kappa();
    if (k <= 1 || w_scale == 0) return w_scale == 0 ? 0.0 : cap;
    double rate = a * (N - 1);
    double base = target * rate * (k - 1.0) / w_scale;
    double T = (std::pow(base, 1.0 / (1.0 - k)) - 1.0) / rate;
    return std::clamp(T, 1.0, cap);
  }
};

inline double sup_on_cross_section(const HomogeneousTerm& w, const CrossSectionGrid& grid) {
  double s = 0;
  for (const auto& u : grid.nodes()) s = std::max(s, w(u).norm());
  return s;
}

// Decay exponent of |M^{-1}(t,u) w(phi(t,u))| fitted on t in [1e6, 1e8].
inline double measure_decay_exponent(const CohomologicalProblem& prob, const Tolerances& tol) {
  const Vec* best = nullptr;
  double bw = -1;
  for (const auto& u : prob.grid->nodes()) {
    double v = prob.w(u).norm();
    if (v > bw) {
      bw = v;
      best = &u;
    }
  }
  if (!best || bw == 0) return std::numeric_limits<double>::infinity();
  CohomologicalProblem plain = prob;
  plain.w = HomogeneousTerm();
  auto traj = integrate_flow(plain, *best, 1e8, tol, false);
  std::vector<double> lt, lv;
  for (const auto& s : traj) {
    if (s.t < 1e6) continue;
    double v = (s.Minv * w_along_flow(prob, s.x)).norm();
    if (v <= 0) continue;
    lt.push_back(std::log(s.t));
    lv.push_back(std::log(v));
  }
  if (lt.size() < 3) return std::numeric_limits<double>::infinity();
  double mt = 0, mv = 0;
  for (std::size_t i = 0; i < lt.size(); ++i) {
    mt += lt[i];
    mv += lv[i];
  }
  mt /= lt.size();
  mv /= lv.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lt.size(); ++i) {
    sxy += (lt[i] - mt) * (lv[i] - mv);
    sxx += (lt[i] - mt) * (lt[i] - mt);
  }
  return -sxy / sxx;
}

// Envelope constants from the pair estimates alone, no integrability test.
inline DecayEnvelope envelope_bounds(const CohomologicalProblem& prob) {
  DecayEnvelope env;
  const PairConstants& pc = prob.constants;
  env.N = prob.N;
  env.nu = prob.nu;
  env.a = pc.a;
  env.b = pc.b;
  env.A = pc.A_Q;
  env.B = pc.B_Q;
  env.c = env.B <= 0 ? env.a : env.b;
  env.delta = env.A >= 0 ? env.a : env.b;
  return env;
}

inline DecayEnvelope decay_envelope(const CohomologicalProblem& prob, const Tolerances& tol) {
  DecayEnvelope env = envelope_bounds(prob);
  env.w_scale = prob.w.valid() && prob.grid ? sup_on_cross_section(prob.w, *prob.grid) : 0.0;
  if (!prob.hp2() || !prob.hp1()) {
    env.measured = true;
    env.measured_kappa = measure_decay_exponent(prob, tol);
  }
  if (env.w_scale > 0 && env.kappa() <= (env.measured ? 0.98 : 1.0))
    throw DivergentCohomologicalIntegral(
        DivergentCohomologicalIntegral::Reason::non_integrable_tail,
        fmt::format("integrand bound behaves like t^{:.4g}, not integrable{}", -env.kappa(),
                    env.measured ? " (measured)" : ""));
  return env;
}

struct NodeIntegral {
  Vec value;
  double tail = 0;
  double horizon = 0;
  long steps = 0;
};

namespace detail {

inline void throw_divergent(DivergentCohomologicalIntegral::Reason r, const std::string& what) {
  throw DivergentCohomologicalIntegral(r, what);
}

// Doubling monitor: integrate to T_k = 2^k and stop when the geometric tail
// estimate of the increments falls below the tolerance.
template <class Advance, class Read>
NodeIntegral doubling_monitor(Advance advance, Read read, double scale, const Tolerances& tol) {
  NodeIntegral out;
  Vec prev = read();
  double prev_inc = -1;
  int slow = 0;
  for (int k = 0; k <= tol.max_doublings; ++k) {
    double T = std::ldexp(1.0, k);
    advance(T);
    Vec cur = read();
    if (!cur.allFinite() || cur.norm() > tol.blowup * std::max(scale, 1e-300))
      throw_divergent(DivergentCohomologicalIntegral::Reason::blow_up,
                      fmt::format("partial integral {:.3g} exceeds {:.3g} x scale at T = {:.3g}", cur.norm(),
                                  tol.blowup, T));
    double inc = (cur - prev).norm();
    prev = cur;
    if (prev_inc > 0) {
      double ratio = inc / prev_inc;
      slow = (ratio >= 0.99 && k >= 10) ? slow + 1 : 0;
      if (slow >= 6)
        throw_divergent(DivergentCohomologicalIntegral::Reason::stagnating_tail,
                        fmt::format("tail increments stopped shrinking (ratio {:.4f}) at T = {:.3g}", ratio, T));
      if (ratio < 0.99 && k >= 4) {
        double tail = inc * ratio / (1.0 - ratio);
        if (tail < tol.tail_tol * std::max(scale, 1e-300)) {
          out.value = cur;
          out.tail = tail;
          out.horizon = T;
          return out;
        }
      }
    } else if (inc == 0 && k >= 4) {
      out.value = cur;
      out.horizon = T;
      return out;
    }
    prev_inc = inc;
  }
  throw_divergent(DivergentCohomologicalIntegral::Reason::not_converged,
                  fmt::format("no convergence after {} doublings", tol.max_doublings));
  return out;
}

}  // namespace detail

// -integral_0^inf M^{-1}(t,u) w(phi(t,u)) dt at one point.
inline NodeIntegral solution_integral(const CohomologicalProblem& prob, const DecayEnvelope& env, const Vec& u,
                                      const Tolerances& tol) {
  detail::FlowLayout L{prob.n(), prob.k};
  DormandPrince dp(detail::flow_rhs(prob, L, true), L.dim(), tol.ode_rtol, L.blocks());
  Vec y = detail::flow_initial(L, u);
  double t = 0;
  const bool strict = !env.measured && prob.policy == HypothesisPolicy::strict;
  auto guard = [&](double tt, const Vec& yy) {
    if (strict && !prob.domain.in_cone(yy.head(L.n)))
      throw LeftDomain(fmt::format("trajectory left V at t = {:.6g}", tt));
  };
  NodeIntegral out;
  if (strict && !prob.force) {
    double r = prob.domain.norm_x()(u);
    double T = env.horizon(tol.tail_tol * std::max(env.w_scale, 1e-300), tol.time_cap) /
               std::pow(r, prob.N - 1);
    dp.integrate(t, y, T, guard);
    out.value = -y.tail(L.k);
    out.tail = env.tail(T, r);
    out.horizon = T;
  } else {
    double scale = std::max(env.w_scale, prob.w(u).norm());
    out = detail::doubling_monitor([&](double T) { dp.integrate(t, y, T, guard); },
                                   [&]() -> Vec { return y.tail(L.k); }, scale, tol);
    out.value = -out.value;
  }
  out.steps = dp.steps();
  return out;
}

struct CohomologySolution {
  HomogeneousTerm term;
  std::string solver;
  double margin = 0;
  double tail_error = 0;
  double interp_error = 0;
  double pde_residual = 0;
  double horizon = 0;
  long steps = 0;
  bool measured_envelope = false;
};

// Points of the unit cross-section away from its boundary, deterministic.
inline std::vector<Vec> interior_probe_points(const DomainSpec& domain, int count, double inset) {
  std::vector<Vec> pts;
  if (domain.n() == 1) {
    for (double s : domain.line_signs()) {
      Vec u(1);
      u(0) = s;
      pts.push_back(u / domain.norm_x()(u));
    }
    return pts;
  }
  auto axes = domain.chart_axes();
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < count; ++i) {
    std::vector<double> theta(axes.size());
    for (std::size_t a = 0; a < axes.size(); ++a) {
      double frac = std::fmod((i + 0.5) * golden * (a + 1) + 0.37 * a, 1.0);
      double pad = axes[a].periodic ? 0.0 : inset;
      theta[a] = axes[a].lo + pad + (axes[a].hi - axes[a].lo - 2 * pad) * frac;
    }
    pts.push_back(domain.direction(theta));
  }
  return pts;
}

// max |Dh pa - Q h - w| / (|x|^{nu+N} sup_Sigma |w|) over probe points.
inline double pde_residual(const CohomologicalProblem& prob, const HomogeneousTerm& h, const Tolerances& tol,
                           double inset = 0.05) {
  double scale = prob.grid ? sup_on_cross_section(prob.w, *prob.grid) : 0.0;
  double worst = 0;
  for (const auto& u : interior_probe_points(prob.domain, tol.pde_check_points, inset)) {
    Vec res = differentiate_term(h, u, tol.fd_rel) * prob.pa(u) - prob.Q_at(u) * h(u) - prob.w(u);
    worst = std::max(worst, res.norm());
  }
  if (scale == 0) return worst;
  return worst / scale;
}

inline void require_hypotheses(const CohomologicalProblem& prob) {
  if (prob.policy == HypothesisPolicy::monitor) return;
  if (!prob.hp1()) throw HypothesisFailure(fmt::format("HP1 fails: a = {:.4g}", prob.constants.a));
  if (!prob.hp2()) throw HypothesisFailure(fmt::format("HP2 fails: invariance margin {:.4g}", prob.constants.a_V));
}

inline CohomologySolution solve_general(const CohomologicalProblem& prob, const Tolerances& tol) {
  CohomologySolution sol;
  sol.solver = "general";
  sol.margin = prob.margin();
  const int deg_out = static_cast<int>(std::lround(prob.nu + 1));
  if (prob.w.is_zero_polynomial()) {
    sol.term = HomogeneousTerm::zero(prob.nu + 1, prob.n(), prob.k);
    return sol;
  }
  require_hypotheses(prob);
  if (prob.policy == HypothesisPolicy::strict && prob.hp2() && sol.margin <= 0 && !prob.force)
    throw DivergentCohomologicalIntegral(
        DivergentCohomologicalIntegral::Reason::non_integrable_tail,
        fmt::format("solvability margin {:.4g} <= 0 for degree {}", sol.margin, deg_out));
  DecayEnvelope env = decay_envelope(prob, tol);
  sol.measured_envelope = env.measured;
  const auto& nodes = prob.grid->nodes();
  Mat values(prob.k, static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    NodeIntegral ni = solution_integral(prob, env, nodes[i], tol);
    values.col(static_cast<Eigen::Index>(i)) = ni.value;
    sol.tail_error = std::max(sol.tail_error, ni.tail);
    sol.horizon = std::max(sol.horizon, ni.horizon);
    sol.steps += ni.steps;
  }
  sol.interp_error = prob.grid->error_estimate(values);
  sol.term = HomogeneousTerm::interpolant(prob.grid, prob.nu + 1, std::move(values),
                                          sol.interp_error + sol.tail_error);
  sol.pde_residual = pde_residual(prob, sol.term, tol);
  return sol;
}

// Direct (non-interpolated) evaluation of the integral formula at every query.
inline HomogeneousTerm lazy_solution(const CohomologicalProblem& prob, const Tolerances& tol) {
  DecayEnvelope env = decay_envelope(prob, tol);
  auto shared = std::make_shared<CohomologicalProblem>(prob);
  return HomogeneousTerm::function(
      TermKind::lazy, prob.nu + 1, prob.n(), prob.k,
      [shared, env, tol](const Vec& x) -> Vec {
        double r = shared->domain.norm_x()(x);
        Vec u = x / r;
        return std::pow(r, shared->nu + 1) * solution_integral(*shared, env, u, tol).value;
      });
}

// Scalar p0 with pa_i = x_i p0 for every i, if one exists.
inline std::optional<SparsePolynomial> radial_factor(const SparsePolynomial& pa) {
  const int n = pa.arity();
  SparsePolynomial p0(n, 1);
  for (const auto& mono : pa.component(0)) {
    if (mono.exps[0] < 1) return std::nullopt;
    Exponents e = mono.exps;
    e[0] -= 1;
    p0.add(0, mono.coeff, e);
  }
  for (int i = 0; i < n; ++i) {
    SparsePolynomial expect = p0.times(SparsePolynomial::variable(n, i));
    if (!expect.approx_equal(pa.slice(i, 1), 1e-14)) return std::nullopt;
  }
  return p0;
}

// h = [(nu+1) p0 Id - Q]^{-1} w when pa(x) = p0(x) x.
inline CohomologySolution solve_radial(const CohomologicalProblem& prob, const Tolerances& tol) {
  auto p0 = radial_factor(prob.pa);
  if (!p0) throw NotRadial("pa is not of the form p0(x) x");
  const int k = prob.k, n = prob.n();
  const double nu = prob.nu;
  auto pencil = [p0 = *p0, Q = prob.Q, k, nu](const Vec& x) -> Mat {
    Mat A = (nu + 1.0) * p0(x)(0) * Mat::Identity(k, k);
    if (!Q.is_zero()) A -= eval_matrix(Q, x, k, k);
    return A;
  };
  for (const auto& u : interior_probe_points(prob.domain, 200, 0.0)) {
    Eigen::JacobiSVD<Mat> svd(pencil(u));
    const auto& s = svd.singularValues();
    if (s(s.size() - 1) <= 1e-12 * std::max(s(0), 1e-300))
      throw SingularPencil(fmt::format("pencil singular near x = ({})", fmt::join(u.data(), u.data() + n, ", ")));
  }
  SparsePolynomial dp0 = p0->jacobian_poly();
  SparsePolynomial dQ = prob.Q.is_zero() ? SparsePolynomial() : prob.Q.jacobian_poly();
  HomogeneousTerm w = prob.w;
  const double fd = tol.fd_rel;
  auto value = [pencil, w](const Vec& x) -> Vec { return pencil(x).partialPivLu().solve(w(x)); };
  auto jac = [pencil, w, dp0, dQ, k, n, nu, fd](const Vec& x) -> Mat {
    auto lu = pencil(x).partialPivLu();
    Vec h = lu.solve(w(x));
    Mat rhs = differentiate_term(w, x, fd);
    Vec g0 = dp0(x);
    Vec gQ = dQ.arity() ? dQ(x) : Vec::Zero(k * k * n);
    for (int l = 0; l < n; ++l) {
      Mat dA = (nu + 1.0) * g0(l) * Mat::Identity(k, k);
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) dA(r, c) -= gQ((r * k + c) * n + l);
      rhs.col(l) -= dA * h;
    }
    return lu.solve(rhs);
  };
  CohomologySolution sol;
  sol.solver = "radial";
  sol.margin = prob.margin();
  sol.term = HomogeneousTerm::closed_form(nu + 1, n, k, value, jac);
  sol.pde_residual = prob.grid ? pde_residual(prob, sol.term, tol) : 0.0;
  return sol;
}

// h = -(D_y q(x,0))^{-1} E, degree deg(E) - (M - 1).
inline CohomologySolution solve_algebraic(const SparsePolynomial& Qy, int k, int M, const HomogeneousTerm& E,
                                          const DomainSpec& domain, const Tolerances& tol) {
  const int n = domain.n();
  CohomologySolution sol;
  sol.solver = "algebraic";
  const double deg = E.degree() - (M - 1);
  if (E.is_zero_polynomial()) {
    sol.term = HomogeneousTerm::zero(deg, n, k);
    return sol;
  }
  for (const auto& u : interior_probe_points(domain, 200, 0.0)) {
    Eigen::JacobiSVD<Mat> svd(eval_matrix(Qy, u, k, k));
    const auto& s = svd.singularValues();
    if (s(s.size() - 1) <= 1e-12 * std::max(s(0), 1e-300))
      throw SingularAt(fmt::format("D_y q(x,0) singular at x = ({})", fmt::join(u.data(), u.data() + n, ", ")));
  }
  SparsePolynomial dQ = Qy.jacobian_poly();
  const double fd = tol.fd_rel;
  auto value = [Qy, k, E](const Vec& x) -> Vec { return -eval_matrix(Qy, x, k, k).partialPivLu().solve(E(x)); };
  auto jac = [Qy, dQ, k, n, E, fd](const Vec& x) -> Mat {
    auto lu = eval_matrix(Qy, x, k, k).partialPivLu();
    Vec h = -lu.solve(E(x));
    Mat rhs = differentiate_term(E, x, fd);
    Vec g = dQ(x);
    for (int l = 0; l < n; ++l)
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) rhs(r, l) += g((r * k + c) * n + l) * h(c);
    return -lu.solve(rhs);
  };
  sol.term = HomogeneousTerm::closed_form(deg, n, k, value, jac);
  return sol;
}

// Q1(H) = Q H - H Dpa on k x n matrices, as a (kn x kn) matrix polynomial acting on vec(H).
inline SparsePolynomial derivative_operator(const SparsePolynomial& pa, const SparsePolynomial& Q, int k) {
  const int n = pa.arity();
  const int K = k * n;
  SparsePolynomial out(n, K * K);
  SparsePolynomial dpa = pa.jacobian_poly();  // (i, j) at i*n + j
  auto put = [&](int row, int col, const SparsePolynomial& entry, double s) {
    for (const auto& m : entry.component(0)) out.add(row * K + col, s * m.coeff, m.exps);
  };
  // vec index of H(r, c) is c*k + r.
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < k; ++r) {
      int row = c * k + r;
      if (!Q.is_zero())
        for (int s = 0; s < k; ++s) put(row, c * k + s, Q.slice(r * k + s, 1), 1.0);
      for (int l = 0; l < n; ++l) put(row, l * k + r, dpa.slice(l * n + c, 1), -1.0);
    }
  return out;
}

// Dh(x) from the variational integral, terminated by the doubling monitor.
inline Mat derivative_of_solution(const CohomologicalProblem& prob, const HomogeneousTerm& h, const Vec& x,
                                  const Tolerances& tol, bool check_margin = true) {
  const int n = prob.n(), k = prob.k;
  if (prob.w.is_zero_polynomial()) return Mat::Zero(k, n);
  if (check_margin && prob.policy == HypothesisPolicy::strict && !prob.force) {
    SparsePolynomial Q1 = derivative_operator(prob.pa, prob.Q, k);
    Norm plain{prob.domain.norm_x().kind, {}};
    PairConstants pc = estimate_pair_constants(prob.pa, Q1, k * n, prob.N, prob.domain, tol, &plain);
    if (pc.margin(prob.nu - 1) <= 0)
      throw DivergentCohomologicalIntegral(DivergentCohomologicalIntegral::Reason::non_integrable_tail,
                                           fmt::format("derivative margin {:.4g} <= 0", pc.margin(prob.nu - 1)));
  }
  const double r = prob.domain.norm_x()(x);
  const Vec u = x / r;
  SparsePolynomial dQ = prob.Q.is_zero() ? SparsePolynomial() : prob.Q.jacobian_poly();
  SparsePolynomial dpa = prob.pa.jacobian_poly();
  // x (n), Minv (k*k), Dphi (n*n), J (k*n); matrices column-major.
  const int o1 = n, o2 = n + k * k, o3 = o2 + n * n, dim = o3 + k * n;
  auto rhs = [&](double, const Vec& y, Vec& dy) {
    Vec z = y.head(n);
    dy.head(n) = prob.pa(z);
    Eigen::Map<const Mat> Minv(y.data() + o1, k, k);
    Eigen::Map<const Mat> Dphi(y.data() + o2, n, n);
    Eigen::Map<Mat> dMinv(dy.data() + o1, k, k);
    Eigen::Map<Mat> dDphi(dy.data() + o2, n, n);
    Eigen::Map<Mat> dJ(dy.data() + o3, k, n);
    if (prob.Q.is_zero()) dMinv.setZero();
    else dMinv = -Minv * prob.Q_at(z);
    dDphi = eval_matrix(dpa, z, n, n) * Dphi;
    Mat G = differentiate_term(prob.w, z, tol.fd_rel);
    if (!prob.Q.is_zero()) {
      Vec hz = h(z);
      Vec g = dQ(z);
      for (int l = 0; l < n; ++l)
        for (int a = 0; a < k; ++a)
          for (int b = 0; b < k; ++b) G(a, l) += g((a * k + b) * n + l) * hz(b);
    }
    dJ = Minv * G * Dphi;
  };
  Vec y = Vec::Zero(dim);
  y.head(n) = u;
  for (int i = 0; i < k; ++i) y(o1 + i * k + i) = 1.0;
  for (int i = 0; i < n; ++i) y(o2 + i * n + i) = 1.0;
  DormandPrince dp(rhs, dim, tol.ode_rtol, {{0, n}, {o1, k * k}, {o2, n * n}, {o3, k * n}});
  double t = 0;
  double scale = sup_on_cross_section(prob.w, *prob.grid);
  NodeIntegral ni = detail::doubling_monitor([&](double T) { dp.integrate(t, y, T); },
                                             [&]() -> Vec { return y.tail(k * n); }, scale, tol);
  Mat J = -Eigen::Map<const Mat>(ni.value.data(), k, n);
  return std::pow(r, prob.nu) * J;
}

}  // namespace pmhom
