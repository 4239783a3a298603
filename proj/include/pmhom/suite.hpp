#pragma once

#include <fmt/format.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "pmhom/flows.hpp"
#include "pmhom/parametrize.hpp"

namespace pmhom {

struct SuiteCheck {
  std::string name;
  bool passed = false;
  double value = 0;
  double limit = 0;
  std::string detail;
  bool expected_failure = false;
};

struct SuiteReport {
  std::vector<SuiteCheck> checks;

  void add(std::string name, bool passed, double value, double limit, std::string detail = {}) {
    checks.push_back({std::move(name), passed, value, limit, std::move(detail), false});
  }
  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
  const SuiteCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
  std::string text() const {
    std::string out;
    for (const auto& c : checks)
      out += fmt::format("{:<5} {:<32} value {:.3e} limit {:.3e}{}{}\n", c.passed ? "PASS" : "FAIL", c.name, c.value,
                         c.limit, c.expected_failure ? " (expected failure)" : "",
                         c.detail.empty() ? "" : "  " + c.detail);
    return out;
  }
  std::string csv() const {
    std::string out = "check,passed,value,limit,expected_failure\n";
    for (const auto& c : checks)
      out += fmt::format("{},{},{:.6e},{:.6e},{}\n", c.name, c.passed ? 1 : 0, c.value, c.limit,
                         c.expected_failure ? 1 : 0);
    return out;
  }
};

// Points of V with norm in [lo, hi] * rho, deterministic.
inline std::vector<Vec> cone_samples(const DomainSpec& domain, int count, double lo, double hi, unsigned seed) {
  std::vector<Vec> dirs = interior_probe_points(domain, count, 0.05);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Vec> out;
  for (int i = 0; i < count; ++i) {
    const Vec& d = dirs[i % dirs.size()];
    out.push_back(u(rng) * domain.rho() * d / domain.norm_x()(d));
  }
  return out;
}

// max |h(s x) - s^d h(x)| / |s^d h(x)| over samples and s in {0.37, 0.1}.
inline double grading_defect(const HomogeneousTerm& h, const std::vector<Vec>& pts) {
  double worst = 0;
  for (const auto& x : pts) {
    Vec hx = h(x);
    double scale = hx.norm();
    if (scale == 0) continue;
    for (double s : {0.37, 0.1}) {
      Vec lhs = h(s * x);
      double ref = std::pow(s, h.degree()) * scale;
      worst = std::max(worst, (lhs - std::pow(s, h.degree()) * hx).norm() / ref);
    }
  }
  return worst;
}

struct EnvelopeSample {
  double t;
  double r;
  double phi, phi_lo, phi_hi;
  double minv, minv_lo, minv_hi;
};

struct EnvelopeCheck {
  std::vector<EnvelopeSample> samples;
  int rejected = 0;  // trajectories that left V before t
  double worst_phi = 0, worst_minv = 0;  // largest relative excursion outside the bounds
  bool passed(double slack) const { return !samples.empty() && worst_phi <= slack && worst_minv <= slack; }
};

inline double excursion(double v, double lo, double hi) {
  if (v > hi) return v / hi - 1.0;
  if (v < lo) return 1.0 - v / lo;
  return 0.0;
}

// |phi(t,x)| and |M^{-1}(t,x)| against the decay bounds at sampled (t, x) whose orbit stays in V.
inline EnvelopeCheck check_envelopes(const CohomologicalProblem& prob, const Tolerances& tol, int count,
                                     unsigned seed = 7) {
  DecayEnvelope env = envelope_bounds(prob);
  CohomologicalProblem plain = prob;
  plain.w = HomogeneousTerm();
  const Norm& nx = prob.domain.norm_x();
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> logt(-1.0, 4.0);
  EnvelopeCheck out;
  int attempts = 0;
  auto pts = cone_samples(prob.domain, 4 * count, 0.1, 1.0, seed);
  while (static_cast<int>(out.samples.size()) < count && attempts < 4 * count) {
    const Vec& x = pts[attempts++];
    double t = std::pow(10.0, logt(rng));
    std::vector<FlowState> traj;
    try {
      traj = integrate_flow(plain, x, t, tol, true);
    } catch (const LeftDomain&) {
      ++out.rejected;
      continue;
    }
    const FlowState& end = traj.back();
    double r = nx(x);
    EnvelopeSample s{t, r, nx(end.x), env.phi_lower(t, r), env.phi_upper(t, r),
                     nx.op(end.Minv), env.minv_lower(t, r), env.minv_upper(t, r)};
    out.worst_phi = std::max(out.worst_phi, excursion(s.phi, s.phi_lo, s.phi_hi));
    out.worst_minv = std::max(out.worst_minv, excursion(s.minv, s.minv_lo, s.minv_hi));
    out.samples.push_back(s);
  }
  return out;
}

// max relative defect of phi(t, s x) = s phi(s^{N-1} t, x) and the matching identity for M^{-1}.
inline double scaling_defect(const CohomologicalProblem& prob, const Tolerances& tol, int count = 6) {
  CohomologicalProblem plain = prob;
  plain.w = HomogeneousTerm();
  double worst = 0;
  auto pts = cone_samples(prob.domain, count, 0.3, 1.0, 11);
  for (const auto& x : pts)
    for (double t : {1.0, 10.0}) {
      const double s = 0.37, ts = std::pow(s, prob.N - 1) * t;
      auto a = integrate_flow(plain, s * x, t, tol, false).back();
      auto b = integrate_flow(plain, x, ts, tol, false).back();
      worst = std::max(worst, (a.x - s * b.x).norm() / (s * b.x.norm()));
      worst = std::max(worst, (a.Minv - b.Minv).norm() / b.Minv.norm());
    }
  return worst;
}

inline const HomogeneousTerm* ledger_term(const InductionState& s, const LedgerEntry& e) {
  if (e.role == "K_y") return s.Ky.at(e.degree);
  if (e.role == "K_x") return s.Kx.at(e.degree);
  return nullptr;
}

inline void add_term_checks(SuiteReport& rep, const InductionState& s, const DomainSpec& domain,
                            const Tolerances& tol) {
  auto pts = cone_samples(domain, 20, 0.2, 1.0, 3);
  for (const auto* g : {&s.Kx, &s.Ky, &s.R}) {
    const char* label = g == &s.Kx ? "K_x" : g == &s.Ky ? "K_y" : "R";
    for (const auto& [d, h] : g->terms()) {
      if (h.is_zero_polynomial()) continue;
      double v = grading_defect(h, pts);
      rep.add(fmt::format("grading {} deg {}", label, d), v <= 1e-9, v, 1e-9);
    }
  }
  for (const auto& e : s.ledger) {
    if (!e.problem) continue;
    const HomogeneousTerm* h = ledger_term(s, e);
    if (!h) continue;
    double v = pde_residual(*e.problem, *h, tol);
    rep.add(fmt::format("pde {} j={}", e.role, e.j), v <= 1e-5, v, 1e-5);
  }
}

inline void add_flow_checks(SuiteReport& rep, const InductionState& s, const Tolerances& tol) {
  for (const auto& e : s.ledger) {
    if (!e.problem) continue;
    const CohomologicalProblem& prob = *e.problem;
    double v = scaling_defect(prob, tol);
    rep.add(fmt::format("scaling {} j={}", e.role, e.j), v <= 1e-8, v, 1e-8);
    if (!prob.hp1() || !prob.hp2()) {
      rep.add(fmt::format("envelopes {} j={}", e.role, e.j), true, 0, 0.03, "skipped: HP1/HP2 not verified");
      continue;
    }
    EnvelopeCheck env = check_envelopes(prob, tol, 200);
    double worst = std::max(env.worst_phi, env.worst_minv);
    rep.add(fmt::format("envelopes {} j={}", e.role, e.j), env.passed(0.03), worst, 0.03,
            fmt::format("{} samples", env.samples.size()));
  }
}

inline void add_constant_checks(SuiteReport& rep, const ConstantsReport& c) {
  rep.add("constants a_p <= b_p", c.a_p <= c.b_p * (1 + 1e-9), c.a_p - c.b_p, 0);
  rep.add("constants A_p <= B_p", c.A_p <= c.B_p * (1 + 1e-9) + 1e-12, c.A_p - c.B_p, 0);
}

inline void add_residual_checks(SuiteReport& rep, const ResidualReport& x, const ResidualReport& y) {
  for (const auto* r : {&x, &y}) {
    double slope = std::isnan(r->min_slope) ? 0.0 : r->min_slope;
    rep.add("residual " + r->block, r->passed(), slope, r->target + r->margin, to_string(r->verdict));
  }
}

inline SuiteReport invariant_suite(const Parametrization& P) {
  SuiteReport rep;
  add_constant_checks(rep, P.ctx.constants);
  add_term_checks(rep, P.state, P.ctx.domain, P.ctx.tol());
  add_flow_checks(rep, P.state, P.ctx.tol());
  add_residual_checks(rep, P.residual_x, P.residual_y);
  return rep;
}

inline SuiteReport invariant_suite(const FlowParametrization& P) {
  SuiteReport rep;
  const Tolerances& tol = P.ctx.tol();
  add_constant_checks(rep, P.ctx.map.constants);
  add_term_checks(rep, P.state.mean, P.ctx.map.domain, tol);
  add_flow_checks(rep, P.state.mean, tol);
  const double T = P.ctx.field.T;
  double periodic = 0, mean_osc = 0;
  for (const auto& x : cone_samples(P.ctx.map.domain, 10, 0.2, 1.0, 5)) {
    double scale = std::max(P.K(x, 0).norm(), 1e-300);
    for (double t : {0.1 * T, 0.55 * T}) periodic = std::max(periodic, (P.K(x, t + T) - P.K(x, t)).norm() / scale);
    for (const auto* list : {&P.state.osc_x, &P.state.osc_y})
      for (const auto& p : *list) {
        Vec avg = Vec::Zero(p.out_dim());
        for (double t : phase_grid(T, 64)) avg += p(x, t) / 64.0;
        mean_osc = std::max(mean_osc, avg.norm() / scale);
      }
  }
  rep.add("periodicity", periodic <= 1e-12, periodic, 1e-12);
  rep.add("zero-mean oscillatory part", mean_osc <= 1e-12, mean_osc, 1e-12);
  add_residual_checks(rep, P.residual_x, P.residual_y);
  return rep;
}

// A documented divergent configuration: the diagnosis itself is the expected outcome.
inline SuiteReport divergence_suite(const DivergentCohomologicalIntegral& e, int expected_degree) {
  SuiteReport rep;
  SuiteCheck c;
  c.name = "divergence diagnosis";
  c.passed = e.degree() == expected_degree;
  c.value = e.degree();
  c.limit = expected_degree;
  c.detail = e.what();
  c.expected_failure = true;
  rep.checks.push_back(c);
  return rep;
}

}  // namespace pmhom
