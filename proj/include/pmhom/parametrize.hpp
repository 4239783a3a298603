#pragma once

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pmhom/cohomology.hpp"
#include "pmhom/constants.hpp"
#include "pmhom/document.hpp"
#include "pmhom/graded.hpp"
#include "pmhom/model.hpp"
#include "pmhom/verify.hpp"

namespace pmhom {

// One solver invocation of the induction.
struct LedgerEntry {
  int j = 0;
  std::string role;  // K_x, K_y or R
  double degree = 0;
  std::string solver;
  double margin = std::numeric_limits<double>::quiet_NaN();
  double tail_error = 0;
  double interp_error = 0;
  double pde_residual = 0;
  double extraction_residual = 0;
  double max_value = 0;  // sup over the cross-section nodes
  bool nonzero = false;
  std::string note;
  std::shared_ptr<const CohomologicalProblem> problem;
};

// Fixed data of a map run.
struct MapContext {
  MapSpec F;
  DomainSpec domain;
  RunSpec run;
  ConstantsReport constants;
  std::optional<RegularityBudget> budget;
  std::string budget_note;
  GridPtr grid;
  std::vector<double> ladder;
  SparsePolynomial pa, dxp, dyp, dyq;

  const Tolerances& tol() const { return run.tol; }
  bool strict() const { return run.hypotheses == HypothesisPolicy::strict; }
};

inline MapContext make_context(const MapSpec& F, const DomainSpec& domain, const RunSpec& run) {
  MapContext ctx;
  ctx.F = F;
  ctx.domain = domain;
  ctx.run = run;
  ctx.constants = estimate_constants(F, domain, run.tol);
  check_hypotheses(F, domain, ctx.constants, run.tol);
  try {
    ctx.budget = regularity_budget(ctx.constants, F.N, F.M, run.ell, run.tol);
  } catch (const BudgetUndefined& e) {
    ctx.budget_note = e.what();
  }
  ctx.grid = std::make_shared<const CrossSectionGrid>(domain, run.tol.nodes, run.tol.interp, run.tol.chart_pad);
  ctx.ladder = radius_ladder(domain.rho(), run.tol);
  ctx.pa = F.pa();
  ctx.dxp = F.dxp0();
  ctx.dyp = F.dyp0();
  ctx.dyq = F.dyq0();
  return ctx;
}

// K(x) = (x + Kx(x), Ky(x)) and R(x) = x + sum of R terms (the degree-N term is p(x,0)).
struct InductionState {
  int j = 1;
  GradedFunction Kx, Ky, R;
  std::vector<LedgerEntry> ledger;
};

inline Vec eval_K(const MapContext& ctx, const InductionState& s, const Vec& x) {
  Vec z(ctx.F.n + ctx.F.m);
  z.head(ctx.F.n) = x + s.Kx(x);
  z.tail(ctx.F.m) = s.Ky(x);
  return z;
}

inline Vec eval_R(const InductionState& s, const Vec& x) { return x + s.R(x); }

// F∘K - K∘R with the identity parts cancelled analytically.
inline Vec invariance_error(const MapContext& ctx, const InductionState& s, const Vec& x) {
  const int n = ctx.F.n, m = ctx.F.m;
  Vec shift = s.R(x);
  Vec Rx = x + shift;
  if (ctx.strict() && !ctx.domain.in_cone(Rx)) throw LeftDomain("R(x) leaves V during error evaluation");
  MapNonlinear nl = map_nonlinear(ctx.F, eval_K(ctx, s, x));
  Vec E(n + m);
  E.head(n) = nl.x - shift;
  E.tail(m) = nl.y;
  for (const auto& [d, t] : s.Kx.terms())
    if (!t.is_zero_polynomial()) E.head(n) += t(x) - t(Rx);
  for (const auto& [d, t] : s.Ky.terms())
    if (!t.is_zero_polynomial()) E.tail(m) += t(x) - t(Rx);
  return E;
}

// Degrees that can occur in one block of the invariance error, from grade bookkeeping.
inline DegreeSet error_degrees(const MapContext& ctx, const InductionState& s, Block block, double cap) {
  const MapSpec& F = ctx.F;
  DegreeSet dx{1.0};
  for (double d : s.Kx.degrees()) dx.insert(d);
  DegreeSet dy = s.Ky.degrees();
  DegreeSet out;
  auto add = [&](const DegreeSet& more) { out.insert(more.begin(), more.end()); };
  const auto& own = block == Block::x ? s.Kx : s.Ky;
  DegreeSet shifts = s.R.degrees();
  for (double d : own.degrees()) add(degrees_of_shift(d, shifts, cap));
  for (const auto& piece : homogeneous_parts(F))
    if (piece.block == block) add(degrees_of_polynomial_composition(piece.poly, F.n, dx, dy, cap));
  if (block == Block::x) add(shifts);
  const std::string& rem = block == Block::x ? F.remainder_x : F.remainder_y;
  if (!rem.empty())
    for (int d = F.r + 1; d <= cap; ++d) out.insert(d);
  return out;
}

// Exact degree-d part of one error block when K and R are polynomial so far.
inline std::optional<SparsePolynomial> symbolic_error(const MapContext& ctx, const InductionState& s, Block block,
                                                      int d) {
  const MapSpec& F = ctx.F;
  if (!F.remainder_x.empty() || !F.remainder_y.empty()) return std::nullopt;
  if (!s.Kx.all_polynomial() || !s.Ky.all_polynomial() || !s.R.all_polynomial()) return std::nullopt;
  const int n = F.n;
  SparsePolynomial id(n, n);
  for (int i = 0; i < n; ++i) {
    Exponents e(n, 0);
    e[i] = 1;
    id.add(i, 1.0, e);
  }
  SparsePolynomial kx = s.Kx.empty() ? SparsePolynomial(n, n) : s.Kx.as_polynomial();
  SparsePolynomial ky = s.Ky.empty() ? SparsePolynomial(n, F.m) : s.Ky.as_polynomial();
  SparsePolynomial shift = s.R.empty() ? SparsePolynomial(n, n) : s.R.as_polynomial();
  std::vector<SparsePolynomial> parts{id + kx, ky};
  SparsePolynomial K = SparsePolynomial::stack(parts);
  SparsePolynomial R = id + shift;
  SparsePolynomial E;
  if (block == Block::x) {
    E = F.p.compose(K, d) + F.f().compose(K, d) - shift + kx - kx.compose(R, d);
  } else {
    E = F.q.compose(K, d) + F.g().compose(K, d) + ky - ky.compose(R, d);
  }
  return E.degree_part(d);
}

struct BlockExtraction {
  HomogeneousTerm term;
  double fit_residual = 0;
  double max_value = 0;
  bool zero = true;
};

inline double node_sup(const HomogeneousTerm& h, const CrossSectionGrid& grid) {
  if (h.is_zero_polynomial()) return 0.0;
  double s = 0;
  for (const auto& u : grid.nodes()) s = std::max(s, h(u).cwiseAbs().maxCoeff());
  return s;
}

// Degree-d part of one block of the invariance error.
inline BlockExtraction extract_error(const MapContext& ctx, const InductionState& s, Block block, int d) {
  const int n = ctx.F.n, m = ctx.F.m;
  const int dim = block == Block::x ? n : m;
  BlockExtraction out;
  out.term = HomogeneousTerm::zero(d, n, dim);
  DegreeSet present = error_degrees(ctx, s, block, d + 12);
  std::vector<double> degs;
  for (double v : present)
    if (v >= d - 1e-9) degs.push_back(v);
  if (degs.empty() || std::abs(degs.front() - d) > 1e-9) return out;
  if (auto poly = symbolic_error(ctx, s, block, d)) {
    HomogeneousTerm t = HomogeneousTerm::polynomial(*poly, d);
    out.max_value = node_sup(t, *ctx.grid);
    out.zero = poly->is_zero() || out.max_value <= ctx.tol().negligible;
    if (!out.zero) out.term = t;
    return out;
  }
  auto f = [&](const Vec& x) -> Vec {
    Vec E = invariance_error(ctx, s, x);
    return block == Block::x ? Vec(E.head(n)) : Vec(E.tail(m));
  };
  ExtractionResult ex = extract_homogeneous(f, dim, d, degs, ctx.grid, ctx.ladder);
  out.fit_residual = ex.fit_residual;
  out.max_value = node_sup(ex.term, *ctx.grid);
  out.zero = out.max_value <= ctx.tol().negligible;
  if (!out.zero) out.term = ex.term;
  return out;
}

inline void require_map_hypotheses(const MapContext& ctx) {
  if (!ctx.strict()) return;
  const auto& c = ctx.constants;
  if (!c.h1.satisfied) throw HypothesisFailure(fmt::format("H1 fails ({}), margin {:.4g}", c.h1.note, c.h1.margin));
  if (!c.h2.satisfied) throw HypothesisFailure(fmt::format("H2 fails ({}), margin {:.4g}", c.h2.note, c.h2.margin));
  if (!c.h3.satisfied) throw HypothesisFailure(fmt::format("H3 fails ({}), a_V = {:.4g}", c.h3.note, c.h3.margin));
}

inline InductionState initialize(const MapContext& ctx) {
  require_map_hypotheses(ctx);
  const int n = ctx.F.n, m = ctx.F.m;
  InductionState s;
  s.j = 1;
  s.Kx = GradedFunction(n, n, 1);
  s.Ky = GradedFunction(n, m, 1);
  s.R = GradedFunction(n, n, ctx.F.N);
  s.R.add(HomogeneousTerm::polynomial(ctx.pa, ctx.F.N));
  return s;
}

inline std::shared_ptr<CohomologicalProblem> cohomological_problem(const MapContext& ctx, const SparsePolynomial& Q,
                                                                   int k, const HomogeneousTerm& w) {
  auto prob = std::make_shared<CohomologicalProblem>(
      make_problem(ctx.pa, Q, k, ctx.F.N, w, ctx.domain, ctx.grid, ctx.tol()));
  prob->policy = ctx.run.hypotheses;
  return prob;
}

// Radial closed form when pa = p0(x) x, else the integral formula.
inline CohomologySolution solve_dispatch(const MapContext& ctx, const CohomologicalProblem& prob) {
  if (ctx.run.solver == SolverChoice::automatic && !prob.force && radial_factor(prob.pa)) {
    try {
      return solve_radial(prob, ctx.tol());
    } catch (const SingularPencil&) {
    }
  }
  return solve_general(prob, ctx.tol());
}

inline void record_solution(LedgerEntry& e, const CohomologySolution& sol, const GridPtr& grid) {
  e.solver = sol.solver;
  e.tail_error = sol.tail_error;
  e.interp_error = sol.interp_error;
  e.pde_residual = sol.pde_residual;
  e.max_value = node_sup(sol.term, *grid);
  e.nonzero = e.max_value > 0;
  if (sol.measured_envelope) e.note = "decay envelope measured (HP2 not verified)";
}

namespace detail {

template <class Fn>
auto annotate(int j, const std::string& block, Fn fn) {
  try {
    return fn();
  } catch (const DivergentCohomologicalIntegral& e) {
    throw e.annotated(j, block);
  }
}

}  // namespace detail

inline HomogeneousTerm solve_ky(const MapContext& ctx, InductionState& s, int j, const BlockExtraction& E) {
  const MapSpec& F = ctx.F;
  const int n = F.n, m = F.m;
  LedgerEntry e;
  e.j = j;
  e.role = "K_y";
  e.degree = j;
  e.extraction_residual = E.fit_residual;
  HomogeneousTerm K = HomogeneousTerm::zero(j, n, m);
  if (E.zero) {
    e.solver = "zero";
    e.note = "E_y vanishes at this degree";
  } else if (F.N > F.M) {
    auto sol = solve_algebraic(ctx.dyq, m, F.M, E.term, ctx.domain, ctx.tol());
    record_solution(e, sol, ctx.grid);
    K = sol.term;
  } else {
    SparsePolynomial Q = F.N == F.M ? ctx.dyq : SparsePolynomial(n, m * m);
    auto prob = cohomological_problem(ctx, Q, m, E.term);
    e.margin = prob->margin();
    auto sol = detail::annotate(j, "y", [&] { return solve_dispatch(ctx, *prob); });
    record_solution(e, sol, ctx.grid);
    e.problem = prob;
    K = sol.term;
  }
  s.ledger.push_back(e);
  return K;
}

// R = w - (DKx pa - D_x p Kx).
inline HomogeneousTerm residue_term(const MapContext& ctx, const HomogeneousTerm& w, const HomogeneousTerm& Kx) {
  if (Kx.is_zero_polynomial()) return w;
  const int n = ctx.F.n;
  SparsePolynomial pa = ctx.pa, dxp = ctx.dxp;
  const double fd = ctx.tol().fd_rel;
  return HomogeneousTerm::closed_form(w.degree(), n, n, [w, Kx, pa, dxp, n, fd](const Vec& x) -> Vec {
    Vec lhs = differentiate_term(Kx, x, fd) * pa(x) - eval_matrix(dxp, x, n, n) * Kx(x);
    return w(x) - lhs;
  });
}

inline void solve_kx(const MapContext& ctx, InductionState& s, int j, const BlockExtraction& E,
                     const HomogeneousTerm& Ky) {
  const MapSpec& F = ctx.F;
  const int n = F.n, m = F.m;
  const double deg = j + F.N - 1;
  HomogeneousTerm coupling = matrix_times(ctx.dyp, n, m, F.N - 1, Ky, ctx.tol().fd_rel);
  std::vector<HomogeneousTerm> parts;
  if (!E.zero) parts.push_back(E.term);
  if (!coupling.is_zero_polynomial()) parts.push_back(coupling);
  HomogeneousTerm w = parts.empty() ? HomogeneousTerm::zero(deg, n, n)
                                    : parts.size() == 1 ? parts[0] : HomogeneousTerm::sum(parts);

  const auto& c = ctx.constants;
  const double margin = solvability_margin(j - 1, c, -c.B_p);
  const double band = 0.02 * std::max(1.0, std::abs(c.B_p / c.a_p));
  LedgerEntry kx;
  kx.j = j;
  kx.role = "K_x";
  kx.degree = j;
  kx.margin = margin;
  kx.extraction_residual = E.fit_residual;
  LedgerEntry r;
  r.j = j;
  r.role = "R";
  r.degree = deg;
  r.margin = margin;
  HomogeneousTerm K = HomogeneousTerm::zero(j, n, n);
  HomogeneousTerm Rterm = HomogeneousTerm::zero(deg, n, n);

  const bool zero_rhs = w.is_zero_polynomial();
  const bool normal = ctx.run.strategy == Strategy::normal_form;
  if (zero_rhs) {
    kx.solver = "zero";
    r.solver = "zero";
    kx.note = "right-hand side vanishes";
  } else if (normal && (ctx.run.force_zero_R || margin > band)) {
    auto prob = cohomological_problem(ctx, ctx.dxp, n, w);
    prob->force = ctx.run.force_zero_R && margin <= band;
    auto sol = detail::annotate(j, "x", [&] { return solve_dispatch(ctx, *prob); });
    record_solution(kx, sol, ctx.grid);
    kx.problem = prob;
    K = sol.term;
    r.solver = "zero";
    r.note = "normal form";
  } else {
    if (normal) {
      kx.solver = "zero";
      kx.note = margin > -band ? "solvability margin within sampling noise; R kept" : "solvability margin <= 0";
    } else if (auto it = ctx.run.free_kx.find(j); it != ctx.run.free_kx.end()) {
      K = HomogeneousTerm::polynomial(it->second, j);
      kx.solver = "free";
      kx.nonzero = !it->second.is_zero();
    } else {
      kx.solver = "free";
      kx.note = "free choice K_x = 0";
    }
    Rterm = residue_term(ctx, w, K);
    r.solver = "residue";
    r.max_value = node_sup(Rterm, *ctx.grid);
    r.nonzero = r.max_value > ctx.tol().negligible;
    if (!r.nonzero) Rterm = HomogeneousTerm::zero(deg, n, n);
  }
  s.ledger.push_back(kx);
  s.ledger.push_back(r);
  if (!K.is_zero_polynomial()) s.Kx.add(K);
  if (!Rterm.is_zero_polynomial()) s.R.add(Rterm);
}

// Advances the induction from j - 1 to j = s.j + 1.
inline void induction_step(const MapContext& ctx, InductionState& s) {
  const MapSpec& F = ctx.F;
  const int j = s.j + 1;
  if (j + F.N > ctx.run.ell + 1) throw ValidationError("induction step beyond the target order");
  BlockExtraction Ex = detail::annotate(j, "x", [&] { return extract_error(ctx, s, Block::x, j + F.N - 1); });
  BlockExtraction Ey = detail::annotate(j, "y", [&] { return extract_error(ctx, s, Block::y, j + F.L() - 1); });
  HomogeneousTerm Ky = solve_ky(ctx, s, j, Ey);
  solve_kx(ctx, s, j, Ex, Ky);
  if (!Ky.is_zero_polynomial()) s.Ky.add(Ky);
  s.j = j;
  s.Kx.set_remainder_order(j);
  s.Ky.set_remainder_order(j);
  s.R.set_remainder_order(j + F.N - 1);
}

// Extra y-degrees j = ell-N+2 .. ell-L+1 when M < N.
inline void tail_sweep(const MapContext& ctx, InductionState& s) {
  const MapSpec& F = ctx.F;
  if (F.M >= F.N) return;
  const int ell = ctx.run.ell;
  for (int j = ell - F.N + 2; j <= ell - F.L() + 1; ++j) {
    BlockExtraction Ey = extract_error(ctx, s, Block::y, j + F.L() - 1);
    HomogeneousTerm Ky = solve_ky(ctx, s, j, Ey);
    s.ledger.back().note += s.ledger.back().note.empty() ? "tail sweep" : "; tail sweep";
    if (!Ky.is_zero_polynomial()) s.Ky.add(Ky);
    s.Ky.set_remainder_order(j);
    s.j = std::max(s.j, j);
  }
}

struct Parametrization {
  MapContext ctx;
  InductionState state;
  int ell = 0;
  ResidualReport residual_x, residual_y;

  Vec K(const Vec& x) const { return eval_K(ctx, state, x); }
  Vec R(const Vec& x) const { return eval_R(state, x); }
  Vec residual(const Vec& x) const { return invariance_error(ctx, state, x); }
  const std::vector<LedgerEntry>& ledger() const { return state.ledger; }
  const LedgerEntry* find(const std::string& role, double degree) const {
    for (const auto& e : state.ledger)
      if (e.role == role && e.degree == degree) return &e;
    return nullptr;
  }
};

inline void measure_residual(Parametrization& P) {
  const int n = P.ctx.F.n, m = P.ctx.F.m;
  const Tolerances& tol = P.ctx.tol();
  P.residual_x = residual_order([&](const Vec& x, double) -> Vec { return P.residual(x).head(n); }, P.ctx.domain,
                                P.ell, tol, "x");
  P.residual_y = residual_order([&](const Vec& x, double) -> Vec { return P.residual(x).tail(m); }, P.ctx.domain,
                                P.ell, tol, "y");
}

inline Parametrization run(const ProblemDocument& doc) {
  if (doc.kind != ProblemKind::map) throw ValidationError("run expects a map document");
  Parametrization P;
  P.ctx = make_context(doc.map, doc.domain, doc.run);
  P.ell = doc.run.ell;
  P.state = initialize(P.ctx);
  while (P.state.j + 1 <= P.ell - doc.map.N + 1) induction_step(P.ctx, P.state);
  tail_sweep(P.ctx, P.state);
  measure_residual(P);
  return P;
}

}  // namespace pmhom
