#pragma once

#include <fmt/format.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "pmhom/parametrize.hpp"

namespace pmhom {

using TimeFn = std::function<Vec(const Vec&, double)>;

// Directional derivative Dh(x) v, exact when the term provides a Jacobian.
inline Vec directional(const HomogeneousTerm& h, const Vec& x, const Vec& v, double fd_rel) {
  if (h.is_zero_polynomial()) return Vec::Zero(h.out_dim());
  if (auto J = h.exact_jacobian(x)) return *J * v;
  const double vn = v.norm();
  if (vn == 0.0) return Vec::Zero(h.out_dim());
  const double s = fd_rel * std::max(x.norm(), 1e-300) / vn;
  return (h(x + s * v) - h(x - s * v)) / (2 * s);
}

struct Harmonic {
  int k = 1;
  HomogeneousTerm cos_part, sin_part;
};

// Homogeneous of degree d in x, T-periodic in t: mean + sum_k cos_k cos(k w t) + sin_k sin(k w t).
class PeriodicTerm {
 public:
  PeriodicTerm() = default;
  PeriodicTerm(double degree, int in_dim, int out_dim, double period)
      : degree_(degree), in_dim_(in_dim), out_dim_(out_dim), period_(period),
        mean_(HomogeneousTerm::zero(degree, in_dim, out_dim)) {}

  static PeriodicTerm autonomous(const HomogeneousTerm& h, double period) {
    PeriodicTerm p(h.degree(), h.in_dim(), h.out_dim(), period);
    p.mean_ = h;
    return p;
  }

  double degree() const { return degree_; }
  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  double period() const { return period_; }
  double omega() const { return 2.0 * std::numbers::pi / period_; }
  const HomogeneousTerm& mean() const { return mean_; }
  const std::vector<Harmonic>& harmonics() const { return harmonics_; }

  void set_mean(HomogeneousTerm h) { mean_ = std::move(h); }
  void add_harmonic(Harmonic h) { harmonics_.push_back(std::move(h)); }

  bool oscillatory_only() const { return mean_.is_zero_polynomial(); }
  bool is_zero() const { return oscillatory_only() && harmonics_.empty(); }

  bool all_polynomial() const {
    if (!mean_.as_polynomial()) return false;
    for (const auto& h : harmonics_)
      if (!h.cos_part.as_polynomial() || !h.sin_part.as_polynomial()) return false;
    return true;
  }

  Vec operator()(const Vec& x, double t) const {
    Vec v = mean_.is_zero_polynomial() ? Vec::Zero(out_dim_) : mean_(x);
    for (const auto& h : harmonics_) {
      double a = h.k * omega() * t;
      if (!h.cos_part.is_zero_polynomial()) v += std::cos(a) * h.cos_part(x);
      if (!h.sin_part.is_zero_polynomial()) v += std::sin(a) * h.sin_part(x);
    }
    return v;
  }

  Vec dt(const Vec& x, double t) const {
    Vec v = Vec::Zero(out_dim_);
    for (const auto& h : harmonics_) {
      double kw = h.k * omega(), a = kw * t;
      if (!h.cos_part.is_zero_polynomial()) v -= kw * std::sin(a) * h.cos_part(x);
      if (!h.sin_part.is_zero_polynomial()) v += kw * std::cos(a) * h.sin_part(x);
    }
    return v;
  }

  Vec directional(const Vec& x, const Vec& dir, double t, double fd_rel) const {
    Vec v = pmhom::directional(mean_, x, dir, fd_rel);
    for (const auto& h : harmonics_) {
      double a = h.k * omega() * t;
      v += std::cos(a) * pmhom::directional(h.cos_part, x, dir, fd_rel);
      v += std::sin(a) * pmhom::directional(h.sin_part, x, dir, fd_rel);
    }
    return v;
  }

  // Polynomial snapshot at time t (requires all_polynomial()).
  SparsePolynomial poly_at(double t) const {
    SparsePolynomial p = *mean_.as_polynomial();
    for (const auto& h : harmonics_) {
      double a = h.k * omega() * t;
      p += *h.cos_part.as_polynomial() * std::cos(a);
      p += *h.sin_part.as_polynomial() * std::sin(a);
    }
    return p;
  }

  SparsePolynomial dt_poly_at(double t) const {
    SparsePolynomial p(in_dim_, out_dim_);
    for (const auto& h : harmonics_) {
      double kw = h.k * omega(), a = kw * t;
      p += *h.cos_part.as_polynomial() * (-kw * std::sin(a));
      p += *h.sin_part.as_polynomial() * (kw * std::cos(a));
    }
    return p;
  }

 private:
  double degree_ = 0;
  int in_dim_ = 0, out_dim_ = 0;
  double period_ = 1.0;
  HomogeneousTerm mean_;
  std::vector<Harmonic> harmonics_;
};

inline std::vector<double> phase_grid(double period, int count) {
  std::vector<double> t(count);
  for (int p = 0; p < count; ++p) t[p] = period * p / count;
  return t;
}

// Trapezoid Fourier coefficients [mean; cos_1; sin_1; ...; cos_H; sin_H] of E(x, .) stacked.
inline Vec fourier_stack(const TimeFn& E, const Vec& x, int dim, double period, int phases, int harmonics) {
  Vec out = Vec::Zero(dim * (1 + 2 * harmonics));
  const double w = 2.0 * std::numbers::pi / period;
  for (double t : phase_grid(period, phases)) {
    Vec e = E(x, t);
    out.head(dim) += e / phases;
    for (int k = 1; k <= harmonics; ++k) {
      out.segment(dim * (2 * k - 1), dim) += (2.0 / phases) * std::cos(k * w * t) * e;
      out.segment(dim * (2 * k), dim) += (2.0 / phases) * std::sin(k * w * t) * e;
    }
  }
  return out;
}

struct MeanSplit {
  HomogeneousTerm mean;
  PeriodicTerm oscillatory;
};

// Averaging split of a degree-d, T-periodic evaluator by trapezoid quadrature.
inline MeanSplit split_mean_oscillatory(const TimeFn& E, double degree, int in_dim, int out_dim, double period,
                                        const Tolerances& tol) {
  const int P = tol.phases, H = std::min(tol.harmonics, (tol.phases - 1) / 2);
  auto coef = [=](int slot) {
    return HomogeneousTerm::closed_form(degree, in_dim, out_dim, [=](const Vec& x) -> Vec {
      return fourier_stack(E, x, out_dim, period, P, H).segment(out_dim * slot, out_dim);
    });
  };
  MeanSplit s;
  s.mean = coef(0);
  s.oscillatory = PeriodicTerm(degree, in_dim, out_dim, period);
  for (int k = 1; k <= H; ++k) s.oscillatory.add_harmonic({k, coef(2 * k - 1), coef(2 * k)});
  return s;
}

// Zero-mean antiderivative in t of sum_k a_k cos + b_k sin.
inline PeriodicTerm integrate_oscillatory(const PeriodicTerm& E) {
  PeriodicTerm K(E.degree(), E.in_dim(), E.out_dim(), E.period());
  for (const auto& h : E.harmonics()) {
    const double kw = h.k * E.omega();
    K.add_harmonic({h.k, h.sin_part.scaled(-1.0 / kw), h.cos_part.scaled(1.0 / kw)});
  }
  return K;
}

struct FlowContext {
  MapContext map;
  FieldSpec field;

  const Tolerances& tol() const { return map.tol(); }
  bool autonomous() const { return field.max_harmonic() == 0; }
  int phases() const { return autonomous() ? 1 : tol().phases; }
  int harmonics() const { return autonomous() ? 0 : std::min(tol().harmonics, (tol().phases - 1) / 2); }
};

// Mean parts live in the map-style state (R holds Y); oscillatory parts separately.
struct FlowInduction {
  InductionState mean;
  std::vector<PeriodicTerm> osc_x, osc_y;
};

inline FlowContext make_flow_context(const FieldSpec& field, const DomainSpec& domain, const RunSpec& run) {
  FlowContext fc;
  MapSpec base = field.base;
  base.higher_x.clear();
  base.higher_y.clear();
  fc.map = make_context(base, domain, run);
  fc.field = field;
  return fc;
}

inline Vec flow_forcing(const FlowContext& fc, Block b, const Vec& z, double t) { return fc.field.forcing(b, z, t); }

inline Vec flow_K(const FlowContext& fc, const FlowInduction& s, const Vec& x, double t) {
  const int n = fc.map.F.n, m = fc.map.F.m;
  Vec z = eval_K(fc.map, s.mean, x);
  for (const auto& p : s.osc_x) z.head(n) += p(x, t);
  for (const auto& p : s.osc_y) z.tail(m) += p(x, t);
  return z;
}

// X(K, t) - D_x K Y - d_t K.
inline Vec flow_error(const FlowContext& fc, const FlowInduction& s, const Vec& x, double t) {
  const MapSpec& F = fc.map.F;
  const int n = F.n, m = F.m;
  const double fd = fc.tol().fd_rel;
  Vec z = flow_K(fc, s, x, t);
  Vec Y = s.mean.R(x);
  Vec E(n + m);
  E.head(n) = F.p(z) + flow_forcing(fc, Block::x, z, t) - Y;
  E.tail(m) = F.q(z) + flow_forcing(fc, Block::y, z, t);
  for (const auto& [d, h] : s.mean.Kx.terms()) E.head(n) -= directional(h, x, Y, fd);
  for (const auto& [d, h] : s.mean.Ky.terms()) E.tail(m) -= directional(h, x, Y, fd);
  for (const auto& p : s.osc_x) E.head(n) -= p.directional(x, Y, t, fd) + p.dt(x, t);
  for (const auto& p : s.osc_y) E.tail(m) -= p.directional(x, Y, t, fd) + p.dt(x, t);
  return E;
}

inline DegreeSet flow_error_degrees(const FlowContext& fc, const FlowInduction& s, Block block, double cap) {
  const MapSpec& F = fc.map.F;
  DegreeSet dx{1.0}, dy, own, osc;
  for (double d : s.mean.Kx.degrees()) dx.insert(d);
  for (const auto& p : s.osc_x) dx.insert(p.degree());
  for (double d : s.mean.Ky.degrees()) dy.insert(d);
  for (const auto& p : s.osc_y) dy.insert(p.degree());
  const auto& mean_own = block == Block::x ? s.mean.Kx : s.mean.Ky;
  for (double d : mean_own.degrees()) own.insert(d);
  for (const auto& p : block == Block::x ? s.osc_x : s.osc_y) {
    own.insert(p.degree());
    osc.insert(p.degree());
  }
  DegreeSet ydeg = s.mean.R.degrees();
  DegreeSet out = osc;
  auto add = [&](const DegreeSet& more) { out.insert(more.begin(), more.end()); };
  add(degrees_of_polynomial_composition(block == Block::x ? F.p : F.q, F.n, dx, dy, cap));
  for (const auto& f : block == Block::x ? fc.field.forcing_x : fc.field.forcing_y)
    add(degrees_of_polynomial_composition(f.poly, F.n, dx, dy, cap));
  for (double a : own)
    for (double b : ydeg)
      if (a + b - 1 <= cap + 1e-9) out.insert(a + b - 1);
  if (block == Block::x) add(ydeg);
  return out;
}

inline SparsePolynomial chop(const SparsePolynomial& p, double eps) {
  SparsePolynomial out(p.arity(), p.codomain());
  for (int c = 0; c < p.codomain(); ++c)
    for (const auto& mono : p.component(c))
      if (std::abs(mono.coeff) > eps) out.add(c, mono.coeff, mono.exps);
  return out;
}

// Directional derivative DP . V of polynomials.
inline SparsePolynomial poly_directional(const SparsePolynomial& P, const SparsePolynomial& V) {
  SparsePolynomial out(P.arity(), P.codomain());
  for (int i = 0; i < P.arity(); ++i) out += P.diff(i).times(V.slice(i, 1));
  return out;
}

inline bool flow_state_polynomial(const FlowInduction& s) {
  if (!s.mean.Kx.all_polynomial() || !s.mean.Ky.all_polynomial() || !s.mean.R.all_polynomial()) return false;
  for (const auto* list : {&s.osc_x, &s.osc_y})
    for (const auto& p : *list)
      if (!p.all_polynomial()) return false;
  return true;
}

// Degree-d part of one block at phase t, exactly, when everything is polynomial.
inline SparsePolynomial symbolic_flow_error(const FlowContext& fc, const FlowInduction& s, Block block, int d, double t) {
  const MapSpec& F = fc.map.F;
  const int n = F.n, m = F.m;
  SparsePolynomial id(n, n);
  for (int i = 0; i < n; ++i) {
    Exponents e(n, 0);
    e[i] = 1;
    id.add(i, 1.0, e);
  }
  SparsePolynomial kx = s.mean.Kx.empty() ? SparsePolynomial(n, n) : s.mean.Kx.as_polynomial();
  SparsePolynomial ky = s.mean.Ky.empty() ? SparsePolynomial(n, m) : s.mean.Ky.as_polynomial();
  SparsePolynomial kx_dt(n, n), ky_dt(n, m);
  for (const auto& p : s.osc_x) {
    kx += p.poly_at(t);
    kx_dt += p.dt_poly_at(t);
  }
  for (const auto& p : s.osc_y) {
    ky += p.poly_at(t);
    ky_dt += p.dt_poly_at(t);
  }
  SparsePolynomial Y = s.mean.R.as_polynomial();
  std::vector<SparsePolynomial> parts{id + kx, ky};
  SparsePolynomial K = SparsePolynomial::stack(parts);
  const bool xb = block == Block::x;
  SparsePolynomial E = (xb ? F.p : F.q).compose(K, d);
  const double w = fc.field.omega();
  for (const auto& f : xb ? fc.field.forcing_x : fc.field.forcing_y) {
    double phase = f.harmonic == 0 ? 1.0 : f.sine ? std::sin(f.harmonic * w * t) : std::cos(f.harmonic * w * t);
    if (phase != 0.0) E += f.poly.compose(K, d) * phase;
  }
  if (xb) E = E - Y - poly_directional(kx, Y) - kx_dt;
  else E = E - poly_directional(ky, Y) - ky_dt;
  return E.degree_part(d);
}

struct FlowExtraction {
  BlockExtraction mean;
  PeriodicTerm oscillatory;  // zero mean
  double fit_residual = 0;
};

inline FlowExtraction extract_flow_error(const FlowContext& fc, const FlowInduction& s, Block block, int d) {
  const MapSpec& F = fc.map.F;
  const int n = F.n, m = F.m;
  const int dim = block == Block::x ? n : m;
  const int P = fc.phases(), H = fc.harmonics();
  const double T = fc.field.T, eps = fc.tol().negligible;
  const GridPtr& grid = fc.map.grid;
  FlowExtraction out;
  out.mean.term = HomogeneousTerm::zero(d, n, dim);
  out.oscillatory = PeriodicTerm(d, n, dim, T);
  DegreeSet present = flow_error_degrees(fc, s, block, d + 12);
  std::vector<double> degs;
  for (double v : present)
    if (v >= d - 1e-9) degs.push_back(v);
  if (degs.empty() || std::abs(degs.front() - d) > 1e-9) return out;

  auto keep = [&](HomogeneousTerm t) -> std::optional<HomogeneousTerm> {
    if (t.is_zero_polynomial() || node_sup(t, *grid) <= eps) return std::nullopt;
    return t;
  };
  std::vector<HomogeneousTerm> coef;
  if (flow_state_polynomial(s)) {
    std::vector<SparsePolynomial> acc(1 + 2 * H, SparsePolynomial(n, dim));
    const double w = fc.field.omega();
    for (double t : phase_grid(T, P)) {
      SparsePolynomial e = symbolic_flow_error(fc, s, block, d, t);
      acc[0] += e * (1.0 / P);
      for (int k = 1; k <= H; ++k) {
        acc[2 * k - 1] += e * (2.0 / P * std::cos(k * w * t));
        acc[2 * k] += e * (2.0 / P * std::sin(k * w * t));
      }
    }
    for (auto& a : acc) coef.push_back(HomogeneousTerm::polynomial(chop(a, 1e-14), d));
  } else {
    TimeFn E = [&](const Vec& x, double t) -> Vec {
      Vec e = flow_error(fc, s, x, t);
      return block == Block::x ? Vec(e.head(n)) : Vec(e.tail(m));
    };
    auto f = [&](const Vec& x) -> Vec { return fourier_stack(E, x, dim, T, P, H); };
    ExtractionResult ex = extract_homogeneous(f, dim * (1 + 2 * H), d, degs, grid, fc.map.ladder);
    out.fit_residual = ex.fit_residual;
    Mat values = node_values(ex.term, *grid);
    for (int slot = 0; slot <= 2 * H; ++slot)
      coef.push_back(HomogeneousTerm::interpolant(grid, d, values.middleRows(slot * dim, dim), ex.term.error_bound()));
  }
  if (auto t = keep(coef[0])) {
    out.mean.term = *t;
    out.mean.zero = false;
  }
  out.mean.max_value = node_sup(coef[0], *grid);
  out.mean.fit_residual = out.fit_residual;
  for (int k = 1; k <= H; ++k) {
    auto c = keep(coef[2 * k - 1]), sn = keep(coef[2 * k]);
    if (!c && !sn) continue;
    out.oscillatory.add_harmonic(
        {k, c ? *c : HomogeneousTerm::zero(d, n, dim), sn ? *sn : HomogeneousTerm::zero(d, n, dim)});
  }
  return out;
}

inline void add_oscillatory(const FlowContext& fc, FlowInduction& s, int j, Block block, const FlowExtraction& ex) {
  if (ex.oscillatory.is_zero()) return;
  PeriodicTerm K = integrate_oscillatory(ex.oscillatory);
  LedgerEntry e;
  e.j = j;
  e.role = block == Block::x ? "Khat_x" : "Khat_y";
  e.degree = K.degree();
  e.solver = "quadrature";
  e.extraction_residual = ex.fit_residual;
  for (const auto& h : K.harmonics())
    e.max_value = std::max({e.max_value, node_sup(h.cos_part, *fc.map.grid), node_sup(h.sin_part, *fc.map.grid)});
  e.nonzero = true;
  e.note = fmt::format("{} harmonic(s)", K.harmonics().size());
  s.mean.ledger.push_back(e);
  (block == Block::x ? s.osc_x : s.osc_y).push_back(std::move(K));
}

inline void rename_residue_entries(InductionState& s, std::size_t from) {
  for (std::size_t i = from; i < s.ledger.size(); ++i)
    if (s.ledger[i].role == "R") s.ledger[i].role = "Y";
}

inline void induction_step_flow(const FlowContext& fc, FlowInduction& s) {
  const MapSpec& F = fc.map.F;
  const int j = s.mean.j + 1;
  if (j + F.N > fc.map.run.ell + 1) throw ValidationError("induction step beyond the target order");
  FlowExtraction Ex = detail::annotate(j, "x", [&] { return extract_flow_error(fc, s, Block::x, j + F.N - 1); });
  FlowExtraction Ey = detail::annotate(j, "y", [&] { return extract_flow_error(fc, s, Block::y, j + F.L() - 1); });
  const std::size_t mark = s.mean.ledger.size();
  HomogeneousTerm Ky = solve_ky(fc.map, s.mean, j, Ey.mean);
  solve_kx(fc.map, s.mean, j, Ex.mean, Ky);
  rename_residue_entries(s.mean, mark);
  if (!Ky.is_zero_polynomial()) s.mean.Ky.add(Ky);
  add_oscillatory(fc, s, j, Block::x, Ex);
  add_oscillatory(fc, s, j, Block::y, Ey);
  s.mean.j = j;
  s.mean.Kx.set_remainder_order(j);
  s.mean.Ky.set_remainder_order(j);
  s.mean.R.set_remainder_order(j + F.N - 1);
}

inline void tail_sweep_flow(const FlowContext& fc, FlowInduction& s) {
  const MapSpec& F = fc.map.F;
  if (F.M >= F.N) return;
  const int ell = fc.map.run.ell;
  for (int j = ell - F.N + 2; j <= ell - F.L() + 1; ++j) {
    FlowExtraction Ey = extract_flow_error(fc, s, Block::y, j + F.L() - 1);
    HomogeneousTerm Ky = solve_ky(fc.map, s.mean, j, Ey.mean);
    s.mean.ledger.back().note += s.mean.ledger.back().note.empty() ? "tail sweep" : "; tail sweep";
    if (!Ky.is_zero_polynomial()) s.mean.Ky.add(Ky);
    add_oscillatory(fc, s, j, Block::y, Ey);
    s.mean.j = std::max(s.mean.j, j);
  }
}

struct FlowParametrization {
  FlowContext ctx;
  FlowInduction state;
  int ell = 0;
  ResidualReport residual_x, residual_y;

  Vec K(const Vec& x, double t) const { return flow_K(ctx, state, x, t); }
  Vec Y(const Vec& x) const { return state.mean.R(x); }
  Vec residual(const Vec& x, double t) const { return flow_error(ctx, state, x, t); }
  const std::vector<LedgerEntry>& ledger() const { return state.mean.ledger; }
  const LedgerEntry* find(const std::string& role, double degree) const {
    for (const auto& e : state.mean.ledger)
      if (e.role == role && e.degree == degree) return &e;
    return nullptr;
  }
};

inline void measure_flow_residual(FlowParametrization& P) {
  const int n = P.ctx.map.F.n, m = P.ctx.map.F.m;
  Tolerances tol = P.ctx.tol();
  tol.slope_margin = tol.flow_slope_margin;
  std::vector<double> phases = P.ctx.autonomous() ? std::vector<double>{0.0}
                                                  : phase_grid(P.ctx.field.T, tol.verify_phases);
  P.residual_x = residual_order([&](const Vec& x, double t) -> Vec { return P.residual(x, t).head(n); },
                                P.ctx.map.domain, P.ell, tol, "x", phases);
  P.residual_y = residual_order([&](const Vec& x, double t) -> Vec { return P.residual(x, t).tail(m); },
                                P.ctx.map.domain, P.ell, tol, "y", phases);
}

inline FlowParametrization run_flow(const ProblemDocument& doc) {
  if (doc.kind != ProblemKind::flow) throw ValidationError("run_flow expects a field document");
  FlowParametrization P;
  P.ctx = make_flow_context(doc.field, doc.domain, doc.run);
  P.ell = doc.run.ell;
  P.state.mean = initialize(P.ctx.map);
  while (P.state.mean.j + 1 <= P.ell - doc.field.base.N + 1) induction_step_flow(P.ctx, P.state);
  tail_sweep_flow(P.ctx, P.state);
  measure_flow_residual(P);
  return P;
}

}  // namespace pmhom
