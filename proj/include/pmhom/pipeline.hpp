#pragma once

#include <fmt/format.h>

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pmhom/corpus.hpp"
#include "pmhom/report.hpp"

namespace pmhom {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_hypothesis = 2, exit_divergence = 3 };

// Command-line overrides applied on top of a loaded document.
struct Overrides {
  std::optional<int> ell;
  std::optional<double> rho;
  std::optional<Strategy> strategy;
  bool force_zero_R = false;
  std::optional<double> tail_tol;
  std::optional<double> ode_rtol;
  std::optional<int> nodes;

  void apply(ProblemDocument& doc) const {
    if (ell) doc.run.ell = *ell;
    if (rho) doc.domain = doc.domain.with_rho(*rho);
    if (strategy) doc.run.strategy = *strategy;
    if (force_zero_R) doc.run.force_zero_R = true;
    if (tail_tol) doc.run.tol.tail_tol = *tail_tol;
    if (ode_rtol) doc.run.tol.ode_rtol = *ode_rtol;
    if (nodes) doc.run.tol.nodes = *nodes;
    doc.validate();
  }
};

struct RunResult {
  int exit_code = exit_ok;
  Outputs outputs;
  std::string message;  // one line for the terminal
};

inline RunResult failure(int code, const ProblemDocument& doc, const std::string& source, const std::string& what) {
  RunResult r;
  r.exit_code = code;
  r.message = what;
  r.outputs.report = problem_header(doc, source);
  try {
    MapContext ctx = make_context(doc.base(), doc.domain, doc.run);
    r.outputs.report += constants_text(ctx);
    r.outputs.constants = constants_csv(ctx.constants);
  } catch (const Error&) {
  }
  const char* label = code == exit_divergence ? "divergence" : code == exit_hypothesis ? "hypothesis failure" : "error";
  r.outputs.report += fmt::format("\nstatus: {}\n{}\n", label, what);
  return r;
}

// Runs fn, mapping the error taxonomy to exit codes.
template <class Fn>
RunResult guarded(const ProblemDocument& doc, const std::string& source, Fn fn) {
  try {
    return fn();
  } catch (const DivergentCohomologicalIntegral& e) {
    return failure(exit_divergence, doc, source, e.what());
  } catch (const HypothesisFailure& e) {
    return failure(exit_hypothesis, doc, source, e.what());
  } catch (const LeftDomain& e) {
    return failure(exit_hypothesis, doc, source, e.what());
  } catch (const Error& e) {
    return failure(exit_usage, doc, source, e.what());
  }
}

inline RunResult check_document(const ProblemDocument& doc, const std::string& source) {
  return guarded(doc, source, [&] {
    RunSpec run = doc.run;
    run.hypotheses = HypothesisPolicy::monitor;
    MapContext ctx = make_context(doc.base(), doc.domain, run);
    RunResult r;
    const auto& c = ctx.constants;
    bool ok = c.h1.satisfied && c.h2.satisfied && c.h3.satisfied;
    r.exit_code = ok || doc.run.hypotheses == HypothesisPolicy::monitor ? exit_ok : exit_hypothesis;
    r.outputs.report = problem_header(doc, source) + constants_text(ctx) +
                       fmt::format("\nstatus: {}\n", ok ? "hypotheses satisfied" : "hypotheses fail");
    r.outputs.constants = constants_csv(c);
    r.outputs.extras.emplace_back("witnesses.csv", witnesses_csv(c));
    std::vector<ConstantsReport> drift{c};
    for (double f : {0.5, 0.25}) drift.push_back(estimate_constants(doc.base(), doc.domain.with_rho(f * doc.domain.rho()), run.tol));
    r.outputs.extras.emplace_back("drift.csv", drift_csv(drift));
    r.message = ok ? "hypotheses satisfied" : "hypotheses fail";
    return r;
  });
}

inline RunResult solve_document(const ProblemDocument& doc, const std::string& source, bool with_suite) {
  return guarded(doc, source, [&] {
    RunResult r;
    if (doc.kind == ProblemKind::map) {
      Parametrization P = run(doc);
      std::optional<SuiteReport> suite;
      if (with_suite) suite = invariant_suite(P);
      r.outputs = map_outputs(P, doc, source, suite ? &*suite : nullptr);
      if (suite) {
        r.outputs.extras.emplace_back("suite.csv", suite->csv());
        r.outputs.extras.emplace_back("rays.csv", rays_csv(P.residual_x, P.residual_y));
      }
      bool ok = P.residual_x.passed() && P.residual_y.passed() && (!suite || suite->passed());
      r.exit_code = ok ? exit_ok : exit_usage;
      r.message = ok ? "ok" : "verification failed";
    } else {
      FlowParametrization P = run_flow(doc);
      std::optional<SuiteReport> suite;
      if (with_suite) suite = invariant_suite(P);
      r.outputs = flow_outputs(P, doc, source, suite ? &*suite : nullptr);
      if (suite) {
        r.outputs.extras.emplace_back("suite.csv", suite->csv());
        r.outputs.extras.emplace_back("rays.csv", rays_csv(P.residual_x, P.residual_y));
      }
      bool ok = P.residual_x.passed() && P.residual_y.passed() && (!suite || suite->passed());
      r.exit_code = ok ? exit_ok : exit_usage;
      r.message = ok ? "ok" : "verification failed";
    }
    return r;
  });
}

// --sweep name=v1,v2,... parsed into a parameter grid.
struct SweepAxis {
  std::string name;
  std::vector<std::string> values;
};

inline SweepAxis parse_sweep(const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) throw ParseError("sweep must look like name=v1,v2,...");
  SweepAxis axis{spec.substr(0, eq), {}};
  std::string rest = spec.substr(eq + 1);
  for (std::size_t i = 0;;) {
    auto j = rest.find(',', i);
    std::string v = rest.substr(i, j == std::string::npos ? std::string::npos : j - i);
    if (v.empty()) throw ParseError("empty value in sweep '" + spec + "'");
    axis.values.push_back(v);
    if (j == std::string::npos) break;
    i = j + 1;
  }
  return axis;
}

using ParamPoint = std::map<std::string, std::string>;

inline std::vector<ParamPoint> sweep_grid(std::string_view document, const std::vector<SweepAxis>& axes) {
  const auto names = placeholders(document);
  std::set<std::string> seen;
  for (const auto& a : axes) {
    if (!names.count(a.name)) throw ValidationError("sweep parameter '" + a.name + "' is not a placeholder of the document");
    if (!seen.insert(a.name).second) throw ValidationError("sweep parameter '" + a.name + "' given twice");
  }
  std::vector<ParamPoint> grid{ParamPoint{}};
  for (const auto& a : axes) {
    std::vector<ParamPoint> next;
    for (const auto& p : grid)
      for (const auto& v : a.values) {
        ParamPoint q = p;
        q[a.name] = v;
        next.push_back(std::move(q));
      }
    grid = std::move(next);
  }
  return grid;
}

inline std::string point_label(const ParamPoint& p) {
  std::string out;
  for (const auto& [k, v] : p) out += (out.empty() ? "" : "_") + k + "=" + v;
  return out.empty() ? "default" : out;
}

// Closed forms used by the bundled examples.
inline double ex2_ky_closed_form(double a, double b, const Vec& x) {
  return -std::pow(x(1), 3) / ((b + 3 * a - 1) * x(0));
}

// Closed form for p = -(x1^3, x2^3), q = 2|x|^2 y, g = x1^2 x2^2, sign matching the integral formula.
inline double ex3_ky_closed_form(const Vec& x) {
  const double u = x(0) * x(0), v = x(1) * x(1);
  if (u == 0 || v == 0) return 0.0;
  const double D = v - u;
  return -u * v * ((v + u) / (2 * D * D) - u * v / (D * D * D) * std::log(v / u));
}

inline ParamPoint example_params(const ExampleInfo& ex, const ParamPoint& extra = {}) {
  ParamPoint p = param_defaults(corpus_document(ex.document));
  for (const auto& [k, v] : ex.params) p[k] = v;
  for (const auto& [k, v] : extra) p[k] = v;
  return p;
}

inline ProblemDocument example_document(const ExampleInfo& ex, const ParamPoint& extra = {}) {
  return load_problem(corpus_document(ex.document), example_params(ex, extra));
}

inline std::vector<Vec> comparison_points(const DomainSpec& domain, int count) {
  std::vector<Vec> out;
  for (const auto& u : interior_probe_points(domain, count, 0.05)) out.push_back(0.5 * domain.rho() * u / domain.norm_x()(u));
  return out;
}

inline double relative(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

// Columns: point, interpolated value, direct quadrature value (when given), reference.
inline std::string comparison_csv(const std::vector<Vec>& pts, const std::vector<double>& got,
                                  const std::vector<double>& direct, const std::vector<double>& want,
                                  const std::string& label) {
  std::string out = fmt::format("x1,x2,{},{}_direct,reference,rel_error,rel_error_direct\n", label, label);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double d = direct.empty() ? std::nan("") : direct[i];
    out += fmt::format("{:.10g},{:.10g},{:.17g},{:.17g},{:.17g},{:.3e},{:.3e}\n", pts[i](0), pts[i](1), got[i], d,
                       want[i], relative(got[i], want[i]), direct.empty() ? std::nan("") : relative(d, want[i]));
  }
  return out;
}

inline double worst_relative(const std::vector<double>& got, const std::vector<double>& want) {
  double w = 0;
  for (std::size_t i = 0; i < got.size(); ++i) w = std::max(w, relative(got[i], want[i]));
  return w;
}

// Interpolated and directly integrated K_y of degree 2 against a reference.
template <class Reference>
void degree2_comparison(RunResult& r, const Parametrization& P, const std::vector<Vec>& pts, Reference ref,
                        const std::string& label) {
  const HomogeneousTerm* h = P.state.Ky.at(2);
  const LedgerEntry* e = P.find("K_y", 2);
  std::optional<HomogeneousTerm> direct;
  if (e && e->problem && e->solver != "algebraic") direct = lazy_solution(*e->problem, P.ctx.tol());
  std::vector<double> got, dir, want;
  for (const auto& x : pts) {
    got.push_back(h ? (*h)(x)(0) : 0.0);
    if (direct) dir.push_back((*direct)(x)(0));
    want.push_back(ref(x));
  }
  r.outputs.extras.emplace_back("comparison.csv", comparison_csv(pts, got, dir, want, "K_y_deg2"));
  r.outputs.report += fmt::format("K_y degree 2 vs {}: worst relative error {:.3e} interpolated", label,
                                  worst_relative(got, want));
  if (direct) r.outputs.report += fmt::format(", {:.3e} direct", worst_relative(dir, want));
  r.outputs.report += "\n";
}

inline RunResult run_example(const std::string& name, const Overrides& ov, const ParamPoint& extra = {}) {
  const ExampleInfo& ex = find_example(name);
  const ParamPoint params = example_params(ex, extra);
  ProblemDocument doc = example_document(ex, extra);
  ov.apply(doc);
  const std::string source = "example " + name;
  RunResult r = solve_document(doc, source, false);
  r.outputs.report += "\nexpected: " + ex.expectation + "\n";
  if (name == "ex2-divergent") {
    bool diverged = r.exit_code == exit_divergence;
    r.outputs.report += fmt::format("outcome: {}\n", diverged ? "divergence diagnosed as expected" : "no divergence");
    return r;
  }
  if (r.exit_code != exit_ok) return r;
  Parametrization P = run(doc);
  if (name == "ex1-radial") {
    ProblemDocument gen = doc;
    gen.run.solver = SolverChoice::general;
    Parametrization G = run(gen);
    auto pts = comparison_points(doc.domain, 24);
    std::vector<double> got, want;
    for (const auto& x : pts) {
      got.push_back(P.state.Ky(x)(0));
      want.push_back(G.state.Ky(x)(0));
    }
    r.outputs.extras.emplace_back("comparison.csv", comparison_csv(pts, got, {}, want, "K_y_radial"));
    r.outputs.report += fmt::format("radial vs general K_y: worst relative difference {:.3e}\n", worst_relative(got, want));
  } else if (name == "ex2-convergent") {
    const double a = std::stod(params.at("a"));
    const double b = std::stod(params.at("b"));
    std::vector<Vec> pts;
    for (const auto& x : comparison_points(doc.domain, 60))
      if (std::abs(x(1)) > 0.1 * x.norm() && pts.size() < 20) pts.push_back(x);
    degree2_comparison(r, P, pts,
                       [&](const Vec& x) { return ex2_ky_closed_form(a, b, x); }, "-x2^3/((b+3a-1) x1)");
  } else if (name == "ex3") {
    std::vector<Vec> pts;
    for (const auto& x : comparison_points(doc.domain, 80))
      if (std::abs(x(1) * x(1) - x(0) * x(0)) > 0.05 * x.squaredNorm() && pts.size() < 50) pts.push_back(x);
    degree2_comparison(r, P, pts, ex3_ky_closed_form, "closed form");
  } else if (name == "ex4") {
    std::string rows;
    for (int j = 2; j <= doc.map.N; ++j) {
      const LedgerEntry* e = P.find("R", j + doc.map.N - 1);
      rows += fmt::format("R degree {}: {}\n", j + doc.map.N - 1, e && e->nonzero ? "nonzero" : "zero");
    }
    r.outputs.report += rows;
  }
  return r;
}

}  // namespace pmhom
