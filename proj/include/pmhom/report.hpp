#pragma once

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pmhom/flows.hpp"
#include "pmhom/parametrize.hpp"
#include "pmhom/suite.hpp"

namespace pmhom {

inline std::string constants_csv(const ConstantsReport& c) {
  std::string out = "name,value\n";
  for (auto [k, v] : {std::pair{"a_p", c.a_p}, {"b_p", c.b_p}, {"A_p", c.A_p}, {"B_p", c.B_p}, {"B_q", c.B_q},
                      {"c_p", c.c_p}, {"d_p", c.d_p}, {"a_V", c.a_V}, {"alpha", c.alpha}, {"rho", c.rho}})
    out += fmt::format("{},{:.12g}\n", k, v);
  return out;
}

// Constants re-estimated on shrinking radii; drift between rows shows whether rho is small enough.
inline std::string drift_csv(const std::vector<ConstantsReport>& rows) {
  std::string out = "rho,a_p,b_p,A_p,B_p,B_q,a_V\n";
  for (const auto& c : rows)
    out += fmt::format("{:.6g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g}\n", c.rho, c.a_p, c.b_p, c.A_p, c.B_p,
                       c.B_q, c.a_V);
  return out;
}

inline std::string vec_fields(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += fmt::format("{}{:.10g}", i ? "," : "", v(i));
  return out;
}

inline std::string witnesses_csv(const ConstantsReport& c) {
  std::string out = "quantity,value,point\n";
  for (const auto& [name, e] : c.witnesses) out += fmt::format("{},{:.12g},\"{}\"\n", name, e.value, vec_fields(e.witness));
  for (auto [name, h] : {std::pair{"H1", &c.h1}, {"H2", &c.h2}, {"H3", &c.h3}})
    for (const auto& w : h->witnesses) out += fmt::format("{} witness,{:.12g},\"{}\"\n", name, h->margin, vec_fields(w));
  return out;
}

inline std::string rays_csv(const ResidualReport& x, const ResidualReport& y) {
  std::string out = "block,ray,direction,slope,intercept,r2,points\n";
  for (const auto* r : {&x, &y})
    for (std::size_t k = 0; k < r->fits.size(); ++k)
      out += fmt::format("{},{},\"{}\",{:.6f},{:.6f},{:.6f},{}\n", r->block, k,
                         k < r->rays.size() ? vec_fields(r->rays[k]) : "", r->fits[k].slope, r->fits[k].intercept,
                         r->fits[k].r2, r->fits[k].points);
  return out;
}

inline std::string hypotheses_text(const ConstantsReport& c) {
  std::string out;
  for (auto [name, h] : {std::pair{"H1", &c.h1}, {"H2", &c.h2}, {"H3", &c.h3}}) {
    out += fmt::format("{}: {} (margin {:.6g}){}\n", name, h->satisfied ? "satisfied" : "fails", h->margin,
                       h->note.empty() ? "" : "; " + h->note);
    for (const auto& w : h->witnesses) {
      std::string coords;
      for (Eigen::Index i = 0; i < w.size(); ++i) coords += fmt::format("{}{:.6g}", i ? ", " : "", w(i));
      out += fmt::format("  witness ({})\n", coords);
    }
  }
  return out;
}

inline std::string constants_text(const MapContext& ctx) {
  const auto& c = ctx.constants;
  std::string out = fmt::format(
      "constants: a_p {:.6g}  b_p {:.6g}  A_p {:.6g}  B_p {:.6g}  B_q {:.6g}  c_p {:.6g}  d_p {:.6g}  a_V {:.6g}\n",
      c.a_p, c.b_p, c.A_p, c.B_p, c.B_q, c.c_p, c.d_p, c.a_V);
  out += fmt::format("sampling: {} base points, refinement depth {}\n", c.sample_size, c.refinement_depth);
  out += hypotheses_text(c);
  if (ctx.budget) {
    const auto& b = *ctx.budget;
    out += fmt::format("regularity: {}  gamma {}  ell_f {}{}{}\n", to_string(b.tag),
                       b.gamma ? std::to_string(*b.gamma) : "unbounded", b.ell_f, b.gamma_tie ? "  (gamma tie)" : "",
                       b.safety_band ? "  (ell_f within the safety band)" : "");
  } else {
    out += "regularity: " + ctx.budget_note + "\n";
  }
  return out;
}

inline std::string ledger_text(const std::vector<LedgerEntry>& ledger) {
  std::string out = fmt::format("{:<3} {:<7} {:>6} {:<11} {:>10} {:>10} {:>10} {:>10} {:>10}  {}\n", "j", "role",
                                "degree", "solver", "margin", "pde", "tail", "interp", "max", "note");
  for (const auto& e : ledger)
    out += fmt::format("{:<3} {:<7} {:>6} {:<11} {:>10.3g} {:>10.2e} {:>10.2e} {:>10.2e} {:>10.3e}  {}\n", e.j, e.role,
                       e.degree, e.solver, e.margin, e.pde_residual, e.tail_error, e.interp_error, e.max_value,
                       e.note);
  return out;
}

inline std::string residual_text(const ResidualReport& r) {
  std::string out = fmt::format("residual {}: min slope {:.4f} (target {} + {}), {}\n", r.block, r.min_slope, r.target,
                                r.margin, to_string(r.verdict));
  for (std::size_t k = 0; k < r.fits.size(); ++k)
    out += fmt::format("  ray {:>2}: slope {:.4f}  r2 {:.6f}  points {}\n", k, r.fits[k].slope, r.fits[k].r2,
                       r.fits[k].points);
  return out;
}

inline std::string problem_header(const ProblemDocument& doc, const std::string& source) {
  const MapSpec& b = doc.base();
  return fmt::format("problem: {}\nkind: {}  n {}  m {}  N {}  M {}  r {}  ell {}\ndomain: {} cone, {} norm, rho {}\n",
                     source, doc.kind == ProblemKind::map ? "map" : "flow", b.n, b.m, b.N, b.M, b.r, doc.run.ell,
                     to_string(doc.domain.cone()), to_string(doc.domain.norm_x().kind), doc.domain.rho());
}

struct Outputs {
  std::string report;
  std::string constants;
  std::string residual;
  std::string ledger;
  std::vector<std::pair<std::string, std::string>> terms;  // file name, contents
  std::vector<std::pair<std::string, std::string>> extras;
};

inline std::string term_file_name(const std::string& role, double degree, const std::string& suffix = {}) {
  return fmt::format("{}_deg{}{}.tbl", role, degree, suffix);
}

inline void add_graded_tables(Outputs& out, const GradedFunction& g, const std::string& role,
                              const CrossSectionGrid& grid) {
  for (const auto& [d, h] : g.terms()) {
    if (h.is_zero_polynomial()) continue;
    out.terms.emplace_back(term_file_name(role, d), term_table(h, grid, fmt::format("{} degree {}", role, d)));
  }
}

inline Outputs map_outputs(const Parametrization& P, const ProblemDocument& doc, const std::string& source,
                           const SuiteReport* suite = nullptr) {
  Outputs out;
  out.report = problem_header(doc, source) + constants_text(P.ctx);
  out.report += "\nledger:\n" + ledger_text(P.ledger()) + "\n";
  out.report += residual_text(P.residual_x) + residual_text(P.residual_y);
  if (suite) out.report += "\ninvariant suite:\n" + suite->text();
  out.report += fmt::format("\nstatus: {}\n", P.residual_x.passed() && P.residual_y.passed() ? "ok" : "residual order below target");
  out.constants = constants_csv(P.ctx.constants);
  out.residual = residual_csv(P.residual_x) + residual_csv(P.residual_y).substr(std::string("block,ray,radius,residual\n").size());
  out.ledger = ledger_text(P.ledger());
  add_graded_tables(out, P.state.Kx, "K_x", *P.ctx.grid);
  add_graded_tables(out, P.state.Ky, "K_y", *P.ctx.grid);
  add_graded_tables(out, P.state.R, "R", *P.ctx.grid);
  return out;
}

inline Outputs flow_outputs(const FlowParametrization& P, const ProblemDocument& doc, const std::string& source,
                            const SuiteReport* suite = nullptr) {
  Outputs out;
  out.report = problem_header(doc, source) + fmt::format("period: {}\n", P.ctx.field.T) + constants_text(P.ctx.map);
  out.report += "\nledger:\n" + ledger_text(P.ledger()) + "\n";
  out.report += residual_text(P.residual_x) + residual_text(P.residual_y);
  if (suite) out.report += "\ninvariant suite:\n" + suite->text();
  out.report += fmt::format("\nstatus: {}\n", P.residual_x.passed() && P.residual_y.passed() ? "ok" : "residual order below target");
  out.constants = constants_csv(P.ctx.map.constants);
  out.residual = residual_csv(P.residual_x) + residual_csv(P.residual_y).substr(std::string("block,ray,radius,residual\n").size());
  out.ledger = ledger_text(P.ledger());
  const CrossSectionGrid& grid = *P.ctx.map.grid;
  add_graded_tables(out, P.state.mean.Kx, "K_x", grid);
  add_graded_tables(out, P.state.mean.Ky, "K_y", grid);
  add_graded_tables(out, P.state.mean.R, "Y", grid);
  for (auto [list, role] : {std::pair{&P.state.osc_x, "Khat_x"}, {&P.state.osc_y, "Khat_y"}})
    for (const auto& p : *list)
      for (const auto& h : p.harmonics())
        for (auto [part, kind] : {std::pair{&h.cos_part, "cos"}, {&h.sin_part, "sin"}}) {
          if (part->is_zero_polynomial()) continue;
          out.terms.emplace_back(term_file_name(role, p.degree(), fmt::format("_{}{}", kind, h.k)),
                                 term_table(*part, grid, fmt::format("{} degree {} {}({} w t)", role, p.degree(), kind, h.k)));
        }
  return out;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot write " + p.string());
  os << text;
}

inline void write_outputs(const std::filesystem::path& dir, const Outputs& out) {
  std::filesystem::create_directories(dir / "terms");
  write_text(dir / "report.txt", out.report);
  if (!out.constants.empty()) write_text(dir / "constants.csv", out.constants);
  if (!out.residual.empty()) write_text(dir / "residual.csv", out.residual);
  if (!out.ledger.empty()) write_text(dir / "ledger.txt", out.ledger);
  for (const auto& [name, text] : out.terms) write_text(dir / "terms" / name, text);
  for (const auto& [name, text] : out.extras) write_text(dir / name, text);
}

}  // namespace pmhom
