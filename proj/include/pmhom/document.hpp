#pragma once

#include <fmt/format.h>

#include <cctype>
#include <charconv>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pmhom/domain.hpp"
#include "pmhom/error.hpp"
#include "pmhom/model.hpp"
#include "pmhom/settings.hpp"

namespace pmhom {

enum class ProblemKind { map, flow };

struct RunSpec {
  int ell = 0;
  Strategy strategy = Strategy::normal_form;
  HypothesisPolicy hypotheses = HypothesisPolicy::strict;
  SolverChoice solver = SolverChoice::automatic;
  bool force_zero_R = false;
  std::map<int, SparsePolynomial> free_kx;  // degree -> polynomial R^n -> R^n
  Tolerances tol;
  bool operator==(const RunSpec&) const = default;
};

struct ProblemDocument {
  ProblemKind kind = ProblemKind::map;
  MapSpec map;
  FieldSpec field;
  DomainSpec domain;
  RunSpec run;

  const MapSpec& base() const { return kind == ProblemKind::map ? map : field.base; }

  void validate() const {
    const MapSpec& b = base();
    if (kind == ProblemKind::map) map.validate();
    else field.validate();
    if (domain.n() != b.n) throw ValidationError("domain dimension differs from n");
    if (run.ell < b.N) throw ValidationError("target order below N");
    if (run.ell > b.r) throw ValidationError("target order exceeds r");
    for (const auto& [d, poly] : run.free_kx) {
      if (d < 2) throw ValidationError("free K_x degree below 2");
      validate_graded_block(poly, b.n, b.n, d, "free K_x");
    }
  }

  bool operator==(const ProblemDocument&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

inline double parse_factor(std::string_view tok, int line) {
  double sign = 1.0;
  while (!tok.empty() && (tok.front() == '+' || tok.front() == '-')) {
    if (tok.front() == '-') sign = -sign;
    tok.remove_prefix(1);
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || tok.empty())
    throw ParseError(fmt::format("line {}: bad number '{}'", line, tok));
  return sign * v;
}

// Number, or product/quotient of signed numbers such as "-2*0.3".
inline double parse_number(std::string_view tok, int line) {
  double acc = 1.0;
  char op = '*';
  std::size_t start = 0;
  for (std::size_t i = 0; i <= tok.size(); ++i) {
    bool sep = i == tok.size() || ((tok[i] == '*' || tok[i] == '/') && i > start);
    if (!sep) continue;
    double f = parse_factor(tok.substr(start, i - start), line);
    acc = op == '*' ? acc * f : acc / f;
    if (i < tok.size()) op = tok[i];
    start = i + 1;
  }
  return acc;
}

inline int parse_int(const std::string& tok, int line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw ParseError(fmt::format("line {}: bad integer '{}'", line, tok));
  return v;
}

inline bool parse_bool(const std::string& tok, int line) {
  if (tok == "true" || tok == "1" || tok == "yes") return true;
  if (tok == "false" || tok == "0" || tok == "no") return false;
  throw ParseError(fmt::format("line {}: bad boolean '{}'", line, tok));
}

inline std::string fmt_num(double v) { return fmt::format("{:.17g}", v); }

}  // namespace detail

// Names of ${...} placeholders in the document text.
inline std::set<std::string> placeholders(std::string_view text) {
  std::set<std::string> out;
  for (std::size_t i = text.find("${"); i != std::string_view::npos; i = text.find("${", i + 2)) {
    std::size_t j = text.find('}', i);
    if (j == std::string_view::npos) throw ParseError("unterminated placeholder");
    out.insert(std::string(text.substr(i + 2, j - i - 2)));
  }
  return out;
}

// Default values from the [params] section.
inline std::map<std::string, std::string> param_defaults(std::string_view text) {
  std::map<std::string, std::string> params;
  std::istringstream is{std::string(text)};
  std::string section;
  for (std::string raw; std::getline(is, raw);) {
    std::string line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line;
      continue;
    }
    if (section == "[params]") {
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("params entry without '='");
      params[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
    }
  }
  return params;
}

// Substitutes ${name} using [params] defaults overridden by `values`.
inline std::string substitute_params(std::string_view text,
                                     const std::map<std::string, std::string>& values = {}) {
  std::map<std::string, std::string> params = param_defaults(text);
  for (const auto& [k, v] : values) params[k] = v;
  std::string out;
  std::size_t pos = 0;
  for (std::size_t i = text.find("${"); i != std::string_view::npos; i = text.find("${", pos)) {
    std::size_t j = text.find('}', i);
    if (j == std::string_view::npos) throw ParseError("unterminated placeholder");
    std::string name(text.substr(i + 2, j - i - 2));
    auto it = params.find(name);
    if (it == params.end()) throw ParseError("no value for placeholder '" + name + "'");
    out.append(text.substr(pos, i - pos));
    out.append(it->second);
    pos = j + 1;
  }
  out.append(text.substr(pos));
  return out;
}

namespace detail {

struct BlockHeader {
  std::string name;
  int component;
  int degree;
  int harmonic = 0;
  bool sine = false;
};

inline void apply_tolerance(Tolerances& t, const std::string& key, const std::string& v, int line) {
  auto num = [&] { return parse_number(v, line); };
  auto integer = [&] { return parse_int(v, line); };
  if (key == "ode_rtol") t.ode_rtol = num();
  else if (key == "tail_tol") t.tail_tol = num();
  else if (key == "blowup") t.blowup = num();
  else if (key == "time_cap") t.time_cap = num();
  else if (key == "max_doublings") t.max_doublings = integer();
  else if (key == "nodes") t.nodes = integer();
  else if (key == "interp") {
    if (v == "spectral") t.interp = InterpScheme::spectral;
    else if (v == "cubic") t.interp = InterpScheme::cubic;
    else throw ParseError(fmt::format("line {}: unknown interp '{}'", line, v));
  } else if (key == "fd_rel") t.fd_rel = num();
  else if (key == "ladder_count") t.ladder_count = integer();
  else if (key == "ladder_ratio") t.ladder_ratio = num();
  else if (key == "ladder_top") t.ladder_top = num();
  else if (key == "sample_points") t.sample_points = integer();
  else if (key == "refine_rounds") t.refine_rounds = integer();
  else if (key == "equality_tol") t.equality_tol = num();
  else if (key == "deflation") t.deflation = num();
  else if (key == "rays") t.rays = integer();
  else if (key == "ray_inset") t.ray_inset = num();
  else if (key == "slope_margin") t.slope_margin = num();
  else if (key == "flow_slope_margin") t.flow_slope_margin = num();
  else if (key == "residual_floor") t.residual_floor = num();
  else if (key == "harmonics") t.harmonics = integer();
  else if (key == "phases") t.phases = integer();
  else if (key == "verify_phases") t.verify_phases = integer();
  else if (key == "pde_check_points") t.pde_check_points = integer();
  else if (key == "chart_pad") t.chart_pad = num();
  else if (key == "negligible") t.negligible = num();
  else throw ParseError(fmt::format("line {}: unknown run key '{}'", line, key));
}

inline std::vector<std::pair<std::string, std::string>> tolerance_entries(const Tolerances& t) {
  return {{"ode_rtol", fmt_num(t.ode_rtol)},
          {"tail_tol", fmt_num(t.tail_tol)},
          {"blowup", fmt_num(t.blowup)},
          {"time_cap", fmt_num(t.time_cap)},
          {"max_doublings", std::to_string(t.max_doublings)},
          {"nodes", std::to_string(t.nodes)},
          {"interp", to_string(t.interp)},
          {"fd_rel", fmt_num(t.fd_rel)},
          {"ladder_count", std::to_string(t.ladder_count)},
          {"ladder_ratio", fmt_num(t.ladder_ratio)},
          {"ladder_top", fmt_num(t.ladder_top)},
          {"sample_points", std::to_string(t.sample_points)},
          {"refine_rounds", std::to_string(t.refine_rounds)},
          {"equality_tol", fmt_num(t.equality_tol)},
          {"deflation", fmt_num(t.deflation)},
          {"rays", std::to_string(t.rays)},
          {"ray_inset", fmt_num(t.ray_inset)},
          {"slope_margin", fmt_num(t.slope_margin)},
          {"flow_slope_margin", fmt_num(t.flow_slope_margin)},
          {"residual_floor", fmt_num(t.residual_floor)},
          {"harmonics", std::to_string(t.harmonics)},
          {"phases", std::to_string(t.phases)},
          {"verify_phases", std::to_string(t.verify_phases)},
          {"pde_check_points", std::to_string(t.pde_check_points)},
          {"chart_pad", fmt_num(t.chart_pad)},
          {"negligible", fmt_num(t.negligible)}};
}

}  // namespace detail

// Parses a problem document (after placeholder substitution) and validates it.
inline ProblemDocument load_problem(std::string_view text,
                                    const std::map<std::string, std::string>& params = {}) {
  using namespace detail;
  const std::string body = substitute_params(text, params);

  ProblemDocument doc;
  std::map<std::string, std::string> head;       // [map]/[field] scalars
  std::map<std::string, std::string> dom;        // [domain]
  struct PendingBlock {
    BlockHeader header;
    std::vector<std::pair<double, Exponents>> monomials;
    int line;
  };
  std::vector<PendingBlock> blocks;
  std::vector<PendingBlock> kx_blocks;
  std::string section;
  bool saw_model = false;
  PendingBlock* current = nullptr;

  std::istringstream is(body);
  int lineno = 0;
  for (std::string raw; std::getline(is, raw);) {
    ++lineno;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(fmt::format("line {}: bad section header", lineno));
      section = line.substr(1, line.size() - 2);
      current = nullptr;
      if (section == "map" || section == "field") {
        if (saw_model) throw ParseError("more than one [map]/[field] section");
        saw_model = true;
        doc.kind = section == "map" ? ProblemKind::map : ProblemKind::flow;
      } else if (section != "domain" && section != "run" && section != "params") {
        throw ParseError(fmt::format("line {}: unknown section [{}]", lineno, section));
      }
      continue;
    }
    if (section.empty()) throw ParseError(fmt::format("line {}: content before any section", lineno));
    if (section == "params") continue;

    auto eq = line.find('=');
    if (eq != std::string::npos) {
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      current = nullptr;
      if (section == "map" || section == "field") head[key] = value;
      else if (section == "domain") dom[key] = value;
      else if (section == "run") {
        if (key == "ell") doc.run.ell = parse_int(value, lineno);
        else if (key == "strategy") {
          if (value == "normal-form") doc.run.strategy = Strategy::normal_form;
          else if (value == "free-kx") doc.run.strategy = Strategy::free_kx;
          else throw ParseError(fmt::format("line {}: unknown strategy '{}'", lineno, value));
        } else if (key == "hypotheses") {
          if (value == "strict") doc.run.hypotheses = HypothesisPolicy::strict;
          else if (value == "monitor") doc.run.hypotheses = HypothesisPolicy::monitor;
          else throw ParseError(fmt::format("line {}: unknown hypotheses policy '{}'", lineno, value));
        } else if (key == "solver") {
          if (value == "auto") doc.run.solver = SolverChoice::automatic;
          else if (value == "general") doc.run.solver = SolverChoice::general;
          else throw ParseError(fmt::format("line {}: unknown solver '{}'", lineno, value));
        } else if (key == "force_zero_R") doc.run.force_zero_R = parse_bool(value, lineno);
        else apply_tolerance(doc.run.tol, key, value, lineno);
      }
      continue;
    }

    auto toks = split_ws(line);
    bool header = std::isalpha(static_cast<unsigned char>(toks[0][0]));
    if (header) {
      BlockHeader h;
      h.name = toks[0];
      bool model_block = (section == "map" || section == "field") &&
                         (h.name == "p" || h.name == "q" || h.name == "f" || h.name == "g");
      bool run_block = section == "run" && h.name == "kx";
      if (!model_block && !run_block)
        throw ParseError(fmt::format("line {}: unexpected block '{}' in [{}]", lineno, h.name, section));
      if (toks.size() != 3 && toks.size() != 5)
        throw ParseError(fmt::format("line {}: block header needs name, component, degree", lineno));
      h.component = parse_int(toks[1], lineno);
      h.degree = parse_int(toks[2], lineno);
      if (toks.size() == 5) {
        if (section != "field" || (h.name != "f" && h.name != "g"))
          throw ParseError(fmt::format("line {}: harmonics only allowed for field forcing", lineno));
        if (toks[3] != "cos" && toks[3] != "sin")
          throw ParseError(fmt::format("line {}: expected cos or sin", lineno));
        h.sine = toks[3] == "sin";
        h.harmonic = parse_int(toks[4], lineno);
        if (h.harmonic < 1) throw ParseError(fmt::format("line {}: harmonic must be >= 1", lineno));
      }
      auto& list = run_block ? kx_blocks : blocks;
      list.push_back({h, {}, lineno});
      current = &list.back();
      continue;
    }
    if (!current) throw ParseError(fmt::format("line {}: monomial outside a block", lineno));
    Exponents e;
    for (std::size_t i = 1; i < toks.size(); ++i) e.push_back(parse_int(toks[i], lineno));
    current->monomials.emplace_back(parse_number(toks[0], lineno), e);
  }
  if (!saw_model) throw ParseError("missing [map] or [field] section");

  auto need = [&](const std::map<std::string, std::string>& m, const std::string& key) -> const std::string& {
    auto it = m.find(key);
    if (it == m.end()) throw ParseError("missing key '" + key + "'");
    return it->second;
  };
  MapSpec base;
  base.n = parse_int(need(head, "n"), 0);
  base.m = parse_int(need(head, "m"), 0);
  base.N = parse_int(need(head, "N"), 0);
  base.M = parse_int(need(head, "M"), 0);
  base.r = parse_int(need(head, "r"), 0);
  if (base.n < 1 || base.m < 1) throw ValidationError("n and m must be positive");
  const int arity = base.n + base.m;
  base.p = SparsePolynomial(arity, base.n);
  base.q = SparsePolynomial(arity, base.m);
  double period = 1.0;
  for (const auto& [key, value] : head) {
    if (key == "n" || key == "m" || key == "N" || key == "M" || key == "r") continue;
    if (key == "remainder_x") base.remainder_x = value;
    else if (key == "remainder_y") base.remainder_y = value;
    else if (key == "T" && doc.kind == ProblemKind::flow) period = parse_number(value, 0);
    else throw ParseError("unknown model key '" + key + "'");
  }

  auto fill = [](SparsePolynomial& poly, const PendingBlock& b, int arity_expected) {
    for (const auto& [c, e] : b.monomials) {
      if (static_cast<int>(e.size()) != arity_expected)
        throw ParseError(fmt::format("line {}: expected {} exponents", b.line, arity_expected));
      if (total_degree(e) != b.header.degree)
        throw ValidationError(fmt::format("line {}: monomial degree {} differs from declared degree {}",
                                          b.line, total_degree(e), b.header.degree));
      poly.add(b.header.component - 1, c, e);
    }
  };
  auto check_component = [](const PendingBlock& b, int count) {
    if (b.header.component < 1 || b.header.component > count)
      throw ValidationError(fmt::format("line {}: component {} out of range", b.line, b.header.component));
  };

  std::vector<ForcingTerm> fx, fy;
  auto forcing_slot = [&](std::vector<ForcingTerm>& list, const BlockHeader& h, int codomain) -> SparsePolynomial& {
    for (auto& f : list)
      if (f.degree == h.degree && f.harmonic == h.harmonic && f.sine == h.sine) return f.poly;
    list.push_back({h.degree, h.harmonic, h.sine, SparsePolynomial(arity, codomain)});
    return list.back().poly;
  };

  for (const auto& b : blocks) {
    const auto& h = b.header;
    bool xblock = h.name == "p" || h.name == "f";
    check_component(b, xblock ? base.n : base.m);
    if (h.name == "p") {
      if (h.degree != base.N) throw ValidationError("p not homogeneous of degree N");
      fill(base.p, b, arity);
    } else if (h.name == "q") {
      if (h.degree != base.M) throw ValidationError("q not homogeneous of degree M");
      fill(base.q, b, arity);
    } else if (doc.kind == ProblemKind::map) {
      auto& slot = xblock ? base.higher_x : base.higher_y;
      auto it = slot.try_emplace(h.degree, arity, xblock ? base.n : base.m).first;
      fill(it->second, b, arity);
    } else {
      fill(forcing_slot(xblock ? fx : fy, h, xblock ? base.n : base.m), b, arity);
    }
  }
  for (auto* slot : {&base.higher_x, &base.higher_y})
    std::erase_if(*slot, [](const auto& kv) { return kv.second.is_zero(); });
  std::erase_if(fx, [](const ForcingTerm& f) { return f.poly.is_zero(); });
  std::erase_if(fy, [](const ForcingTerm& f) { return f.poly.is_zero(); });
  auto order = [](const ForcingTerm& a, const ForcingTerm& b) {
    return std::tie(a.degree, a.harmonic, a.sine) < std::tie(b.degree, b.harmonic, b.sine);
  };
  std::sort(fx.begin(), fx.end(), order);
  std::sort(fy.begin(), fy.end(), order);

  for (const auto& b : kx_blocks) {
    check_component(b, base.n);
    auto it = doc.run.free_kx.try_emplace(b.header.degree, base.n, base.n).first;
    fill(it->second, b, base.n);
  }
  std::erase_if(doc.run.free_kx, [](const auto& kv) { return kv.second.is_zero(); });

  if (doc.kind == ProblemKind::map) {
    doc.map = base;
  } else {
    doc.field.base = base;
    doc.field.T = period;
    doc.field.forcing_x = std::move(fx);
    doc.field.forcing_y = std::move(fy);
  }

  // [domain]
  auto norm_from = [&](const std::string& kind_key, const std::string& weight_key) {
    Norm nm;
    auto it = dom.find(kind_key);
    std::string kind = it == dom.end() ? "euclidean" : it->second;
    if (kind == "max") nm.kind = NormKind::max;
    else if (kind == "euclidean") nm.kind = NormKind::euclidean;
    else throw ParseError("unknown norm '" + kind + "'");
    if (auto w = dom.find(weight_key); w != dom.end())
      for (const auto& tok : split_ws(w->second)) nm.weights.push_back(parse_number(tok, 0));
    return nm;
  };
  for (const auto& [key, value] : dom)
    if (key != "cone" && key != "kappa" && key != "rho" && key != "norm" && key != "weights" &&
        key != "norm_y" && key != "weights_y")
      throw ParseError("unknown domain key '" + key + "'");
  const std::string& cone_name = need(dom, "cone");
  ConeKind cone;
  if (cone_name == "sector") cone = ConeKind::sector;
  else if (cone_name == "halfspace") cone = ConeKind::halfspace;
  else if (cone_name == "punctured") cone = ConeKind::punctured;
  else throw ParseError("unknown cone '" + cone_name + "'");
  double kappa = dom.count("kappa") ? parse_number(dom.at("kappa"), 0) : 1.0;
  Norm nx = norm_from("norm", "weights");
  Norm ny = dom.count("norm_y") ? norm_from("norm_y", "weights_y") : Norm{nx.kind, {}};
  doc.domain = DomainSpec(base.n, cone, parse_number(need(dom, "rho"), 0), nx, ny, kappa);

  if (doc.run.ell == 0) doc.run.ell = base.r;
  doc.validate();
  return doc;
}

inline std::string serialize(const ProblemDocument& doc) {
  using detail::fmt_num;
  std::string out;
  auto emit = [&](const std::string& s) { out += s + "\n"; };
  auto emit_block = [&](const std::string& name, const SparsePolynomial& poly, int degree,
                        const std::string& suffix = "") {
    for (int c = 0; c < poly.codomain(); ++c) {
      if (poly.component(c).empty()) continue;
      emit(fmt::format("{} {} {}{}", name, c + 1, degree, suffix));
      for (const auto& mono : poly.component(c)) {
        std::string l = fmt_num(mono.coeff);
        for (int e : mono.exps) l += " " + std::to_string(e);
        emit(l);
      }
    }
  };

  const MapSpec& b = doc.base();
  emit(doc.kind == ProblemKind::map ? "[map]" : "[field]");
  emit(fmt::format("n = {}", b.n));
  emit(fmt::format("m = {}", b.m));
  emit(fmt::format("N = {}", b.N));
  emit(fmt::format("M = {}", b.M));
  emit(fmt::format("r = {}", b.r));
  if (doc.kind == ProblemKind::flow) emit("T = " + fmt_num(doc.field.T));
  if (!b.remainder_x.empty()) emit("remainder_x = " + b.remainder_x);
  if (!b.remainder_y.empty()) emit("remainder_y = " + b.remainder_y);
  emit_block("p", b.p, b.N);
  emit_block("q", b.q, b.M);
  if (doc.kind == ProblemKind::map) {
    for (const auto& [d, poly] : b.higher_x) emit_block("f", poly, d);
    for (const auto& [d, poly] : b.higher_y) emit_block("g", poly, d);
  } else {
    auto suffix = [](const ForcingTerm& f) {
      return f.harmonic == 0 ? std::string() : fmt::format(" {} {}", f.sine ? "sin" : "cos", f.harmonic);
    };
    for (const auto& f : doc.field.forcing_x) emit_block("f", f.poly, f.degree, suffix(f));
    for (const auto& f : doc.field.forcing_y) emit_block("g", f.poly, f.degree, suffix(f));
  }

  const DomainSpec& d = doc.domain;
  emit("");
  emit("[domain]");
  emit("cone = " + to_string(d.cone()));
  emit("kappa = " + fmt_num(d.kappa()));
  emit("rho = " + fmt_num(d.rho()));
  auto weights = [](const Norm& nm) {
    std::string s;
    for (double w : nm.weights) s += (s.empty() ? "" : " ") + fmt_num(w);
    return s;
  };
  emit("norm = " + to_string(d.norm_x().kind));
  if (d.norm_x().weighted()) emit("weights = " + weights(d.norm_x()));
  emit("norm_y = " + to_string(d.norm_y().kind));
  if (d.norm_y().weighted()) emit("weights_y = " + weights(d.norm_y()));

  emit("");
  emit("[run]");
  emit(fmt::format("ell = {}", doc.run.ell));
  emit("strategy = " + to_string(doc.run.strategy));
  emit("hypotheses = " + to_string(doc.run.hypotheses));
  emit("solver = " + to_string(doc.run.solver));
  emit(std::string("force_zero_R = ") + (doc.run.force_zero_R ? "true" : "false"));
  for (const auto& [k, v] : detail::tolerance_entries(doc.run.tol)) emit(k + " = " + v);
  for (const auto& [deg, poly] : doc.run.free_kx) emit_block("kx", poly, deg);
  return out;
}

}  // namespace pmhom
