#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pmhom/pmhom.hpp"

namespace fs = std::filesystem;
using namespace pmhom;

namespace {

struct Options {
  std::string input;
  std::string out;
  std::vector<std::string> sweep;
  Overrides ov;
  std::string strategy;
};

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path output_root(const Options& o) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("PMHOM_OUT"); env && *env) return env;
  return "pmhom-out";
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--out", o.out, "output directory (default: $PMHOM_OUT or ./pmhom-out)");
  cmd->add_option("--sweep", o.sweep, "parameter grid name=v1,v2,... (repeatable)");
  cmd->add_option("--ell", o.ov.ell, "target order");
  cmd->add_option("--rho", o.ov.rho, "domain radius");
  cmd->add_option("--strategy", o.strategy, "normal-form or free-kx")
      ->check(CLI::IsMember({"normal-form", "free-kx"}));
  cmd->add_flag("--force-zero-R", o.ov.force_zero_R, "keep every R term zero");
  cmd->add_option("--tail-tol", o.ov.tail_tol, "tail tolerance of the improper integrals");
  cmd->add_option("--ode-rtol", o.ov.ode_rtol, "relative tolerance of the flow integrator");
  cmd->add_option("--nodes", o.ov.nodes, "cross-section interpolation nodes");
}

using Runner = std::function<RunResult(const ParamPoint&)>;

// Runs one point or a whole sweep grid; the exit status is the worst over the grid.
int run_grid(const Options& o, std::string_view document, const Runner& fn) {
  const fs::path root = output_root(o);
  std::vector<SweepAxis> axes;
  for (const auto& s : o.sweep) axes.push_back(parse_sweep(s));
  const auto grid = sweep_grid(document, axes);
  int status = exit_ok;
  for (const auto& point : grid) {
    RunResult r = fn(point);
    fs::path dir = axes.empty() ? root : root / point_label(point);
    write_outputs(dir, r.outputs);
    fmt::print("{}: exit {} ({})\n", dir.string(), r.exit_code, r.message);
    status = std::max(status, r.exit_code);
  }
  return status;
}

Options finish(Options o) {
  if (!o.strategy.empty()) o.ov.strategy = o.strategy == "free-kx" ? Strategy::free_kx : Strategy::normal_form;
  return o;
}

ProblemDocument load_with(const Options& o, const std::string& text, const ParamPoint& p) {
  ProblemDocument doc = load_problem(text, p);
  o.ov.apply(doc);
  return doc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parabolic manifold parametrizations"};
  app.require_subcommand(1);

  Options check_o, solve_o, flow_o, verify_o, example_o;
  std::string example_name;

  auto* check = app.add_subcommand("check", "estimate constants and hypotheses");
  check->add_option("input", check_o.input, "problem file")->required();
  add_common(check, check_o);

  auto* solve = app.add_subcommand("solve", "compute K and R for a map");
  solve->add_option("input", solve_o.input, "problem file")->required();
  add_common(solve, solve_o);

  auto* solve_flow = app.add_subcommand("solve-flow", "compute K and Y for a periodic field");
  solve_flow->add_option("input", flow_o.input, "problem file")->required();
  add_common(solve_flow, flow_o);

  auto* verify = app.add_subcommand("verify", "solve and run the invariant suite");
  verify->add_option("input", verify_o.input, "problem file")->required();
  add_common(verify, verify_o);

  auto* example = app.add_subcommand("example", "run a bundled example");
  example->add_option("name", example_name, "ex1-radial, ex2-divergent, ex2-convergent, ex3, ex4")->required();
  add_common(example, example_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : exit_usage;
  }

  try {
    if (*check) {
      Options o = finish(check_o);
      std::string text = read_file(o.input);
      return run_grid(o, text, [&](const ParamPoint& p) { return check_document(load_with(o, text, p), o.input); });
    }
    if (*solve || *solve_flow || *verify) {
      Options o = finish(*solve ? solve_o : *solve_flow ? flow_o : verify_o);
      std::string text = read_file(o.input);
      const bool want_flow = static_cast<bool>(*solve_flow);
      const bool suite = static_cast<bool>(*verify);
      return run_grid(o, text, [&](const ParamPoint& p) {
        ProblemDocument doc = load_with(o, text, p);
        if (!suite && want_flow != (doc.kind == ProblemKind::flow))
          throw ValidationError(want_flow ? "solve-flow needs a [field] document" : "solve needs a [map] document");
        return solve_document(doc, o.input, suite);
      });
    }
    if (*example) {
      Options o = finish(example_o);
      const ExampleInfo& ex = find_example(example_name);
      return run_grid(o, corpus_document(ex.document),
                      [&](const ParamPoint& p) { return run_example(example_name, o.ov, p); });
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return exit_usage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return exit_usage;
  }
  return exit_usage;
}
