#pragma once

#include <string>

namespace pmhom {

enum class InterpScheme { spectral, cubic };
enum class Strategy { normal_form, free_kx };
enum class HypothesisPolicy { strict, monitor };
enum class SolverChoice { automatic, general };

inline std::string to_string(InterpScheme s) { return s == InterpScheme::spectral ? "spectral" : "cubic"; }
inline std::string to_string(Strategy s) { return s == Strategy::normal_form ? "normal-form" : "free-kx"; }
inline std::string to_string(HypothesisPolicy h) { return h == HypothesisPolicy::strict ? "strict" : "monitor"; }
inline std::string to_string(SolverChoice s) { return s == SolverChoice::automatic ? "auto" : "general"; }

// Numerical knobs shared by all modules.
struct Tolerances {
  double ode_rtol = 1e-10;
  double tail_tol = 1e-12;
  double blowup = 1e6;
  double time_cap = 1e30;
  int max_doublings = 400;

  int nodes = 129;
  InterpScheme interp = InterpScheme::spectral;
  double fd_rel = 1e-5;

  int ladder_count = 8;
  double ladder_ratio = 0.7;
  double ladder_top = 0.5;  // fraction of rho

  int sample_points = 1024;
  int refine_rounds = 3;
  double equality_tol = 1e-6;
  double deflation = 0.01;

  int rays = 12;
  double ray_inset = 0.05;
  double slope_margin = 0.9;
  double flow_slope_margin = -0.1;
  double residual_floor = 1e-13;

  int harmonics = 16;
  int phases = 64;
  int verify_phases = 16;

  int pde_check_points = 50;
  double chart_pad = 0.0;  // radians added to each end of bounded chart axes
  double negligible = 1e-9;  // extracted terms below this on the unit cross-section count as zero

  bool operator==(const Tolerances&) const = default;
};

}  // namespace pmhom
