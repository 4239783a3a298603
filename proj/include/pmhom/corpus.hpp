#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pmhom/error.hpp"

namespace pmhom {

// Copies of problems/*.pm; a test keeps them in sync with the files.
inline const std::map<std::string, std::string_view>& corpus() {
  static const std::map<std::string, std::string_view> docs{
      {"ex1-radial", R"pm(# Radial field p(x,0) = -|x|^2 x: the K_y equation has a closed-form solution.
[map]
n = 2
m = 1
N = 3
M = 3
r = 4
p 1 3
-1  3 0 0
-1  1 2 0
p 2 3
-1  2 1 0
-1  0 3 0
q 1 3
1  2 0 1
1  0 2 1
g 1 4
1  3 1 0
1  0 4 0

[domain]
cone = punctured
rho = 0.5
norm = euclidean

[run]
ell = 4
)pm"},
      {"ex2", R"pm(# p = (-x1^2, -a x1 x2), q = b x1 y, g = x2^3 on the sector |x2| < kappa x1.
# H3 fails on this sector, so the integrals run under the monitor policy.
[params]
a = 0.2
b = 0.3

[map]
n = 2
m = 1
N = 2
M = 2
r = 3
p 1 2
-1  2 0 0
p 2 2
-${a}  1 1 0
q 1 2
${b}  1 0 1
g 1 3
1  0 3 0

[domain]
cone = sector
kappa = 0.8
rho = 0.2
norm = max

[run]
ell = 3
hypotheses = monitor
chart_pad = 0.1
ode_rtol = 1e-12
)pm"},
      {"ex2-forced", R"pm(# Vector field with p = (-x1^2, -a x1 x2), q = b x1 y and forcing
# g = x2^3 (1 + s cos(2 pi t / T)) on the sector |x2| < kappa x1.
[params]
a = 0.2
b = 0.6
s = 1
T = 1

[field]
n = 2
m = 1
N = 2
M = 2
r = 3
T = ${T}
p 1 2
-1  2 0 0
p 2 2
-${a}  1 1 0
q 1 2
${b}  1 0 1
g 1 3
1  0 3 0
g 1 3 cos 1
${s}  0 3 0

[domain]
cone = sector
kappa = 0.8
rho = 0.2
norm = max

[run]
ell = 3
hypotheses = monitor
chart_pad = 0.1
ode_rtol = 1e-12
)pm"},
      {"ex3", R"pm(# p = (-x1^3, -x2^3), q = 2(x1^2 + x2^2) y, g = x1^2 x2^2.
# The second-order y term is only three times differentiable on x2 = 0.
[map]
n = 2
m = 1
N = 3
M = 3
r = 4
p 1 3
-1  3 0 0
p 2 3
-1  0 3 0
q 1 3
2  2 0 1
2  0 2 1
g 1 4
1  2 2 0

[domain]
cone = punctured
rho = 0.5
norm = euclidean

[run]
ell = 4
nodes = 257
)pm"},
      {"ex3-field", R"pm(# Vector field version: p = (-x1^3, -x2^3), q = 2(x1^2 + x2^2) y, g = x1^2 x2^2.
# The second-order y term is only three times differentiable on x2 = 0.
[field]
T = 1
n = 2
m = 1
N = 3
M = 3
r = 4
p 1 3
-1  3 0 0
p 2 3
-1  0 3 0
q 1 3
2  2 0 1
2  0 2 1
g 1 4
1  2 2 0

[domain]
cone = punctured
rho = 0.5
norm = euclidean

[run]
ell = 4
nodes = 257
)pm"},
      {"ex4", R"pm(# p = (-x1^2, -2 x1 x2), q = (x1^2 + x2^2) y with M = 3, f = (x1^3, 0), g = x1^4
# on |x2| < x1.  The x-equation at j = 2 has no solution with a zero R term.
[map]
n = 2
m = 1
N = 2
M = 3
r = 4
p 1 2
-1  2 0 0
p 2 2
-2  1 1 0
q 1 3
1  2 0 1
1  0 2 1
f 1 3
1  3 0 0
g 1 4
1  4 0 0

[domain]
cone = sector
kappa = 1
rho = 0.05
norm = max

[run]
ell = 4
)pm"},
      {"sweep-mlessn", R"pm(# Scalar problem with M = 2 < N = 3: the y block needs one extra degree.
[map]
n = 1
m = 1
N = 3
M = 2
r = 4
p 1 3
-1  3 0
q 1 2
-1  1 1
g 1 3
1  3 0

[domain]
cone = halfspace
rho = 0.5
norm = euclidean

[run]
ell = 4
)pm"},
  };
  return docs;
}

inline std::string_view corpus_document(const std::string& name) {
  auto it = corpus().find(name);
  if (it == corpus().end()) throw UnknownExample("no bundled problem named '" + name + "'");
  return it->second;
}

struct ExampleInfo {
  std::string name;
  std::string document;
  std::map<std::string, std::string> params;
  std::string expectation;
};

inline const std::vector<ExampleInfo>& example_registry() {
  static const std::vector<ExampleInfo> reg{
      {"ex1-radial", "ex1-radial", {}, "radial and general solvers agree"},
      {"ex2-divergent", "ex2", {{"b", "0.3"}}, "divergence at degree 2, block y"},
      {"ex2-convergent", "ex2", {{"b", "0.6"}}, "K_y of degree 2 equals -x2^3/((b+3a-1) x1)"},
      {"ex3", "ex3", {}, "K_y of degree 2 matches the closed form; gamma = 3"},
      {"ex4", "ex4", {}, "nonzero R of degree j+N-1 for j = 2..N"},
  };
  return reg;
}

inline const ExampleInfo& find_example(const std::string& name) {
  for (const auto& e : example_registry())
    if (e.name == name) return e;
  throw UnknownExample("unknown example '" + name + "'");
}

}  // namespace pmhom
