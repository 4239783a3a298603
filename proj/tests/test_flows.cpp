#include <gtest/gtest.h>

#include "common.hpp"

using namespace pmhom;
using namespace testing_support;

namespace {

HomogeneousTerm cubic_x2() {
  SparsePolynomial p(2, 1);
  p.add(0, 1.0, {0, 3});
  return HomogeneousTerm::polynomial(p, 3);
}

// Radial field with forcing at two harmonics and a closed-form degree-2 term, so the
// error extraction cannot stay symbolic.
constexpr const char* radial_forced = R"pm(
[field]
T = 1
n = 2
m = 1
N = 3
M = 3
r = 6
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
g 1 4 cos 1
0.5  0 4 0
g 1 5 sin 2
0.25  2 3 0

[domain]
cone = punctured
rho = 0.5
norm = euclidean

[run]
ell = 6
)pm";

}  // namespace

TEST(Periodic, AntiderivativeOfCosineIsSine) {
  const double T = 2.0, w = M_PI;
  PeriodicTerm E(3, 2, 1, T);
  E.add_harmonic({1, cubic_x2(), HomogeneousTerm::zero(3, 2, 1)});
  PeriodicTerm K = integrate_oscillatory(E);
  Vec x = vec2(0.3, -0.2);
  for (double t : {0.0, 0.3, 1.1}) {
    EXPECT_NEAR(K(x, t)(0), std::sin(w * t) / w * -0.008, 1e-17);
    EXPECT_NEAR(K.dt(x, t)(0), E(x, t)(0), 1e-17);
  }
  EXPECT_TRUE(K.oscillatory_only());
}

TEST(Periodic, AveragingSplitSeparatesMeanAndHarmonics) {
  const double T = 1.0, w = 2 * M_PI;
  TimeFn E = [&](const Vec& x, double t) -> Vec {
    Vec v(1);
    v(0) = std::pow(x(1), 3) * (1.0 + 0.5 * std::cos(w * t) - 0.25 * std::sin(3 * w * t));
    return v;
  };
  Tolerances tol;
  MeanSplit s = split_mean_oscillatory(E, 3, 2, 1, T, tol);
  Vec x = vec2(0.4, 0.5);
  EXPECT_NEAR(s.mean(x)(0), 0.125, 1e-15);
  for (double t : {0.1, 0.6}) EXPECT_NEAR(s.oscillatory(x, t)(0) + s.mean(x)(0), E(x, t)(0), 1e-14);
}

TEST(Periodic, PhaseGridCoversOnePeriod) {
  auto g = phase_grid(2.0, 4);
  EXPECT_EQ(g, (std::vector<double>{0.0, 0.5, 1.0, 1.5}));
}

TEST(FlowInduction, AutonomousFieldReproducesMapTerms) {
  Parametrization M = run(problem("ex3"));
  FlowParametrization F = run_flow(problem("ex3-field"));
  EXPECT_TRUE(F.state.osc_x.empty() || F.state.osc_x.front().is_zero());
  const HomogeneousTerm* a = M.state.Ky.at(2);
  const HomogeneousTerm* b = F.state.mean.Ky.at(2);
  ASSERT_TRUE(a && b);
  for (const auto& x : ex3_points(10, 0.3, 0.0)) EXPECT_NEAR((*a)(x)(0), (*b)(x)(0), 1e-12 * std::abs((*a)(x)(0)));
  EXPECT_TRUE(F.residual_y.passed());
  EXPECT_NE(F.find("Y", 4), nullptr);
}

TEST(FlowInduction, ForcedOscillationMatchesHandIntegral) {
  FlowParametrization F = run_flow(problem("ex2-forced"));
  const PeriodicTerm* osc = nullptr;
  for (const auto& p : F.state.osc_y)
    if (p.degree() == 3) osc = &p;
  ASSERT_NE(osc, nullptr);
  EXPECT_EQ(osc->harmonics().size(), 1u);
  for (double t : {0.05, 0.3, 0.8}) {
    Vec x = vec2(0.1, 0.04);
    EXPECT_NEAR((*osc)(x, t)(0), std::sin(2 * M_PI * t) / (2 * M_PI) * std::pow(0.04, 3), 1e-15);
  }
  FlowParametrization G = run_flow(problem("ex2-forced", {{"s", "0"}}));
  for (const auto& x : cone_samples(F.ctx.map.domain, 5, 0.2, 1.0, 8)) EXPECT_EQ(F.Y(x), G.Y(x));
  for (double t : {0.0, 0.37}) {
    Vec x = vec2(0.1, 0.03);
    EXPECT_LT((F.K(x, t + 1.0) - F.K(x, t)).norm(), 1e-15);
  }
}

TEST(FlowInduction, NumericExtractionHandlesLazyTermsAndTwoHarmonics) {
  FlowParametrization F = run_flow(load_problem(radial_forced));
  EXPECT_TRUE(F.residual_x.passed());
  EXPECT_TRUE(F.residual_y.passed());
  bool has_second = false;
  for (const auto& p : F.state.osc_y)
    for (const auto& h : p.harmonics()) has_second = has_second || h.k == 2;
  EXPECT_TRUE(has_second);
  SuiteReport rep = invariant_suite(F);
  EXPECT_TRUE(rep.find("periodicity")->passed);
  EXPECT_TRUE(rep.find("zero-mean oscillatory part")->passed);
}

TEST(FlowInduction, DivergentSectorFieldIsDiagnosed) {
  try {
    run_flow(problem("ex2-forced", {{"b", "0.3"}}));
    FAIL() << "expected divergence";
  } catch (const DivergentCohomologicalIntegral& e) {
    EXPECT_EQ(e.degree(), 2);
  }
}

TEST(FlowInduction, MapDocumentIsRejected) {
  EXPECT_THROW(run_flow(problem("ex3")), ValidationError);
  EXPECT_THROW(run(problem("ex3-field")), ValidationError);
}
