#include <gtest/gtest.h>

#include "common.hpp"

using namespace pmhom;
using namespace testing_support;

namespace {

const Parametrization& ex3() {
  static const Parametrization P = run(problem("ex3"));
  return P;
}

const Parametrization& ex4() {
  static const Parametrization P = run(problem("ex4"));
  return P;
}

}  // namespace

TEST(Induction, ClosedFormExampleLedger) {
  const auto& P = ex3();
  const LedgerEntry* ky = P.find("K_y", 2);
  ASSERT_NE(ky, nullptr);
  EXPECT_EQ(ky->solver, "general");
  EXPECT_TRUE(ky->nonzero);
  EXPECT_LT(ky->pde_residual, 1e-5);
  const LedgerEntry* kx = P.find("K_x", 2);
  ASSERT_NE(kx, nullptr);
  EXPECT_EQ(kx->solver, "zero");
}

TEST(Induction, ClosedFormExampleTermMatchesQuadratureOracle) {
  const auto& P = ex3();
  const HomogeneousTerm* h = P.state.Ky.at(2);
  ASSERT_NE(h, nullptr);
  for (const auto& x : ex3_points(12, 0.3, 0.2)) EXPECT_NEAR((*h)(x)(0), ex3_by_quadrature(x), 1e-4 * std::abs(ex3_by_quadrature(x)));
}

TEST(Induction, InvarianceErrorHasTargetOrder) {
  const auto& P = ex3();
  EXPECT_TRUE(P.residual_x.passed());
  EXPECT_TRUE(P.residual_y.passed());
  EXPECT_GE(P.residual_y.min_slope, P.ell + 0.9);
  EXPECT_EQ(P.residual_y.fits.size(), 12u);
}

TEST(Induction, DroppingTheTopTermCostsAnOrder) {
  Parametrization D = ex3();
  D.state.Ky = D.state.Ky.without(2);
  measure_residual(D);
  EXPECT_FALSE(D.residual_y.passed());
  EXPECT_GE(ex3().residual_y.min_slope - D.residual_y.min_slope, 1.0);
}

TEST(Induction, InvarianceEquationHoldsPointwise) {
  const auto& P = ex3();
  for (const auto& x : ex3_points(5, 0.01, 0.1)) {
    Vec lhs = evaluate_map(P.ctx.F, P.K(x));
    Vec rhs = P.K(P.R(x));
    EXPECT_LT((lhs - rhs - P.residual(x)).norm(), 1e-15);
    EXPECT_LT((lhs - rhs).norm(), 1e-2 * std::pow(x.norm(), 4));
  }
}

TEST(Induction, NormalFormExampleNeedsResidueTerm) {
  const auto& P = ex4();
  const LedgerEntry* r = P.find("R", 3);
  ASSERT_NE(r, nullptr);
  EXPECT_TRUE(r->nonzero);
  EXPECT_EQ(r->solver, "residue");
  EXPECT_TRUE(P.residual_x.passed());
  EXPECT_TRUE(P.residual_y.passed());
}

TEST(Induction, ForcingZeroResidueDiverges) {
  auto doc = problem("ex4");
  doc.run.force_zero_R = true;
  try {
    run(doc);
    FAIL() << "expected divergence";
  } catch (const DivergentCohomologicalIntegral& e) {
    EXPECT_EQ(e.degree(), 2);
    EXPECT_EQ(e.block(), "x");
  }
}

TEST(Induction, FreeStrategyWithZeroChoiceReachesTargetOrder) {
  auto doc = problem("ex4");
  doc.run.strategy = Strategy::free_kx;
  Parametrization P = run(doc);
  const LedgerEntry* kx = P.find("K_x", 2);
  ASSERT_NE(kx, nullptr);
  EXPECT_EQ(kx->solver, "free");
  EXPECT_TRUE(P.residual_x.passed());
}

TEST(Induction, FreeStrategyAcceptsUserTerms) {
  auto doc = problem("ex4");
  doc.run.strategy = Strategy::free_kx;
  SparsePolynomial k2(2, 2);
  k2.add(1, 0.5, {1, 1});
  doc.run.free_kx[2] = k2;
  Parametrization P = run(doc);
  const HomogeneousTerm* h = P.state.Kx.at(2);
  ASSERT_NE(h, nullptr);
  EXPECT_NEAR((*h)(vec2(0.02, 0.01))(1), 1e-4, 1e-18);
  EXPECT_TRUE(P.residual_x.passed());
  EXPECT_TRUE(P.residual_y.passed());
}

TEST(Induction, LowerOrderYBlockUsesAlgebraicSolves) {
  Parametrization P = run(problem("sweep-mlessn"));
  int algebraic = 0;
  for (const auto& e : P.ledger())
    if (e.role == "K_y" && e.solver == "algebraic") ++algebraic;
  EXPECT_GE(algebraic, 2);
  EXPECT_TRUE(P.residual_y.passed());
}

TEST(Induction, RadialExampleUsesRadialSolver) {
  Parametrization P = run(problem("ex1-radial"));
  const LedgerEntry* e = P.find("K_y", 2);
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->solver, "radial");
  EXPECT_TRUE(P.residual_y.passed());
}

TEST(Induction, ConvergentSectorExampleMatchesAnsatz) {
  Parametrization P = run(problem("ex2", {{"b", "0.6"}}));
  const HomogeneousTerm* h = P.state.Ky.at(2);
  ASSERT_NE(h, nullptr);
  for (const auto& u : interior_probe_points(P.ctx.domain, 10, 0.1)) {
    Vec x = 0.1 * u / P.ctx.domain.norm_x()(u);
    if (std::abs(x(1)) < 0.1 * x.norm()) continue;
    double want = -5 * std::pow(x(1), 3) / x(0);
    EXPECT_NEAR((*h)(x)(0), want, 1e-8 * std::abs(want));
  }
}
