#include <gtest/gtest.h>

#include "common.hpp"

using namespace pmhom;
using namespace testing_support;

namespace {

// Brute-force sup/inf of the defining quotients on a fine polar grid of the ex4 sector.
struct Brute {
  double a = 1e300, b = 0, A = 1e300, B = -1e300;
};

Brute brute_ex4(const MapSpec& F, const DomainSpec& dom) {
  Brute out;
  const Norm& nx = dom.norm_x();
  SparsePolynomial pa = F.pa(), J = pa.jacobian_poly();
  for (int i = 1; i < 200; ++i)
    for (int k = -100; k <= 100; ++k) {
      double r = dom.rho() * i / 200.0;
      Vec x = vec2(r, r * (1 - 1e-9) * k / 100.0);
      double rN = std::pow(nx(x), 2);
      out.a = std::min(out.a, -(nx(x + pa(x)) - nx(x)) / rN);
      out.b = std::max(out.b, nx(pa(x)) / rN);
      Mat M = Mat::Identity(2, 2) + eval_matrix(J, x, 2, 2);
      out.A = std::min(out.A, -(nx.op(M) - 1) / nx(x));
      Mat Bm = Mat::Identity(2, 2) - eval_matrix(J, x, 2, 2);
      out.B = std::max(out.B, (nx.op(Bm) - 1) / nx(x));
    }
  return out;
}

}  // namespace

TEST(Constants, NormalFormExampleMatchesIndependentSweep) {
  auto doc = problem("ex4");
  ConstantsReport r = estimate_constants(doc.map, doc.domain, doc.run.tol);
  Brute b = brute_ex4(doc.map, doc.domain);
  EXPECT_NEAR(r.a_p, b.a, 1e-3);
  EXPECT_NEAR(r.b_p, b.b, 1e-3);
  EXPECT_NEAR(r.A_p, b.A, 1e-3);
  EXPECT_NEAR(r.B_p, b.B, 1e-3);
  EXPECT_NEAR(r.a_p, 1.0, 0.02);
  EXPECT_NEAR(r.A_p, 0.0, 0.02);
  EXPECT_NEAR(r.b_p, 2.0, 0.04);
  EXPECT_NEAR(r.B_p, 4.0, 0.08);
  EXPECT_LE(r.a_p, r.b_p);
}

TEST(Constants, SectorExampleHasEscapingWitnessForH3) {
  auto doc = problem("ex2");
  MapContext ctx = make_context(doc.map, doc.domain, doc.run);
  const auto& c = ctx.constants;
  EXPECT_NEAR(c.a_p, 1.0, 0.02);
  EXPECT_NEAR(c.A_p, 0.04, 0.0008);
  EXPECT_NEAR(c.B_q, 0.3, 0.006);
  EXPECT_TRUE(c.h1.satisfied);
  EXPECT_TRUE(c.h2.satisfied);
  EXPECT_FALSE(c.h3.satisfied);
  // Margin minimizer, orbit start, and the first orbit point outside V.
  ASSERT_EQ(c.h3.witnesses.size(), 3u);
  EXPECT_TRUE(doc.domain.contains(c.h3.witnesses[1]));
  EXPECT_FALSE(doc.domain.contains(c.h3.witnesses[2]));
}

TEST(Constants, StrictPolicyRefusesFailingHypotheses) {
  auto doc = problem("ex2", {{"b", "0.6"}});
  doc.run.hypotheses = HypothesisPolicy::strict;
  EXPECT_THROW(run(doc), HypothesisFailure);
}

TEST(Constants, SamplingBudgetIsEnforced) {
  auto doc = problem("ex4");
  doc.run.tol.sample_points = 10;
  EXPECT_THROW(estimate_constants(doc.map, doc.domain, doc.run.tol), ValidationError);
}

TEST(Budget, ClosedFormExampleGivesGammaThree) {
  auto doc = problem("ex3");
  MapContext ctx = make_context(doc.map, doc.domain, doc.run);
  ASSERT_TRUE(ctx.budget);
  EXPECT_EQ(ctx.budget->tag, RegularityCase::finite);
  ASSERT_TRUE(ctx.budget->gamma);
  EXPECT_EQ(*ctx.budget->gamma, 3);
}

TEST(Budget, FormulaOnHandBuiltConstants) {
  ConstantsReport r;
  r.a_p = 1;
  r.b_p = 2;
  r.d_p = 2;
  r.c_p = 2;
  r.A_p = 1;
  r.B_p = 4;
  r.B_q = 1;
  Tolerances tol;
  // ratio (2 + 1/2) / (1 - 1/2) = 5 is an integer: gamma = 4 with the tie flagged.
  RegularityBudget b = regularity_budget(r, 2, 2, 4, tol);
  EXPECT_EQ(b.tag, RegularityCase::finite);
  EXPECT_EQ(b.gamma, 4);
  EXPECT_TRUE(b.gamma_tie);
  // ell_f = N - 1 + floor(0.99 * B_p / a_p + gamma (1 - A_p/d_p)) = 1 + floor(3.96 + 2) = 6.
  EXPECT_EQ(b.ell_f, 6);
  r.A_p = 3;
  EXPECT_EQ(regularity_budget(r, 2, 2, 4, tol).tag, RegularityCase::analytic);
  r.A_p = 2;
  EXPECT_EQ(regularity_budget(r, 2, 2, 4, tol).tag, RegularityCase::smooth);
}

TEST(Budget, ObstructionExampleAllowsOrderAtLeastTwoNMinusOne) {
  auto doc = problem("ex4");
  MapContext ctx = make_context(doc.map, doc.domain, doc.run);
  ASSERT_TRUE(ctx.budget);
  EXPECT_GE(ctx.budget->ell_f, 2 * doc.map.N - 1);
}
