#include <gtest/gtest.h>

#include "common.hpp"

using namespace pmhom;
using namespace testing_support;

namespace {

// Scalar model on x > 0: pa = -x^2, Q = b x, w = x^(m+1).  Exact solution h = -x^m / (m + b).
struct Scalar {
  DomainSpec domain{1, ConeKind::halfspace, 0.5, Norm{NormKind::euclidean, {}}, Norm{NormKind::euclidean, {}}};
  GridPtr grid = std::make_shared<const CrossSectionGrid>(domain, 9, InterpScheme::spectral);
  Tolerances tol;

  CohomologicalProblem make(double b, int m, HypothesisPolicy policy = HypothesisPolicy::strict) const {
    SparsePolynomial pa(1, 1), Q(1, 1), w(1, 1);
    pa.add(0, -1.0, {2});
    Q.add(0, b, {1});
    w.add(0, 1.0, {m + 1});
    auto prob = make_problem(pa, Q, 1, 2, HomogeneousTerm::polynomial(w, m + 1), domain, grid, tol);
    prob.policy = policy;
    return prob;
  }
};

Vec scalar(double v) {
  Vec x(1);
  x(0) = v;
  return x;
}

}  // namespace

TEST(Ode, DormandPrinceMatchesLogisticDecay) {
  DormandPrince dp([](double, const Vec& y, Vec& dy) { dy(0) = -y(0) * y(0); }, 1, 1e-12, {});
  Vec y = scalar(1.0);
  double t = 0;
  dp.integrate(t, y, 50.0);
  EXPECT_NEAR(y(0), 1.0 / 51.0, 1e-12);
}

TEST(Cohomology, GeneralSolverMatchesExactScalarSolution) {
  Scalar s;
  auto prob = s.make(0.5, 3);
  CohomologySolution sol = solve_general(prob, s.tol);
  for (double x : {0.05, 0.2, 0.45}) EXPECT_NEAR(sol.term(scalar(x))(0), -std::pow(x, 3) / 3.5, 1e-10 * std::pow(x, 3));
  EXPECT_LT(sol.pde_residual, 1e-8);
  EXPECT_GT(sol.margin, 0);
}

TEST(Cohomology, RadialSolverAgreesWithGeneralSolver) {
  Scalar s;
  auto prob = s.make(0.5, 3);
  ASSERT_TRUE(radial_factor(prob.pa));
  auto r = solve_radial(prob, s.tol);
  auto g = solve_general(prob, s.tol);
  EXPECT_EQ(r.solver, "radial");
  for (double x : {0.1, 0.3}) EXPECT_NEAR(r.term(scalar(x))(0), g.term(scalar(x))(0), 1e-10 * std::pow(x, 3));
}

TEST(Cohomology, NonRadialFieldIsRejectedByRadialSolver) {
  auto doc = problem("ex3");
  EXPECT_FALSE(radial_factor(doc.map.pa()));
}

TEST(Cohomology, StrictPolicyRefusesNonPositiveMargin) {
  Scalar s;
  auto prob = s.make(-1.5, 1);
  EXPECT_LE(prob.margin(), 0);
  EXPECT_THROW(solve_general(prob, s.tol), DivergentCohomologicalIntegral);
}

TEST(Cohomology, MonitorDetectsNonIntegrableTail) {
  Scalar s;
  s.tol.max_doublings = 60;
  auto prob = s.make(-1.5, 1, HypothesisPolicy::monitor);
  prob.force = true;
  EXPECT_THROW(solve_general(prob, s.tol), DivergentCohomologicalIntegral);
}

TEST(Cohomology, DirectEvaluationMatchesInterpolant) {
  Scalar s;
  auto prob = s.make(0.5, 3);
  auto lazy = lazy_solution(prob, s.tol);
  EXPECT_EQ(lazy.kind(), TermKind::lazy);
  EXPECT_NEAR(lazy(scalar(0.3))(0), -0.027 / 3.5, 1e-13);
}

TEST(Cohomology, DerivativeOfSolutionMatchesExactDerivative) {
  Scalar s;
  auto prob = s.make(0.5, 3);
  auto sol = solve_general(prob, s.tol);
  for (double x : {0.1, 0.4}) {
    Mat D = derivative_of_solution(prob, sol.term, scalar(x), s.tol);
    EXPECT_NEAR(D(0, 0), -3 * x * x / 3.5, 1e-8 * x * x);
  }
}

TEST(Cohomology, PdeResidualFlagsAWrongSolution) {
  Scalar s;
  auto prob = s.make(0.5, 3);
  auto sol = solve_general(prob, s.tol);
  EXPECT_LT(pde_residual(prob, sol.term, s.tol), 1e-8);
  EXPECT_GT(pde_residual(prob, sol.term.scaled(1.01), s.tol), 1e-3);
}

TEST(Flow, SectorExampleMatchesClosedForms) {
  auto doc = problem("ex2", {{"b", "0.6"}});
  MapContext ctx = make_context(doc.map, doc.domain, doc.run);
  auto prob = cohomological_problem(ctx, ctx.dyq, 1, HomogeneousTerm::polynomial(doc.map.g().restrict_prefix(2), 3));
  CohomologicalProblem plain = *prob;
  plain.w = HomogeneousTerm();
  for (const auto& x : cone_samples(ctx.domain, 6, 0.2, 1.0, 9))
    for (double t : {1.0, 10.0, 100.0}) {
      auto end = integrate_flow(plain, x, t, ctx.tol(), false).back();
      Vec phi = ex2_phi(0.2, x, t);
      EXPECT_LT((end.x - phi).norm(), 1e-9 * phi.norm());
      EXPECT_NEAR(end.Minv(0, 0), ex2_minv(0.6, x, t), 1e-9 * ex2_minv(0.6, x, t));
    }
  EXPECT_LT(scaling_defect(*prob, ctx.tol()), 1e-8);
}

TEST(Flow, EnvelopesHoldWhenTheirHypothesesDo) {
  Scalar s;
  auto prob = s.make(0.5, 3);
  ASSERT_TRUE(prob.hp1() && prob.hp2());
  EnvelopeCheck env = check_envelopes(prob, s.tol, 50);
  EXPECT_EQ(env.samples.size(), 50u);
  EXPECT_TRUE(env.passed(0.03)) << env.worst_phi << " " << env.worst_minv;
}

TEST(Flow, DecayExponentIsMeasuredWhenBoundsAreUnavailable) {
  auto doc = problem("ex2", {{"b", "0.3"}});
  MapContext ctx = make_context(doc.map, doc.domain, doc.run);
  auto prob = cohomological_problem(ctx, ctx.dyq, 1, HomogeneousTerm::polynomial(doc.map.g().restrict_prefix(2), 3));
  EXPECT_FALSE(prob->hp2());
  // |M^{-1} w(phi)| ~ t^-(b + 3a) along x2 != 0.
  EXPECT_NEAR(measure_decay_exponent(*prob, ctx.tol()), 0.9, 0.05);
  EXPECT_THROW(decay_envelope(*prob, ctx.tol()), DivergentCohomologicalIntegral);
}

TEST(Flow, ExampleTwoDivergesOnlyBelowTheThreshold) {
  try {
    run(problem("ex2", {{"b", "0.3"}}));
    FAIL() << "expected divergence";
  } catch (const DivergentCohomologicalIntegral& e) {
    EXPECT_EQ(e.degree(), 2);
    EXPECT_EQ(e.block(), "y");
  }
}
