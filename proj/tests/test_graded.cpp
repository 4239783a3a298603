#include <gtest/gtest.h>

#include "common.hpp"

using namespace pmhom;
using namespace testing_support;

namespace {

DomainSpec euclidean_plane(double rho = 0.5) {
  return DomainSpec(2, ConeKind::punctured, rho, Norm{NormKind::euclidean, {}}, Norm{NormKind::euclidean, {}});
}

DomainSpec max_sector(double kappa) {
  return DomainSpec(2, ConeKind::sector, 0.2, Norm{NormKind::max, {}}, Norm{NormKind::max, {}}, kappa);
}

// |x|^{1/2} x1^2 x2: homogeneous of degree 3.5 and smooth away from 0.
Vec fractional(const Vec& x) {
  Vec v(1);
  v(0) = std::sqrt(x.norm()) * x(0) * x(0) * x(1);
  return v;
}

}  // namespace

TEST(Domain, ConeMembershipAndBoundaryDistance) {
  DomainSpec d = max_sector(1.0);
  EXPECT_TRUE(d.contains(vec2(0.1, 0.05)));
  EXPECT_FALSE(d.contains(vec2(0.1, 0.15)));
  EXPECT_FALSE(d.contains(vec2(-0.1, 0.0)));
  EXPECT_FALSE(d.contains(vec2(0.3, 0.0)));
  EXPECT_GT(d.boundary_distance(vec2(0.1, 0.0)), 0.0);
  EXPECT_NEAR(d.with_rho(0.1).rho(), 0.1, 0.0);
}

TEST(Domain, NormsAndOperatorNorms) {
  Norm mx{NormKind::max, {}}, eu{NormKind::euclidean, {}};
  Vec x = vec2(3, -4);
  EXPECT_DOUBLE_EQ(mx(x), 4);
  EXPECT_DOUBLE_EQ(eu(x), 5);
  Mat A(2, 2);
  A << 1, -2, 3, 0.5;
  EXPECT_DOUBLE_EQ(mx.op(A), 3.5);
  EXPECT_NEAR(eu.op(A), Eigen::JacobiSVD<Mat>(A).singularValues()(0), 1e-14);
}

TEST(Grid, SpectralInterpolantOfSmoothHomogeneousFunction) {
  auto grid = std::make_shared<const CrossSectionGrid>(euclidean_plane(), 65, InterpScheme::spectral);
  auto exact = HomogeneousTerm::closed_form(3.5, 2, 1, fractional);
  auto interp = materialize(exact, grid);
  EXPECT_EQ(interp.kind(), TermKind::interpolant);
  for (double th : {0.1, 1.3, 2.9, 4.4, 6.0}) {
    Vec x = vec2(0.3 * std::cos(th), 0.3 * std::sin(th));
    EXPECT_NEAR(interp(x)(0), fractional(x)(0), 1e-12);
  }
}

TEST(Grid, CubicSchemeIsLessAccurateButConverges) {
  auto exact = HomogeneousTerm::closed_form(3.5, 2, 1, fractional);
  double err_coarse = 0, err_fine = 0;
  for (int nodes : {33, 129}) {
    auto grid = std::make_shared<const CrossSectionGrid>(euclidean_plane(), nodes, InterpScheme::cubic);
    auto interp = materialize(exact, grid);
    double err = 0;
    for (double th = 0.05; th < 6.2; th += 0.37) {
      Vec x = vec2(std::cos(th), std::sin(th));
      err = std::max(err, std::abs(interp(x)(0) - fractional(x)(0)));
    }
    (nodes == 33 ? err_coarse : err_fine) = err;
  }
  EXPECT_LT(err_fine, err_coarse / 20);
}

TEST(HomogeneousTerm, ScalingIdentityHolds) {
  auto grid = std::make_shared<const CrossSectionGrid>(euclidean_plane(), 65, InterpScheme::spectral);
  auto interp = materialize(HomogeneousTerm::closed_form(3.5, 2, 1, fractional), grid);
  auto pts = cone_samples(euclidean_plane(), 10, 0.2, 1.0, 4);
  EXPECT_LT(grading_defect(interp, pts), 1e-12);
}

TEST(HomogeneousTerm, SumMergesPolynomialParts) {
  SparsePolynomial a(2, 1), b(2, 1);
  a.add(0, 1.0, {2, 0});
  b.add(0, -1.0, {2, 0}).add(0, 2.0, {1, 1});
  auto s = HomogeneousTerm::sum({HomogeneousTerm::polynomial(a, 2), HomogeneousTerm::polynomial(b, 2)});
  ASSERT_NE(s.as_polynomial(), nullptr);
  EXPECT_NEAR(s(vec2(0.5, 0.25))(0), 0.25, 1e-16);
  EXPECT_THROW(HomogeneousTerm::sum({HomogeneousTerm::polynomial(a, 2), HomogeneousTerm::zero(3, 2, 1)}),
               ValidationError);
}

TEST(GradedFunction, AddsMergesAndDrops) {
  GradedFunction g(2, 1);
  SparsePolynomial a(2, 1);
  a.add(0, 1.0, {2, 0});
  g.add(HomogeneousTerm::polynomial(a, 2));
  g.add(HomogeneousTerm::closed_form(3.5, 2, 1, fractional));
  g.add(HomogeneousTerm::polynomial(a, 2));
  EXPECT_EQ(g.degrees(), (std::set<double>{2.0, 3.5}));
  Vec x = vec2(0.3, 0.4);
  EXPECT_NEAR(g(x)(0), 2 * 0.09 + fractional(x)(0), 1e-15);
  EXPECT_FALSE(g.all_polynomial());
  EXPECT_TRUE(g.without(3.5).all_polynomial());
  EXPECT_THROW(g.add(HomogeneousTerm::zero(2, 3, 1)), ValidationError);
}

TEST(DegreeBookkeeping, SumsArePairwiseAndCapped) {
  DegreeSet a{2, 3.5}, b{1, 2};
  EXPECT_EQ(degree_sum(a, b, 5), (DegreeSet{3, 4, 4.5}));
  EXPECT_EQ(degree_power(DegreeSet{1, 2}, 2, 3), (DegreeSet{2, 3}));
}

TEST(Extraction, RecoversMiddleDegreeOfAGradedSum) {
  auto grid = std::make_shared<const CrossSectionGrid>(euclidean_plane(), 65, InterpScheme::spectral);
  auto f = [](const Vec& x) -> Vec {
    Vec v(1);
    v(0) = x(0) * x(0) - x(0) * x(1) * x(1) * 0.0 + fractional(x)(0) + std::pow(x.norm(), 5);
    return v;
  };
  Tolerances tol;
  auto ladder = radius_ladder(0.5, tol);
  ExtractionResult r = extract_homogeneous(f, 1, 3.5, {2, 3.5, 5}, grid, ladder);
  for (double th : {0.2, 2.0, 4.0}) {
    Vec x = vec2(std::cos(th), std::sin(th));
    EXPECT_NEAR(r.term(x)(0), fractional(x)(0), 1e-9);
  }
  EXPECT_LT(r.fit_residual, 1e-12);
  EXPECT_THROW(extract_homogeneous(f, 1, 3.0, {2, 3.5, 5}, grid, ladder), ValidationError);
}

TEST(Extraction, MissingDegreeLeavesALargeFitResidual) {
  auto grid = std::make_shared<const CrossSectionGrid>(euclidean_plane(), 33, InterpScheme::spectral);
  auto f = [](const Vec& x) -> Vec { return fractional(x); };
  Tolerances tol;
  EXPECT_THROW(extract_homogeneous(f, 1, 2, {2}, grid, radius_ladder(0.5, tol)), FitResidualTooLarge);
}

TEST(TermTable, RoundTripsThroughText) {
  auto grid = std::make_shared<const CrossSectionGrid>(euclidean_plane(), 33, InterpScheme::spectral);
  auto h = materialize(HomogeneousTerm::closed_form(3.5, 2, 1, fractional), grid);
  std::istringstream is(term_table(h, *grid, "sample"));
  TermTable t = read_term_table(is);
  EXPECT_DOUBLE_EQ(t.degree, 3.5);
  EXPECT_EQ(t.in_dim, 2);
  EXPECT_EQ(t.out_dim, 1);
  ASSERT_EQ(t.values.cols(), grid->node_count());
  EXPECT_EQ((t.values - node_values(h, *grid)).cwiseAbs().maxCoeff(), 0.0);
}
