#include <gtest/gtest.h>

#include <filesystem>

#include "common.hpp"

using namespace pmhom;
using namespace testing_support;

TEST(Polynomial, EvaluatesAndDifferentiates) {
  SparsePolynomial p(2, 1);
  p.add(0, 3.0, {2, 1}).add(0, -1.0, {0, 3});
  Vec x = vec2(0.7, -0.4);
  EXPECT_NEAR(p(x)(0), 3 * 0.49 * -0.4 + 0.064, 1e-15);
  Mat J = p.jacobian(x);
  EXPECT_NEAR(J(0, 0), 6 * 0.7 * -0.4, 1e-15);
  EXPECT_NEAR(J(0, 1), 3 * 0.49 - 3 * 0.16, 1e-15);
  EXPECT_EQ(p.homogeneous_degree(), 3);
}

TEST(Polynomial, CancellingTermsDisappear) {
  SparsePolynomial p(1, 1);
  p.add(0, 2.0, {1}).add(0, -2.0, {1});
  EXPECT_TRUE(p.is_zero());
}

TEST(Polynomial, CompositionMatchesPointwiseEvaluation) {
  SparsePolynomial p(2, 2);
  p.add(0, 1.0, {2, 0}).add(1, -2.0, {1, 1}).add(1, 0.5, {0, 2});
  SparsePolynomial s(2, 2);
  s.add(0, 1.0, {1, 0}).add(0, 0.3, {0, 2}).add(1, 1.0, {0, 1}).add(1, -1.0, {2, 0});
  SparsePolynomial c = p.compose(s);
  for (double a : {0.1, -0.3, 0.8}) {
    Vec x = vec2(a, 0.5 - a);
    EXPECT_LT((c(x) - p(s(x))).norm(), 1e-14);
  }
  EXPECT_TRUE(p.compose(s, 2).approx_equal(c.degree_part(2), 1e-15));
}

TEST(Polynomial, RejectsMalformedMonomials) {
  SparsePolynomial p(2, 1);
  EXPECT_THROW(p.add(0, 1.0, {1}), ValidationError);
  EXPECT_THROW(p.add(0, 1.0, {-1, 2}), ValidationError);
}

TEST(Document, LoadsExampleThreeWithExpectedShape) {
  auto doc = problem("ex3");
  EXPECT_EQ(doc.kind, ProblemKind::map);
  EXPECT_EQ(doc.map.n, 2);
  EXPECT_EQ(doc.map.N, 3);
  EXPECT_EQ(doc.run.ell, 4);
  EXPECT_EQ(doc.run.tol.nodes, 257);
  Vec x = vec2(0.3, 0.2);
  EXPECT_NEAR(doc.map.pa()(x)(0), -0.027, 1e-15);
  EXPECT_NEAR(doc.map.g().restrict_prefix(2)(x)(0), 0.09 * 0.04, 1e-15);
}

TEST(Document, SerializeRoundTrips) {
  for (const char* name : {"ex1-radial", "ex3", "ex4", "ex2-forced", "sweep-mlessn"}) {
    auto doc = problem(name);
    EXPECT_EQ(load_problem(serialize(doc)), doc) << name;
  }
}

TEST(Document, PlaceholdersAndParameters) {
  std::string text = read_text(source_path("problems/ex2.pm"));
  EXPECT_EQ(placeholders(text), (std::set<std::string>{"a", "b"}));
  auto low = load_problem(text, {{"b", "0.3"}});
  auto high = load_problem(text, {{"b", "0.6"}});
  Vec z(3);
  z << 0.1, 0.05, 1.0;
  EXPECT_NEAR(low.map.q(z)(0), 0.03, 1e-15);
  EXPECT_NEAR(high.map.q(z)(0), 0.06, 1e-15);
  EXPECT_EQ(param_defaults(text).at("a"), "0.2");
}

TEST(Document, RejectsQNotVanishingOnXAxis) {
  std::string text = read_text(source_path("problems/ex3.pm"));
  text.replace(text.find("2  0 2 1"), 8, "2  0 3 0");
  EXPECT_THROW(load_problem(text), ValidationError);
}

TEST(Document, RejectsTargetBeyondSmoothness) {
  auto text = read_text(source_path("problems/ex3.pm"));
  text.replace(text.find("ell = 4"), 7, "ell = 7");
  EXPECT_THROW(load_problem(text), ValidationError);
}

TEST(Document, UnknownPlaceholderIsAParseError) {
  EXPECT_THROW(load_problem("[map]\nn = ${zz}\n"), ParseError);
}

TEST(Document, ForcingHarmonicsAreParsed) {
  auto doc = problem("ex2-forced");
  ASSERT_EQ(doc.kind, ProblemKind::flow);
  EXPECT_EQ(doc.field.max_harmonic(), 1);
  Vec z(3);
  z << 0.1, 0.05, 0.0;
  EXPECT_NEAR(doc.field.forcing(Block::y, z, 0.0)(0), 2 * 1.25e-4, 1e-18);
  EXPECT_NEAR(doc.field.forcing(Block::y, z, 0.25)(0), 1.25e-4, 1e-15);
}

TEST(Corpus, EmbeddedDocumentsMatchProblemFiles) {
  std::set<std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(source_path("problems"))) {
    if (entry.path().extension() != ".pm") continue;
    const std::string name = entry.path().stem().string();
    files.insert(name);
    ASSERT_TRUE(corpus().count(name)) << name;
    EXPECT_EQ(std::string(corpus().at(name)), read_text(entry.path().string())) << name;
  }
  EXPECT_EQ(files.size(), corpus().size());
}

TEST(Corpus, RegistryNamesResolve) {
  for (const auto& ex : example_registry()) EXPECT_NO_THROW(example_document(ex)) << ex.name;
  EXPECT_THROW(find_example("ex9"), UnknownExample);
}

TEST(Model, EvaluateMapIsIdentityPlusNonlinearity) {
  auto doc = problem("ex4");
  Vec z(3);
  z << 0.02, 0.01, 0.005;
  Vec Fz = evaluate_map(doc.map, z);
  EXPECT_NEAR(Fz(0), 0.02 - 0.0004 + 0.02 * 0.02 * 0.02, 1e-16);
  EXPECT_NEAR(Fz(1), 0.01 - 2 * 0.02 * 0.01, 1e-16);
  EXPECT_NEAR(Fz(2), 0.005 + 0.0005 * 0.005 + std::pow(0.02, 4), 1e-16);
}
