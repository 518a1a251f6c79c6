#include <cmath>

#include <gtest/gtest.h>

#include "mfglab/manufacture.hpp"
#include "mfglab/operators.hpp"

using namespace mfglab;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Operators, ExactOnQuadraticsIncludingBoundaryNodes1D) {
  auto g = SpaceTimeGrid::build({1.0}, {11}, 1.0, 3);
  CoefficientSet cs = CoefficientSet::defaults(1);
  cs.set("a1", "0.3*x");
  cs.set("a0", "-0.5");
  SampledCoefficients sc = sample(cs, g);
  Expr u = Expr::parse("x*x + 2*x + t");
  ScalarField uf = sample_field(u, g);
  // A u = u'' + 0.3 x u' - 0.5 u by hand.
  std::vector<double> exact(g->nodes());
  for (int k = 0; k < g->nodes(); ++k) {
    double x = g->x(k), t = g->t(1);
    exact[k] = 2 + 0.3 * x * (2 * x + 2) - 0.5 * (x * x + 2 * x + t);
  }
  EXPECT_LT(max_abs_diff(apply_A(uf, 1, sc), exact), 1e-11);
}

TEST(Operators, MatchesSymbolicImageOnQuadratics2D) {
  auto g = SpaceTimeGrid::build({1.0, 1.0}, {9, 7}, 1.0, 3);
  CoefficientSet cs = CoefficientSet::defaults(2);
  cs.set("a11", "1 + 0.2*x");
  cs.set("a12", "0.1");
  cs.set("a2", "y");
  cs.set("b22", "2");
  cs.set("kxy", "0.4");
  cs.set("k0", "1");
  SampledCoefficients sc = sample(cs, g);
  Expr u = Expr::parse("x*y + y*y - 3*x*x + 1");
  ScalarField uf = sample_field(u, g);
  for (auto [which, img] : {std::pair{Which::A, symbolic_A(cs, u)}, std::pair{Which::B, symbolic_B(cs, u)},
                            std::pair{Which::A0, symbolic_A0(cs, u)}}) {
    ScalarField ref = sample_field(img, g);
    std::vector<double> got = which == Which::A ? apply_A(uf, 1, sc)
                              : which == Which::B ? apply_B(uf, 1, sc)
                                                  : apply_A0(uf, 1, sc);
    std::vector<double> want(ref.level(1), ref.level(1) + g->nodes());
    EXPECT_LT(max_abs_diff(got, want), 1e-10);
  }
}

TEST(Operators, ConormalDerivativeOfLinearField) {
  auto g = SpaceTimeGrid::build({1.0, 1.0}, {6, 6}, 1.0, 3);
  CoefficientSet cs = CoefficientSet::defaults(2);
  cs.set("a12", "0.25");
  SampledCoefficients sc = sample(cs, g);
  ScalarField u = sample_field(Expr::parse("2*x + 3*y"), g);
  BoundaryTrace c = conormal_trace(u, sc, Which::A);
  // M grad u = (2 + 0.75, 0.5 + 3).
  for (int e = 0; e < g->boundary_size(); ++e) {
    const auto& be = g->boundary()[e];
    EXPECT_NEAR(c.at(e, 0), be.normal[0] * 2.75 + be.normal[1] * 3.5, 1e-12);
  }
}

TEST(Operators, RobinResidualVanishesForConsistentData) {
  auto g = SpaceTimeGrid::build({1.0}, {17}, 1.0, 5);
  CoefficientSet cs = CoefficientSet::defaults(1);
  cs.set("p", "-1");
  Expr u = Expr::parse("x*x*t + 1");
  BoundaryTrace data = sample_trace(symbolic_robin(cs, Which::A, u, 1), g);
  BoundaryTrace r = robin_residual(sample_field(u, g), sample(cs, g), Which::A, data);
  for (double x : r.v) EXPECT_NEAR(x, 0.0, 1e-12);
}

TEST(Operators, SecondOrderOnSmoothFields) {
  double prev = 0;
  for (int n : {17, 33, 65}) {
    auto g = SpaceTimeGrid::build({1.0}, {n}, 1.0, 3);
    CoefficientSet cs = CoefficientSet::defaults(1);
    cs.set("a11", "1 + 0.5*x");
    Expr u = Expr::parse("sin(3*x)");
    std::vector<double> got = apply_A(sample_field(u, g), 1, sample(cs, g));
    ScalarField ref = sample_field(symbolic_A(cs, u), g);
    double err = max_abs_diff(got, std::vector<double>(ref.level(1), ref.level(1) + g->nodes()));
    if (prev > 0) EXPECT_GT(std::log2(prev / err), 1.8);
    prev = err;
  }
}
