#include <cmath>

#include <gtest/gtest.h>

#include "mfglab/conjugate.hpp"
#include "mfglab/manufacture.hpp"
#include "mfglab/solver.hpp"

using namespace mfglab;

namespace {

struct Errors {
  double conj, split;
};

// w = e^{s alpha} u for u = cos(pi x)(1 + t) + x; L u = u_t - u_xx.
Errors identity_errors(int nx, double s) {
  const double T = 4.0;
  auto g = SpaceTimeGrid::build({1.0}, {nx}, T, 4 * (nx - 1) + 1);
  BoundaryPartition part(g, {Side::X1});
  CarlemanWeights wt(g, build_eta(part), 1.0, s);
  SampledCoefficients sc = sample(CoefficientSet::defaults(1), g);
  ScalarField u = sample_field(Expr::parse("cos(pi*x)*(1+t) + x"), g);
  ScalarField F(g);
  ScalarField w(g);
  const double pi = std::acos(-1.0);
  for (int n = 1; n < g->nt() - 1; ++n)
    for (int k = 0; k < g->nodes(); ++k) {
      double x = g->x(k), t = g->t(n);
      F.at(k, n) = std::cos(pi * x) + pi * pi * std::cos(pi * x) * (1 + t);
      w.at(k, n) = std::exp(s * wt.alpha(x, 0, t)) * u.at(k, n);
    }
  ConjugateResult cr = conjugate_P(w, wt, sc);
  SplitResult sp = decompose_L1_L2(w, F, wt, sc);
  return {l2_norm(cr.direct - cr.numeric) / l2_norm(w), l2_norm(sp.L1 + sp.L2 - sp.H) / l2_norm(w)};
}

}  // namespace

TEST(Conjugate, ReducesToPrincipalOperatorAtSZero) {
  auto g = SpaceTimeGrid::build({1.0}, {33}, 1.0, 33);
  BoundaryPartition part(g, {Side::X1});
  CarlemanWeights wt(g, build_eta(part), 1.0, 0.0);
  CoefficientSet cs = CoefficientSet::defaults(1);
  cs.set("a11", "1 + 0.3*x*t");
  SampledCoefficients sc = sample(cs, g);
  ScalarField w = sample_field(Expr::parse("sin(2*x)*exp(t)"), g);
  ConjugateResult cr = conjugate_P(w, wt, sc);
  ScalarField bare = principal_operator(w, sc);
  for (int n = 1; n < g->nt() - 1; ++n)
    for (int k = 0; k < g->nodes(); ++k) {
      EXPECT_NEAR(cr.direct.at(k, n), bare.at(k, n), 1e-10);
      EXPECT_NEAR(cr.numeric.at(k, n), bare.at(k, n), 1e-10);
    }
  for (int k = 0; k < g->nodes(); ++k) EXPECT_EQ(cr.direct.at(k, 0), 0.0);
}

TEST(Conjugate, ExpansionAndSplitConvergeAtSecondOrder) {
  for (double s : {2.0, 8.0}) {
    Errors a = identity_errors(65, s), b = identity_errors(129, s);
    EXPECT_GT(std::log2(a.conj / b.conj), 1.8) << "s = " << s;
    EXPECT_GT(std::log2(a.split / b.split), 1.8) << "s = " << s;
  }
}

TEST(Conjugate, AlphaSampleIsMinusInfinityAtEndLevels) {
  auto g = SpaceTimeGrid::build({1.0}, {9}, 1.0, 9);
  BoundaryPartition part(g, {Side::X1});
  ScalarField a = sample_alpha(CarlemanWeights(g, build_eta(part), 1.0, 1.0));
  EXPECT_TRUE(std::isinf(a.at(0, 0)) && a.at(0, 0) < 0);
  EXPECT_TRUE(std::isinf(a.at(3, 8)) && a.at(3, 8) < 0);
  EXPECT_LT(a.at(3, 4), 0.0);
}
