#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "mfglab/errors.hpp"
#include "mfglab/weights.hpp"

using namespace mfglab;

namespace {

GridPtr line(int n = 33, int nt = 65, double T = 1.0) { return SpaceTimeGrid::build({1.0}, {n}, T, nt); }

}  // namespace

TEST(Mu, SymmetricAboutMidpoint) {
  for (double T : {1.0, 4.0})
    for (int k = 1; k < 512; ++k) {
      double t = T * k / 512.0;
      EXPECT_EQ(eval_mu(t, T), eval_mu(T - t, T)) << "t = " << t;
    }
}

TEST(Mu, QuadraticNearTheEnds) {
  const double T = 2.0;
  for (int k = 1; k <= 128; ++k) {
    double t = 0.25 * T * k / 128.0;
    EXPECT_EQ(eval_mu(t, T), t * t);
  }
}

TEST(Mu, TwiceContinuouslyDifferentiable) {
  const double T = 1.0;
  for (double tj : {0.25, 0.75}) {
    MuValue a = mu_derivatives(tj - 1e-9, T), b = mu_derivatives(tj + 1e-9, T);
    EXPECT_NEAR(a.mu, b.mu, 1e-8);
    EXPECT_NEAR(a.dmu, b.dmu, 1e-7);
    EXPECT_NEAR(a.d2mu, b.d2mu, 1e-6);
  }
  // Derivatives against central differences inside the blend.
  const double t = 0.37, h = 1e-5;
  MuValue m = mu_derivatives(t, T);
  EXPECT_NEAR(m.dmu, (eval_mu(t + h, T) - eval_mu(t - h, T)) / (2 * h), 1e-8);
  EXPECT_NEAR(m.d2mu, (eval_mu(t + h, T) - 2 * m.mu + eval_mu(t - h, T)) / (h * h), 1e-4);
  EXPECT_NEAR(mu_derivatives(0.5, T).dmu, 0.0, 1e-14);
}

TEST(Mu, OutsideOpenIntervalIsRejected) {
  EXPECT_THROW(eval_mu(0.0, 1.0), ConfigError);
  EXPECT_THROW(eval_mu(1.0, 1.0), ConfigError);
}

TEST(CarlemanWeights, AlphaNegativeWithMaximumOnObservedSideAtMidTime) {
  auto g = line();
  BoundaryPartition part(g, {Side::X1});
  CarlemanWeights w(g, build_eta(part), 1.0, 2.0);
  EXPECT_EQ(w.eta().observed_side, Side::X1);
  double best = -std::numeric_limits<double>::infinity();
  for (int n = 1; n < g->nt() - 1; ++n)
    for (int k = 0; k < g->nodes(); ++k) {
      double a = w.alpha(g->x(k), 0, g->t(n));
      EXPECT_LT(a, 0.0);
      best = std::max(best, a);
    }
  EXPECT_DOUBLE_EQ(best, w.alpha_max());
  EXPECT_DOUBLE_EQ(w.alpha(1.0, 0, 0.5), w.alpha_max());
  // Closed form at the maximum: (e^{lambda} - e^{2 lambda}) / mu(T/2).
  EXPECT_NEAR(w.alpha_max(), (std::exp(1.0) - std::exp(2.0)) / eval_mu(0.5, 1.0), 1e-12);
}

TEST(CarlemanWeights, EtaVanishesOppositeTheObservedSide) {
  auto g = SpaceTimeGrid::build({1.0, 1.0}, {9, 9}, 1.0, 9);
  BoundaryPartition part(g, {Side::Y0});
  Eta eta = build_eta(part);
  EXPECT_EQ(eta.observed_side, Side::Y0);
  EXPECT_DOUBLE_EQ(eta(0.3, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(eta(0.3, 0.0), 1.0);
}

TEST(CarlemanWeights, PhiPowersTimesWeightStayBounded) {
  auto g = line();
  BoundaryPartition part(g, {Side::X1});
  CarlemanWeights w(g, build_eta(part), 1.0);
  for (double rho : {-2.0, -1.0, 0.0, 1.0, 2.0, 3.0}) {
    WeightBoundReport r = check_weight_bounds(rho, {1, 2, 4, 8}, w);
    EXPECT_TRUE(r.finite);
    EXPECT_TRUE(std::isfinite(r.sup));
    EXPECT_LT(r.sup, 1.0);
    EXPECT_GT(r.argmax_t, 0.0);
    EXPECT_LT(r.argmax_t, 1.0);
  }
}

TEST(CarlemanWeights, PhiDerivativeBoundsAreFinite) {
  auto g = line();
  BoundaryPartition part(g, {Side::X1});
  CarlemanWeights w(g, build_eta(part), 1.0);
  PhiDerivativeBounds b = phi_derivative_bounds(w);
  EXPECT_TRUE(std::isfinite(b.time));
  // |grad phi| = lambda |grad eta| phi exactly.
  EXPECT_NEAR(b.space, 1.0, 1e-12);
}
