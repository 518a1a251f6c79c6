#include <cmath>

#include <gtest/gtest.h>

#include "mfglab/errors.hpp"
#include "mfglab/manufacture.hpp"
#include "mfglab/norms.hpp"

using namespace mfglab;

TEST(Norms, L2OfConstantIsSqrtOfMeasure) {
  auto g = SpaceTimeGrid::build({2.0, 1.0}, {5, 5}, 3.0, 7);
  ScalarField one(g, 1.0);
  EXPECT_NEAR(norm_L2(one), std::sqrt(6.0), 1e-12);
}

TEST(Norms, H21ConvergesToClosedForm) {
  // f = x t on [0,1]^2: ||f||^2 = 1/9, ||f_x||^2 = 1/3, ||f_xx||^2 = 0, ||f_t||^2 = 1/3.
  auto g = SpaceTimeGrid::build({1.0}, {129}, 1.0, 129);
  ScalarField f = sample_field(Expr::parse("x*t"), g);
  EXPECT_NEAR(norm_H21(f), std::sqrt(7.0 / 9.0), 1e-4);
  // Over t in [1/4, 3/4]: int t^2 = 13/96, int 1 = 1/2.
  double e = 13.0 / 96.0 / 3.0 + 13.0 / 96.0 + 0.5 / 3.0;
  EXPECT_NEAR(norm_H21(f, 0.25), std::sqrt(e), 1e-4);
}

TEST(Norms, H21ShrinksAsTheRegionShrinks) {
  auto g = SpaceTimeGrid::build({1.0}, {33}, 1.0, 65);
  ScalarField f = sample_field(Expr::parse("sin(3*x)*exp(t)"), g);
  EXPECT_GT(norm_H21(f, 0.0), norm_H21(f, 0.125));
  EXPECT_GT(norm_H21(f, 0.125), norm_H21(f, 0.25));
  EXPECT_THROW(norm_H21(f, 0.5), ConfigError);
}

TEST(Norms, BoundaryHalfNormIsEuclideanIn1D) {
  auto g = SpaceTimeGrid::build({1.0}, {9}, 1.0, 3);
  double tr[2] = {3.0, 4.0};
  EXPECT_DOUBLE_EQ(norm_H12_boundary(*g, tr), 5.0);
}

TEST(Norms, SlobodeckiSeminormVanishesOnConstants) {
  auto g = SpaceTimeGrid::build({1.0, 1.0}, {9, 9}, 1.0, 3);
  std::vector<double> c(g->boundary_size(), 2.0);
  EXPECT_NEAR(seminorm_H12_boundary(*g, c.data()), 0.0, 1e-12);
  std::vector<double> lin(g->boundary_size());
  for (int e = 0; e < g->boundary_size(); ++e) lin[e] = g->x(g->boundary()[e].node);
  EXPECT_GT(seminorm_H12_boundary(*g, lin.data()), 0.0);
}

TEST(Norms, GammaH1OfTrace) {
  // u(1, t) = t on Gamma = {x = 1}: int t^2 + int 1 = 4/3.
  auto g = SpaceTimeGrid::build({1.0}, {17}, 1.0, 65);
  BoundaryPartition part(g, {Side::X1});
  ScalarField f = sample_field(Expr::parse("x*t"), g);
  EXPECT_NEAR(norm_H1_gamma(f, part), std::sqrt(4.0 / 3.0), 1e-4);
}

TEST(Norms, WindowLevelsAreInclusive) {
  auto g = SpaceTimeGrid::build({1.0}, {5}, 1.0, 9);
  auto [l0, l1] = window_levels(*g, 0.25, 0.75);
  EXPECT_EQ(l0, 2);
  EXPECT_EQ(l1, 6);
}
