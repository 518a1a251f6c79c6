#include <cmath>

#include <gtest/gtest.h>

#include "mfglab/errors.hpp"
#include "mfglab/manufacture.hpp"
#include "mfglab/solver.hpp"

using namespace mfglab;

namespace {

CoefficientSet reference(int dim, double coupling) {
  CoefficientSet cs = CoefficientSet::defaults(dim);
  cs.set("a1", "0.3*x");
  cs.set("b0", "-0.5");
  cs.set("p", "-1");
  cs.set("q", "-0.5");
  cs.set("c0", Expr::constant(coupling));
  cs.set("k0", Expr::constant(coupling));
  return cs;
}

double round_trip_error(int nx, double coupling, int* iterations = nullptr) {
  auto g = SpaceTimeGrid::build({1.0}, {nx}, 1.0, 2 * (nx - 1) + 1);
  CoefficientSet cs = reference(1, coupling);
  ManufacturedProblem mp =
      manufacture(Expr::parse("exp(-t)*cos(pi*x) + x*x"), Expr::parse("(1+t)*sin(x) + 1"), cs, g);
  SolveResult r = solve_linearized(mp.data, sample(cs, g), SolveOptions{});
  if (iterations) *iterations = r.iterations;
  return l2_norm(r.u - mp.u) + l2_norm(r.v - mp.v);
}

}  // namespace

TEST(Solver, DecoupledRoundTripIsSecondOrder) {
  double e1 = round_trip_error(65, 0.0), e2 = round_trip_error(129, 0.0);
  EXPECT_GT(std::log2(e1 / e2), 1.8);
}

TEST(Solver, CoupledRoundTripIsSecondOrderWithContractingPicard) {
  int it = 0;
  double e1 = round_trip_error(65, 0.3), e2 = round_trip_error(129, 0.3, &it);
  EXPECT_GT(std::log2(e1 / e2), 1.8);
  EXPECT_LT(it, 10);
}

TEST(Solver, PicardUpdatesDecayGeometrically) {
  auto g = SpaceTimeGrid::build({1.0}, {33}, 1.0, 33);
  CoefficientSet cs = reference(1, 0.3);
  ManufacturedProblem mp = manufacture(Expr::parse("cos(pi*x)*(1+t)"), Expr::parse("1 + x*t"), cs, g);
  SolveOptions o;
  o.picard_tol = 1e-13;
  SolveResult r = solve_linearized(mp.data, sample(cs, g), o);
  ASSERT_GE(r.updates.size(), 3u);
  for (size_t k = 0; k + 1 < r.updates.size(); ++k)
    if (r.updates[k] > 1e-12) EXPECT_LT(r.updates[k + 1] / r.updates[k], 0.5);
}

TEST(Solver, SolutionSatisfiesTheDiscreteScheme) {
  for (int dim : {1, 2}) {
    auto g = dim == 1 ? SpaceTimeGrid::build({1.0}, {33}, 1.0, 33)
                      : SpaceTimeGrid::build({1.0, 1.0}, {12, 12}, 1.0, 17);
    CoefficientSet cs = reference(dim, 0.2);
    if (dim == 2) {
      cs.set("a12", "0.1");
      cs.transpose["a21"] = Expr::constant(0.1);
    }
    SystemData d = SystemData::zeros(g);
    d.F = sample_field(Expr::parse("sin(3*x)*t"), g);
    d.g = sample_trace(Expr::parse("0.1*t"), g);
    d.uT = sample_level(Expr::parse("cos(pi*x)"), *g, 1.0);
    d.v0 = sample_level(Expr::parse("1 + 0.1*x"), *g, 0.0);
    SolveOptions o;
    o.picard_tol = 1e-12;
    LinearizedSolver solver(sample(cs, g), o);
    SolveResult r = solver.solve(d);
    EXPECT_LT(discrete_residual(r.u, r.v, d, solver).relative, 1e-9) << "dim " << dim;
  }
}

TEST(Solver, ZeroDataGivesZeroSolution) {
  auto g = SpaceTimeGrid::build({1.0}, {17}, 1.0, 17);
  SolveResult r = solve_linearized(SystemData::zeros(g), sample(reference(1, 0.3), g), SolveOptions{});
  EXPECT_EQ(l2_norm(r.u), 0.0);
  EXPECT_EQ(l2_norm(r.v), 0.0);
}

TEST(Solver, NonConvergenceRaisesWithIterationCount) {
  auto g = SpaceTimeGrid::build({1.0}, {17}, 1.0, 17);
  CoefficientSet cs = reference(1, 0.3);
  ManufacturedProblem mp = manufacture(Expr::parse("cos(pi*x)*(1+t)"), Expr::parse("1 + x*t"), cs, g);
  SolveOptions o;
  o.picard_max = 2;
  o.picard_tol = 1e-14;
  try {
    solve_linearized(mp.data, sample(cs, g), o);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.kind(), SolverError::Kind::MaxIterationsExceeded);
    EXPECT_GT(e.last_update(), 0.0);
  }
}

TEST(Solver, InvalidOptionsAreRejected) {
  SolveOptions o;
  o.theta = 1.5;
  EXPECT_THROW(o.validate(), ConfigError);
  o = SolveOptions{};
  o.picard_tol = 0.0;
  EXPECT_THROW(o.validate(), ConfigError);
}
