#include <cmath>

#include <gtest/gtest.h>

#include "mfglab/errors.hpp"
#include "mfglab/inverse.hpp"
#include "mfglab/manufacture.hpp"

using namespace mfglab;

namespace {

SourceProblem problem(int nx = 33, int nt = 65) {
  auto g = SpaceTimeGrid::build({1.0}, {nx}, 1.0, nt);
  CoefficientSet cs = CoefficientSet::defaults(1);
  cs.set("a1", "0.3*x");
  cs.set("a0", "-0.5");
  cs.set("c0", "0.3");
  cs.set("k0", "0.2");
  SourceProblem p;
  p.grid = g;
  p.part = BoundaryPartition(g, {Side::X1});
  p.coef = sample(cs, g);
  p.q1 = sample_field(Expr::parse("1 + 0.5*t"), g);
  p.q2 = sample_field(Expr::parse("1 + 0.3*x"), g);
  p.base = SystemData::zeros(g);
  p.base.g = sample_trace(Expr::parse("0.1*sin(3*t)"), g);
  p.base.uT = sample_level(Expr::parse("cos(pi*x)"), *g, 1.0);
  p.win = make_window(*g, 0.5, 0.25, 0.75);
  p.opts.picard_tol = 1e-13;
  return p;
}

SourcePair truth(const SpaceTimeGrid& g) {
  return {sample_level(Expr::parse("sin(pi*x) + 0.5"), g, 0.0), sample_level(Expr::parse("x*x"), g, 0.0)};
}

double rel_error(const SpaceTimeGrid& g, const SourcePair& f, const SourcePair& t) {
  SourcePair e = f;
  for (size_t k = 0; k < e.f1.size(); ++k) {
    e.f1[k] -= t.f1[k];
    e.f2[k] -= t.f2[k];
  }
  return source_norm(g, e) / source_norm(g, t);
}

Eigen::VectorXd as_vector(std::vector<double> v) {
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TEST(Inverse, WindowSnapsToNearestLevelAndValidates) {
  auto g = SpaceTimeGrid::build({1.0}, {9}, 1.0, 128);
  ObservationWindow w = make_window(*g, 0.5, 0.25, 0.75);
  EXPECT_NEAR(g->t(w.level), 0.5, 0.5 * g->tau());
  EXPECT_LT(w.l0, w.level);
  EXPECT_GT(w.l1, w.level);
  EXPECT_THROW(make_window(*g, 0.9, 0.25, 0.75), ConfigError);
  EXPECT_THROW(make_window(*g, 0.5, 0.0, 0.75), ConfigError);
}

TEST(Inverse, PositivityFloorNamesTheNode) {
  SourceProblem p = problem(17, 33);
  p.q2 = sample_field(Expr::parse("x - 0.5"), p.grid);
  try {
    check_positivity(p);
    FAIL() << "expected InvariantViolation";
  } catch (const InvariantViolation& e) {
    EXPECT_NE(std::string(e.what()).find("node 8"), std::string::npos) << e.what();
  }
}

TEST(Inverse, StackUnstackRoundTrip) {
  auto g = SpaceTimeGrid::build({1.0}, {5}, 1.0, 9);
  SourcePair f{{1, 2, 3, 4, 5}, {6, 7, 8, 9, 10}};
  SourcePair back = unstack(stack(f), g->nodes());
  EXPECT_EQ(back.f1, f.f1);
  EXPECT_EQ(back.f2, f.f2);
}

TEST(Inverse, ForwardMapReproducesSimulatedFeatures) {
  SourceProblem p = problem();
  LinearizedSolver solver(p.coef, p.opts);
  ForwardMap fm = assemble_forward_map(p, solver);
  // Sources that are linear along x are reproduced exactly by the boundary extrapolation.
  SourcePair f{sample_level(Expr::parse("1 + x"), *p.grid, 0.0), sample_level(Expr::parse("2 - x"), *p.grid, 0.0)};
  Eigen::VectorXd x(fm.unknowns.size() * 2);
  for (size_t i = 0; i < fm.unknowns.size(); ++i) {
    x[i] = f.f1[fm.unknowns[i]];
    x[fm.unknowns.size() + i] = f.f2[fm.unknowns[i]];
  }
  Eigen::VectorXd y = as_vector(features(p, simulate(p, solver, f)));
  EXPECT_LT((fm.M * x + fm.offset - y).norm(), 1e-9 * y.norm());
}

TEST(Inverse, NoiselessReconstructionAndDirectFormula) {
  SourceProblem p = problem();
  LinearizedSolver solver(p.coef, p.opts);
  ForwardMap fm = assemble_forward_map(p, solver, 2);
  SourcePair t = truth(*p.grid);
  Eigen::VectorXd y = as_vector(features(p, simulate(p, solver, t)));
  Reconstruction r = reconstruct_tikhonov(fm, y, 1e-10);
  EXPECT_LT(rel_error(*p.grid, r.f, t), 1e-3);
  SolveResult sr = solver.solve(source_data(p, t));
  EXPECT_LT(rel_error(*p.grid, direct_source_formula(p, sr.u, sr.v), t), 5e-3);
}

TEST(Inverse, GradientMatchesFiniteDifferences) {
  SourceProblem p = problem(17, 33);
  LinearizedSolver solver(p.coef, p.opts);
  ForwardMap fm = assemble_forward_map(p, solver);
  Eigen::VectorXd y = as_vector(features(p, simulate(p, solver, truth(*p.grid))));
  GradientCheck gc = gradient_check(p, solver, fm, y, 1e-6, 4, 11);
  EXPECT_LT(gc.max_rel_error, 1e-6);
  // The assembled gradient against a hand-rolled difference of the assembled objective.
  Eigen::VectorXd x = Eigen::VectorXd::Constant(fm.M.cols(), 0.3), e = Eigen::VectorXd::Zero(fm.M.cols());
  e[2] = 1.0;
  const double h = 1e-4;
  double fd = (tikhonov_objective(fm, y, 1e-6, x + h * e) - tikhonov_objective(fm, y, 1e-6, x - h * e)) / (2 * h);
  EXPECT_NEAR(tikhonov_gradient(fm, y, 1e-6, x)[2], fd, 1e-6 * std::max(1.0, std::fabs(fd)));
}

TEST(Inverse, SingularUnregularizedSystemThrows) {
  ForwardMap fm;
  fm.M = Eigen::MatrixXd::Zero(3, 2);
  fm.M(0, 0) = 1.0;
  fm.offset = Eigen::VectorXd::Zero(3);
  fm.mass = Eigen::VectorXd::Ones(2);
  fm.grid = SpaceTimeGrid::build({1.0}, {3}, 1.0, 3);
  fm.unknowns = interior_nodes(*fm.grid);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(3);
  EXPECT_THROW(reconstruct_tikhonov(fm, y, 0.0), InvariantViolation);
  Reconstruction r = reconstruct_tikhonov(fm, y, 1e-3);
  EXPECT_TRUE(std::isfinite(r.condition));
}

TEST(Inverse, UniformNoiseIsDeterministicAndInRange) {
  UniformNoise a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    double x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_GE(x, -1.0);
    EXPECT_LT(x, 1.0);
    differs = differs || x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Inverse, LogLogFitRecoversPowerLaw) {
  std::vector<double> x{1e-4, 1e-3, 1e-2, 1e-1}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 1.5));
  auto [slope, res] = loglog_fit(x, y);
  EXPECT_NEAR(slope, 1.5, 1e-12);
  EXPECT_NEAR(res, 0.0, 1e-12);
}

TEST(Inverse, NoiseErrorScalesLinearly) {
  SourceProblem p = problem();
  LinearizedSolver solver(p.coef, p.opts);
  ForwardMap fm = assemble_forward_map(p, solver);
  LipschitzReport rep = lipschitz_noise(p, solver, fm, truth(*p.grid), {1e-4, 1e-3, 1e-2, 1e-1}, 1e-10, 3, 5);
  EXPECT_TRUE(rep.monotone);
  EXPECT_GT(rep.slope, 0.9);
  EXPECT_LT(rep.slope, 1.1);
}
