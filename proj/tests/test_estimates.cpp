#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "mfglab/errors.hpp"
#include "mfglab/manufacture.hpp"
#include "mfglab/sweep.hpp"

using namespace mfglab;

namespace {

struct Fixture {
  GridPtr g;
  CoefficientSet cs;
  EstimateInput single, system;
};

Fixture setup(int nx = 33, int nt = 65) {
  Fixture s;
  s.g = SpaceTimeGrid::build({1.0}, {nx}, 1.0, nt);
  s.cs = CoefficientSet::defaults(1);
  s.cs.set("a1", "0.3*x");
  s.cs.set("a0", "-0.5");
  s.cs.set("c0", "0.5");
  s.cs.set("k0", "0.3");
  Expr u = Expr::parse("cos(3*x)*(1+t) + x*t*t"), v = Expr::parse("sin(2*x+t) + 0.2");
  ManufacturedProblem mp = manufacture(u, v, s.cs, s.g);
  EstimateInput& in = s.system;
  in.part = BoundaryPartition(s.g, {Side::X1});
  in.coef = sample(s.cs, s.g);
  in.dcoef = sample_time_derivative(s.cs, s.g);
  in.u = mp.u;
  in.v = mp.v;
  in.F = mp.data.F;
  in.G = mp.data.G;
  in.g = mp.data.g;
  in.h = mp.data.h;
  in.ut = mp.ut;
  in.vt = mp.vt;
  in.Ft = mp.dt_data.F;
  in.Gt = mp.dt_data.G;
  in.gt = mp.dt_data.g;
  in.ht = mp.dt_data.h;
  s.single = in;
  s.single.F = sample_field(u.diff(Var::T) + symbolic_A(s.cs, u), s.g);
  return s;
}

CarlemanWeights weights(const EstimateInput& in) { return CarlemanWeights(in.part.grid(), build_eta(in.part), 1.0); }

}  // namespace

TEST(Estimates, NamesRoundTrip) {
  for (auto k : {EstimateKind::Lemma1, EstimateKind::Lemma2, EstimateKind::Lemma4, EstimateKind::Theorem3,
                 EstimateKind::Prop1, EstimateKind::Lemma5, EstimateKind::Lemma6})
    EXPECT_EQ(parse_estimate(estimate_name(k)), k);
  EXPECT_THROW(parse_estimate("lemma9"), ConfigError);
}

TEST(Estimates, ScaledEstimatesDecreaseInS) {
  Fixture s = setup();
  for (double m : {-1.0, 0.0, 1.0}) {
    s.single.m = m;
    EstimateReport r = sweep_s(EstimateKind::Lemma2, s.single, weights(s.single), {4, 8, 16, 32, 64});
    ASSERT_TRUE(r.any_defined);
    EXPECT_TRUE(r.tail_nonincreasing) << "m = " << m;
    EXPECT_FALSE(r.violation);
    EXPECT_LT(r.records.back().ratio, r.records.front().ratio);
    EXPECT_GT(r.C_emp, 0.0);
    for (const auto& rec : r.records) EXPECT_LE(rec.ratio, r.C_emp);
  }
}

TEST(Estimates, TermsAreNonnegativeAndLogTotalsConsistent) {
  Fixture s = setup();
  EstimateRecord rec = evaluate_estimate(EstimateKind::Lemma1, s.single, weights(s.single).with_s(8));
  double lhs = 0, rhs = 0;
  for (const auto& t : rec.terms) {
    EXPECT_GE(t.value, 0.0) << t.name;
    (t.lhs ? lhs : rhs) += t.value;
  }
  // Lemma 1 terms are all weighted, so both totals share the normalization.
  EXPECT_NEAR(rec.log_lhs - rec.log_rhs, std::log(lhs / rhs), 1e-10);
  EXPECT_NEAR(rec.ratio, lhs / rhs, 1e-12 * lhs / rhs);
}

TEST(Estimates, SystemEstimatesHaveFiniteLogRatios) {
  Fixture s = setup();
  for (auto k : {EstimateKind::Theorem3, EstimateKind::Prop1, EstimateKind::Lemma5}) {
    s.system.r = 0.5;
    EstimateReport r = sweep_s(k, k == EstimateKind::Lemma5 ? s.single : s.system,
                               weights(s.system), {4, 8, 16, 32});
    EXPECT_TRUE(std::isfinite(r.log_C_emp)) << estimate_name(k);
    EXPECT_TRUE(r.tail_nonincreasing) << estimate_name(k);
  }
}

TEST(Estimates, WrongSourceFailsTheInputCheck) {
  Fixture s = setup();
  EstimateInput bad = s.single;
  bad.F = 2.0 * bad.F;
  EXPECT_THROW(check_estimate_input(EstimateKind::Lemma1, bad), InvariantViolation);
  EXPECT_NO_THROW(check_estimate_input(EstimateKind::Lemma1, s.single));
  EXPECT_NO_THROW(check_estimate_input(EstimateKind::Theorem3, s.system));
}

TEST(Estimates, ZeroFieldsGiveUndefinedRatios) {
  Fixture s = setup(17, 33);
  EstimateInput z = s.single;
  z.u = ScalarField(s.g);
  z.F = ScalarField(s.g);
  z.g = BoundaryTrace(s.g);
  z.ut = ScalarField();
  z.gt = BoundaryTrace();
  z.Ft = ScalarField();
  EstimateReport r = sweep_s(EstimateKind::Lemma1, z, weights(z), {4, 8, 16, 32});
  EXPECT_FALSE(r.any_defined);
  EXPECT_FALSE(r.violation);
}

TEST(Estimates, SweepGridMustBeGeometric) {
  Fixture s = setup(17, 33);
  EXPECT_THROW(sweep_s(EstimateKind::Lemma1, s.single, weights(s.single), {4, 8, 12, 16}), ConfigError);
  EXPECT_THROW(sweep_s(EstimateKind::Lemma1, s.single, weights(s.single), {4, 8, 16}), ConfigError);
}

TEST(Estimates, RefinementDriftIsSmall) {
  Fixture a = setup(33, 65), b = setup(65, 129);
  EstimateReport ra = sweep_s(EstimateKind::Lemma1, a.single, weights(a.single), {4, 8, 16, 32});
  EstimateReport rb = sweep_s(EstimateKind::Lemma1, b.single, weights(b.single), {4, 8, 16, 32});
  EXPECT_LT(c_emp_drift(ra, rb), 0.1);
  EXPECT_EQ(c_emp_drift(ra, ra), 0.0);
}

TEST(Estimates, ParallelSweepMatchesSerial) {
  Fixture s = setup(17, 33);
  EstimateReport a = sweep_s(EstimateKind::Lemma5, s.single, weights(s.single), {4, 8, 16, 32}, 1);
  EstimateReport b = sweep_s(EstimateKind::Lemma5, s.single, weights(s.single), {4, 8, 16, 32}, 3);
  std::ostringstream sa, sb;
  write_csv(a, sa);
  write_csv(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}
