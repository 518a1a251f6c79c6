#include <cmath>

#include <gtest/gtest.h>

#include "mfglab/errors.hpp"
#include "mfglab/expr.hpp"

using namespace mfglab;

TEST(Expr, EvaluatesPrecedenceAndFunctions) {
  EXPECT_DOUBLE_EQ(Expr::parse("1 + 2*3^2").eval(0, 0, 0), 19.0);
  EXPECT_DOUBLE_EQ(Expr::parse("-2^2").eval(0, 0, 0), -4.0);
  EXPECT_DOUBLE_EQ(Expr::parse("x*y - t").eval(2, 3, 1), 5.0);
  EXPECT_NEAR(Expr::parse("sin(pi*x) + exp(t) + log(y) + sqrt(4)").eval(0.5, 1.0, 0.0), 4.0, 1e-15);
}

TEST(Expr, DerivativesMatchHandComputedOnes) {
  Expr u = Expr::parse("cos(3*x)*(1+t) + x*t*t");
  const double x = 0.3, t = 0.7;
  EXPECT_NEAR(u.diff(Var::X).eval(x, 0, t), -3 * std::sin(3 * x) * (1 + t) + t * t, 1e-14);
  EXPECT_NEAR(u.diff(Var::X).diff(Var::X).eval(x, 0, t), -9 * std::cos(3 * x) * (1 + t), 1e-13);
  EXPECT_NEAR(u.diff(Var::T).eval(x, 0, t), std::cos(3 * x) + 2 * x * t, 1e-14);
  EXPECT_TRUE(u.diff(Var::Y).is_zero());
}

TEST(Expr, QuotientAndPowerRules) {
  Expr f = Expr::parse("x^3 / (1 + x)");
  const double x = 0.4;
  double exact = (3 * x * x * (1 + x) - x * x * x) / ((1 + x) * (1 + x));
  EXPECT_NEAR(f.diff(Var::X).eval(x, 0, 0), exact, 1e-14);
}

TEST(Expr, ConstantsFoldAndRoundTrip) {
  EXPECT_EQ(Expr::parse("2*pi/pi").constant_value().value_or(-1), 2.0);
  Expr e = Expr::parse("sin(x)*t + 0.5");
  Expr back = Expr::parse(e.str());
  EXPECT_DOUBLE_EQ(back.eval(0.2, 0, 0.9), e.eval(0.2, 0, 0.9));
  EXPECT_FALSE(e.depends_on(Var::Y));
  EXPECT_TRUE(e.depends_on(Var::T));
}

TEST(Expr, MalformedInputIsAConfigError) {
  EXPECT_THROW(Expr::parse("sin(x"), ConfigError);
  EXPECT_THROW(Expr::parse("x + * y"), ConfigError);
  EXPECT_THROW(Expr::parse("foo(x)"), ConfigError);
  EXPECT_THROW(Expr::parse("z"), ConfigError);
  EXPECT_THROW(Expr::parse(""), ConfigError);
}
