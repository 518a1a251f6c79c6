#pragma once

#include "mfglab/expr.hpp"
#include "mfglab/solver.hpp"

namespace mfglab {

// d_t u + a Lap u - (kappa/2)|grad u|^2 + c0 v = F,
// d_t v - Lap(a v) - div(kappa v grad u) = G,
// grad u . nu = grad(a v) . nu = 0.
struct NonlinearCoefficients {
  Expr a = Expr::constant(1.0);
  Expr kappa = Expr::constant(0.0);
  Expr c0 = Expr::constant(0.0);
};

struct NonlinearData {
  ScalarField F, G;
  std::vector<double> uT, v0;

  static NonlinearData zeros(const GridPtr& g);
};

struct NonlinearResult {
  ScalarField u, v;
  int iterations = 0;
  bool converged = false;
  std::vector<double> updates;
  double residual_u = 0.0;  // relative residual of the nonlinear equations
  double residual_v = 0.0;
};

// Linear coefficients with the gradient of u frozen: u_lag enters the u-operator drift,
// u_frozen the v-operator drift and zeroth-order term. Null fields mean zero.
SampledCoefficients frozen_coefficients(const NonlinearCoefficients& nc, const GridPtr& g, const ScalarField* u_lag,
                                        const ScalarField* u_frozen);

NonlinearResult solve_nonlinear(const NonlinearData& d, const NonlinearCoefficients& nc, const GridPtr& g,
                                const SolveOptions& opts);

// Relative residuals of the nonlinear pair (interior nodes, second-order differences).
std::pair<double, double> nonlinear_residual(const ScalarField& u, const ScalarField& v, const NonlinearData& d,
                                             const NonlinearCoefficients& nc);

// max over levels of sum_{|gamma| <= order} max_x |d^gamma f| (order 1 or 2).
double winf_norm(const ScalarField& f, int order);

}  // namespace mfglab
