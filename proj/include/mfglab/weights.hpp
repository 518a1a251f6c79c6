#pragma once

#include <array>
#include <string>
#include <vector>

#include "mfglab/grid.hpp"

namespace mfglab {

// Affine weight profile eta = sign * (coord - origin), zero on the side opposite
// the chosen observed side.
struct Eta {
  int axis = 0;
  double sign = 1.0;
  double origin = 0.0;
  double norm = 1.0;  // max of eta over the closed domain
  Side observed_side = Side::X1;
  Side zero_side = Side::X0;

  double operator()(double x, double y) const { return sign * ((axis == 0 ? x : y) - origin); }
  std::array<double, 2> grad() const { return axis == 0 ? std::array<double, 2>{sign, 0.0} : std::array<double, 2>{0.0, sign}; }
};

// Picks the first fully observed side in the order x1, x0, y1, y0.
Eta build_eta(const BoundaryPartition& part);
std::vector<double> sample_eta(const Eta& eta, const SpaceTimeGrid& g);

struct MuValue {
  double mu = 0.0;
  double dmu = 0.0;
  double d2mu = 0.0;
};

// Time profile: t^2 on (0, T/4], quintic blend up to T/2, mirrored about T/2.
double eval_mu(double t, double T);
// Value and first two derivatives; defined on the closed interval [0, T].
MuValue mu_derivatives(double t, double T);

struct WeightValues {
  double phi = 0.0;
  double alpha = 0.0;
  double log_w = 0.0;  // 2 s alpha, -inf at t = 0 and t = T
};

class CarlemanWeights {
 public:
  CarlemanWeights(GridPtr grid, Eta eta, double lambda, double s = 1.0);

  const GridPtr& grid() const { return grid_; }
  const Eta& eta() const { return eta_; }
  double lambda() const { return lambda_; }
  double s() const { return s_; }
  double T() const { return grid_->T(); }
  CarlemanWeights with_s(double s) const;

  double mu(double t) const { return eval_mu(t, T()); }
  MuValue mu_d(double t) const { return mu_derivatives(t, T()); }
  double mu_max() const { return mu_max_; }
  // Largest value of alpha over Q (attained on the observed side at t = T/2).
  double alpha_max() const { return alpha_max_; }
  double exp_2norm() const { return e2_; }

  WeightValues eval(double x, double y, double t) const;
  // Tilde variant built from -eta.
  WeightValues eval_tilde(double x, double y, double t) const;

  double log_phi(double x, double y, double t) const;
  double alpha(double x, double y, double t) const;
  double dt_alpha(double x, double y, double t) const;
  double dtt_alpha(double x, double y, double t) const;

 private:
  GridPtr grid_;
  Eta eta_;
  double lambda_;
  double s_;
  double e2_ = 0.0;
  double mu_max_ = 0.0;
  double alpha_max_ = 0.0;
};

struct WeightBoundReport {
  double rho = 0.0;
  double sup = 0.0;
  double log_sup = 0.0;
  double argmax_x = 0.0;
  double argmax_y = 0.0;
  double argmax_t = 0.0;
  double s_at_sup = 0.0;
  bool finite = true;
};

// sup over grid nodes and s of phi^rho e^{2 s alpha}.
WeightBoundReport check_weight_bounds(double rho, const std::vector<double>& s_grid, const CarlemanWeights& w);

// Smallest C with |d_t phi| <= C phi^2 and |grad phi| <= C phi over interior nodes.
struct PhiDerivativeBounds {
  double time = 0.0;
  double space = 0.0;
};
PhiDerivativeBounds phi_derivative_bounds(const CarlemanWeights& w);

}  // namespace mfglab
