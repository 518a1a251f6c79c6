#include "mfglab/weights.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "mfglab/errors.hpp"

namespace mfglab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Blend on r in [0,1]: matches t^2 (value, slope, curvature) at r = 0 and has
// vanishing first three derivatives at r = 1, so the mirrored profile is C^3 at T/2.
double q0(double r) { return 1.0 + r * (2.0 + r * (1.0 + r * (-6.0 + r * (5.5 - 1.6 * r)))); }
double q1(double r) { return 2.0 + r * (2.0 + r * (-18.0 + r * (22.0 - 8.0 * r))); }
double q2(double r) { return 2.0 + r * (-36.0 + r * (66.0 - 32.0 * r)); }

}  // namespace

Eta build_eta(const BoundaryPartition& part) {
  const auto& g = *part.grid();
  for (Side s : {Side::X1, Side::X0, Side::Y1, Side::Y0}) {
    if (g.dim() == 1 && (s == Side::Y0 || s == Side::Y1)) continue;
    if (!part.side_observed(s)) continue;
    Eta e;
    e.observed_side = s;
    switch (s) {
      case Side::X1: e = {0, 1.0, 0.0, g.lx(), s, Side::X0}; break;
      case Side::X0: e = {0, -1.0, g.lx(), g.lx(), s, Side::X1}; break;
      case Side::Y1: e = {1, 1.0, 0.0, g.ly(), s, Side::Y0}; break;
      case Side::Y0: e = {1, -1.0, g.ly(), g.ly(), s, Side::Y1}; break;
    }
    return e;
  }
  throw ConfigError("weight profile needs at least one fully observed side");
}

std::vector<double> sample_eta(const Eta& eta, const SpaceTimeGrid& g) {
  std::vector<double> out(g.nodes());
  for (int k = 0; k < g.nodes(); ++k) out[k] = eta(g.x(k), g.y(k));
  return out;
}

double eval_mu(double t, double T) {
  if (!(t > 0.0 && t < T)) throw ConfigError(fmt::format("time profile evaluated outside (0,T): t={}", t));
  return mu_derivatives(t, T).mu;
}

MuValue mu_derivatives(double t, double T) {
  double sign = 1.0;
  double tt = t;
  if (t > 0.5 * T) {
    tt = T - t;
    sign = -1.0;
  }
  const double h = 0.25 * T;
  MuValue m;
  if (tt <= h) {
    m.mu = tt * tt;
    m.dmu = 2.0 * tt;
    m.d2mu = 2.0;
  } else {
    double r = (tt - h) / h;
    m.mu = h * h * q0(r);
    m.dmu = h * q1(r);
    m.d2mu = q2(r);
  }
  m.dmu *= sign;
  return m;
}

CarlemanWeights::CarlemanWeights(GridPtr grid, Eta eta, double lambda, double s)
    : grid_(std::move(grid)), eta_(eta), lambda_(lambda), s_(s) {
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (!(s >= 0.0)) throw ConfigError("s must be non-negative");
  e2_ = std::exp(2.0 * lambda_ * eta_.norm);
  mu_max_ = mu_derivatives(0.5 * T(), T()).mu;
  alpha_max_ = (std::exp(lambda_ * eta_.norm) - e2_) / mu_max_;
}

CarlemanWeights CarlemanWeights::with_s(double s) const { return CarlemanWeights(grid_, eta_, lambda_, s); }

WeightValues CarlemanWeights::eval(double x, double y, double t) const {
  if (t <= 0.0 || t >= T()) return {kInf, -kInf, -kInf};
  double m = mu(t);
  double el = std::exp(lambda_ * eta_(x, y));
  WeightValues w;
  w.phi = el / m;
  w.alpha = (el - e2_) / m;
  w.log_w = 2.0 * s_ * w.alpha;
  return w;
}

WeightValues CarlemanWeights::eval_tilde(double x, double y, double t) const {
  if (t <= 0.0 || t >= T()) return {kInf, -kInf, -kInf};
  double m = mu(t);
  double el = std::exp(-lambda_ * eta_(x, y));
  WeightValues w;
  w.phi = el / m;
  w.alpha = (el - e2_) / m;
  w.log_w = 2.0 * s_ * w.alpha;
  return w;
}

double CarlemanWeights::log_phi(double x, double y, double t) const {
  if (t <= 0.0 || t >= T()) return kInf;
  return lambda_ * eta_(x, y) - std::log(mu(t));
}

double CarlemanWeights::alpha(double x, double y, double t) const { return eval(x, y, t).alpha; }

double CarlemanWeights::dt_alpha(double x, double y, double t) const {
  if (t <= 0.0 || t >= T()) return 0.0;
  MuValue m = mu_d(t);
  double num = std::exp(lambda_ * eta_(x, y)) - e2_;
  return -num * m.dmu / (m.mu * m.mu);
}

double CarlemanWeights::dtt_alpha(double x, double y, double t) const {
  if (t <= 0.0 || t >= T()) return 0.0;
  MuValue m = mu_d(t);
  double num = std::exp(lambda_ * eta_(x, y)) - e2_;
  return -num * (m.d2mu / (m.mu * m.mu) - 2.0 * m.dmu * m.dmu / (m.mu * m.mu * m.mu));
}

WeightBoundReport check_weight_bounds(double rho, const std::vector<double>& s_grid, const CarlemanWeights& w) {
  const auto& g = *w.grid();
  WeightBoundReport r;
  r.rho = rho;
  r.log_sup = -kInf;
  for (double s : s_grid) {
    if (s < 1.0) throw ConfigError("weight bound check expects s >= 1");
    for (int n = 1; n < g.nt() - 1; ++n) {
      double t = g.t(n);
      for (int k = 0; k < g.nodes(); ++k) {
        double lp = w.log_phi(g.x(k), g.y(k), t);
        double lv = rho * lp + 2.0 * s * w.alpha(g.x(k), g.y(k), t);
        if (lv > r.log_sup) {
          r.log_sup = lv;
          r.argmax_x = g.x(k);
          r.argmax_y = g.y(k);
          r.argmax_t = t;
          r.s_at_sup = s;
        }
      }
    }
  }
  r.finite = std::isfinite(r.log_sup) ? r.log_sup < 700.0 : r.log_sup < 0.0;
  r.sup = r.finite ? std::exp(r.log_sup) : kInf;
  return r;
}

PhiDerivativeBounds phi_derivative_bounds(const CarlemanWeights& w) {
  const auto& g = *w.grid();
  PhiDerivativeBounds b;
  auto gr = w.eta().grad();
  double gn = std::hypot(gr[0], gr[1]);
  for (int n = 1; n < g.nt() - 1; ++n) {
    MuValue m = w.mu_d(g.t(n));
    for (int k = 0; k < g.nodes(); ++k) {
      double el = std::exp(w.lambda() * w.eta()(g.x(k), g.y(k)));
      double phi = el / m.mu;
      double dphi = -phi * m.dmu / m.mu;
      b.time = std::max(b.time, std::fabs(dphi) / (phi * phi));
      b.space = std::max(b.space, w.lambda() * gn);
    }
  }
  return b;
}

}  // namespace mfglab
